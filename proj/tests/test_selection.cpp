#include <doctest.h>

#include <algorithm>
#include <set>

#include "laid/error.hpp"
#include "laid/rng.hpp"
#include "laid/selection.hpp"

using namespace laid;

namespace {

// Rows of the published selection table: accuracy %, params (M), GFLOPs.
std::vector<CandidateModel> published_rows() {
  return {
      {"ShuffleNet", "ShuffleNet", 60.55, 1.4e6, 0.04e9},
      {"EdgeNeXt", "EdgeNeXt", 71.20, 1.3e6, 0.26e9},
      {"MobileNetV3", "MobileNetV3", 67.67, 2.5e6, 0.06e9},
      {"MobileViT", "MobileViT", 69.00, 1.3e6, 0.40e9},
      {"MobileViTV2", "MobileViTV2", 70.20, 1.4e6, 0.50e9},
      {"MNASNet", "MNASNet", 67.73, 2.2e6, 0.10e9},
      {"SqueezeNet", "SqueezeNet", 58.18, 1.2e6, 0.35e9},
      {"MobileNetV2", "MobileNetV2", 72.15, 3.5e6, 0.30e9},
      {"FastViT", "FastViT", 75.60, 3.6e6, 0.70e9},
      {"RegNet", "RegNet", 75.80, 4.3e6, 0.40e9},
  };
}

double hand_score(const CandidateModel& m, const std::vector<CandidateModel>& pool,
                  double l1, double l2, double l3) {
  double ma = 0, mf = 1e300, mp = 1e300;
  for (const auto& c : pool) {
    ma = std::max(ma, c.top1_acc);
    mf = std::min(mf, c.flops);
    mp = std::min(mp, c.params);
  }
  return l1 * m.top1_acc / ma + l2 * mf / m.flops + l3 * mp / m.params;
}

}  // namespace

TEST_SUITE("selection") {
  TEST_CASE("constraint filter") {
    const std::vector<CandidateModel> pool = {
        {"a", "a", 70, 9e6, 5e9}, {"b", "b", 70, 23e6, 0.5e9}, {"c", "c", 70, 12e6, 2e9}};
    const auto kept = constraint_filter(pool);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].name == "a");
    CHECK(kept[1].name == "b");
  }

  TEST_CASE("efficiency score examples") {
    const EfficiencyWeights w;
    const std::vector<CandidateModel> dom = {{"best", "x", 90, 1e6, 1e8}, {"other", "y", 80, 2e6, 3e8}};
    CHECK(efficiency_score(dom[0], dom, w) == 1.0);

    const std::vector<CandidateModel> ab = {{"A", "A", 80, 4e6, 2e9}, {"B", "B", 40, 1e6, 1e9}};
    CHECK(efficiency_score(ab[0], ab, w) == 0.6875);
    CHECK(efficiency_score(ab[1], ab, w) == 0.75);

    CHECK_THROWS_AS(efficiency_score(ab[0], {}, w), Error);
    CHECK_THROWS_AS(EfficiencyWeights({-0.1, 0.5, 0.5}).validate(), Error);
    CHECK_THROWS_AS(EfficiencyWeights({0, 0, 0}).validate(), Error);
  }

  TEST_CASE("published rows alone do not reproduce the published ShuffleNet score") {
    const auto rows = published_rows();
    const double e = efficiency_score(rows[0], rows, EfficiencyWeights{});
    CHECK(e == doctest::Approx(0.5 * 60.55 / 75.80 + 0.25 + 0.25 * 1.2 / 1.4));
    CHECK(e == doctest::Approx(0.864).epsilon(1e-3));
    CHECK(std::abs(e - 0.806) > 0.05);
    const auto ranked = rank_and_dedupe(rows, EfficiencyWeights{}, 10);
    CHECK(ranked[0].model.name == "ShuffleNet");
  }

  TEST_CASE("score bounds and ratio invariances") {
    Rng rng(1);
    std::vector<CandidateModel> pool;
    for (int i = 0; i < 30; ++i) {
      pool.push_back({"m" + std::to_string(i), "f" + std::to_string(i % 7), rng.uniform(40, 90),
                      rng.uniform(1e5, 9e6), rng.uniform(1e7, 9e8)});
    }
    const EfficiencyWeights w{0.4, 0.35, 0.25};
    std::vector<double> base;
    for (const auto& m : pool) {
      const double e = efficiency_score(m, pool, w);
      CHECK(e > 0.0);
      CHECK(e <= 1.0 + 1e-12);
      base.push_back(e);
    }
    for (int field = 0; field < 3; ++field) {
      auto scaled = pool;
      for (auto& m : scaled) {
        if (field == 0) m.top1_acc *= 0.5;
        if (field == 1) m.flops *= 7.25;
        if (field == 2) m.params *= 1e-3;
      }
      for (std::size_t i = 0; i < pool.size(); ++i) {
        CHECK(efficiency_score(scaled[i], scaled, w) == doctest::Approx(base[i]).epsilon(1e-12));
      }
    }
    auto with_dominated = pool;
    with_dominated.push_back({"worst", "zz", 39.0, 9.5e6, 9.5e8});
    for (std::size_t i = 0; i < pool.size(); ++i) {
      CHECK(efficiency_score(pool[i], with_dominated, w) == base[i]);
    }
  }

  TEST_CASE("rank and dedupe") {
    const std::vector<CandidateModel> shuffles = {{"shufflenet_x1_0", "ShuffleNet", 69.4, 2.3e6, 0.15e9},
                                                  {"shufflenet_x0_5", "ShuffleNet", 60.55, 1.4e6, 0.04e9},
                                                  {"mnasnet", "MNASNet", 67.7, 2.2e6, 0.1e9}};
    const auto r = rank_and_dedupe(shuffles, EfficiencyWeights{}, 10);
    REQUIRE(r.size() == 2);
    CHECK(r[0].model.name == "shufflenet_x0_5");
    CHECK(r[0].rank == 1);
    CHECK(r[1].model.family == "MNASNet");

    const std::vector<CandidateModel> one = {{"solo", "S", 50, 1e6, 1e8}};
    const auto r1 = rank_and_dedupe(one, EfficiencyWeights{}, 3);
    REQUIRE(r1.size() == 1);
    CHECK(r1[0].rank == 1);
    CHECK(r1[0].original_rank == 1);
    CHECK_THROWS_AS(rank_and_dedupe(one, EfficiencyWeights{}, 0), Error);
  }

  TEST_CASE("ranking matches an independent sort oracle") {
    Rng rng(2);
    std::vector<CandidateModel> pool;
    for (int i = 0; i < 20; ++i) {
      pool.push_back({"n" + std::to_string(100 + i), "fam" + std::to_string(i), rng.uniform(50, 80),
                      1e6 * (1 + rng.below(5)), 1e8 * (1 + rng.below(5))});
    }
    const EfficiencyWeights w{0.5, 0.25, 0.25};
    struct Row {
      double e;
      CandidateModel m;
    };
    std::vector<Row> rows;
    for (const auto& m : pool) rows.push_back({hand_score(m, pool, 0.5, 0.25, 0.25), m});
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
      if (a.e != b.e) return a.e > b.e;
      if (a.m.flops != b.m.flops) return a.m.flops < b.m.flops;
      if (a.m.params != b.m.params) return a.m.params < b.m.params;
      return a.m.name < b.m.name;
    });
    const auto ranked = rank_and_dedupe(pool, w, 20);
    REQUIRE(ranked.size() == 20);
    for (std::size_t i = 0; i < 20; ++i) {
      CHECK(ranked[i].model.name == rows[i].m.name);
      CHECK(ranked[i].score == doctest::Approx(rows[i].e).epsilon(1e-12));
    }

    auto dup = pool;
    for (auto& m : dup) m.family = "g" + std::to_string(m.name.back() % 4);
    const auto d = rank_and_dedupe(dup, w, 10);
    std::set<std::string> fams;
    for (const auto& r : d) fams.insert(r.model.family);
    CHECK(fams.size() == d.size());
    CHECK(d.size() == 4);
  }

  TEST_CASE("pool parsing") {
    const auto pool = parse_candidate_pool(
        "# pool\nflops,name,family,params,top1_acc\n4e7,shuf,ShuffleNet,1.4e6,60.55\n"
        "2.6e8,edge,EdgeNeXt,1.3e6,71.2\n");
    REQUIRE(pool.size() == 2);
    CHECK(pool[0].name == "shuf");
    CHECK(pool[0].flops == 4e7);
    CHECK(pool[1].top1_acc == 71.2);
    const auto tsv = parse_candidate_pool("name\tfamily\ttop1_acc\tparams\tflops\na\tA\t50\t1\t2\n");
    CHECK(tsv.size() == 1);
    CHECK_THROWS_AS(parse_candidate_pool("name,family,params\nx,y,1\n"), Error);
    CHECK_THROWS_AS(parse_candidate_pool("name,family,top1_acc,params,flops\nx,y,abc,1,1\n"), Error);
    const auto text = format_ranking(rank_and_dedupe(pool, EfficiencyWeights{}, 5));
    CHECK(text.find("shuf") != std::string::npos);
  }
}
