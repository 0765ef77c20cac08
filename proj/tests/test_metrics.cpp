#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "laid/error.hpp"
#include "laid/metrics.hpp"
#include "laid/rng.hpp"
#include "oracles.hpp"

using namespace laid;

namespace {

PredictionRecord rec(std::uint8_t yp, std::uint8_t yf, std::uint8_t g) {
  return PredictionRecord::from_scores(yp ? 0.9 : 0.1, yf ? 0.9 : 0.1, g);
}

std::vector<PredictionRecord> random_records(Rng& rng, std::size_t n) {
  std::vector<PredictionRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    // Coarse scores so that ties occur.
    const double sp = std::round(rng.uniform() * 20) / 20, sf = rng.uniform();
    out.push_back(PredictionRecord::from_scores(sp, sf, static_cast<std::uint8_t>(rng.below(2))));
  }
  return out;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("record decision threshold") {
    const auto r = PredictionRecord::from_scores(0.5, 0.4999, 1);
    CHECK(r.y_p == 1);
    CHECK(r.y_f == 0);
    CHECK_THROWS_AS(PredictionRecord::from_scores(0.1, 0.1, 2), Error);
  }

  TEST_CASE("accuracy examples") {
    const std::vector<PredictionRecord> all = {rec(1, 1, 1), rec(0, 0, 0)};
    CHECK(accuracy(all, Domain::Spatial) == 100.0);
    const std::vector<PredictionRecord> four = {rec(1, 0, 1), rec(0, 0, 1), rec(0, 0, 0), rec(0, 0, 0)};
    CHECK(accuracy(four, Domain::Spatial) == 75.0);
    CHECK(accuracy(four, Domain::Spectral) == 50.0);
    CHECK(accuracy(four, Domain::Spatial) + (100.0 - accuracy(four, Domain::Spatial)) == 100.0);
    CHECK_THROWS_AS(accuracy(std::vector<PredictionRecord>{}, Domain::Spatial), Error);

    Rng rng(1);
    std::vector<PredictionRecord> coin;
    for (int i = 0; i < 100000; ++i) {
      coin.push_back(rec(static_cast<std::uint8_t>(rng.below(2)), 0, static_cast<std::uint8_t>(rng.below(2))));
    }
    CHECK(std::abs(accuracy(coin, Domain::Spatial) - 50.0) < 1.0);
  }

  TEST_CASE("f1 examples") {
    const std::vector<PredictionRecord> perfect = {rec(1, 1, 1), rec(0, 0, 0)};
    CHECK(f1_score(perfect, Domain::Spatial) == 1.0);
    // TP=1 FP=1 FN=1, plus a TN.
    const std::vector<PredictionRecord> mixed = {rec(1, 0, 1), rec(1, 0, 0), rec(0, 0, 1), rec(0, 0, 0)};
    CHECK(f1_score(mixed, Domain::Spatial) == doctest::Approx(0.5));
    CHECK(f1_score(mixed, Domain::Spectral) == 0.0);
  }

  TEST_CASE("f1 invariant under permutation") {
    Rng rng(2);
    auto r = random_records(rng, 300);
    const double f = f1_score(r, Domain::Spectral);
    rng.shuffle(std::span<PredictionRecord>(r));
    CHECK(f1_score(r, Domain::Spectral) == f);
  }

  TEST_CASE("auc examples") {
    auto make = [](std::vector<double> s, std::vector<std::uint8_t> g) {
      std::vector<PredictionRecord> r;
      for (std::size_t i = 0; i < s.size(); ++i) r.push_back(PredictionRecord::from_scores(s[i], s[i], g[i]));
      return r;
    };
    CHECK(auc_roc(make({0.9, 0.8, 0.3, 0.1}, {1, 1, 0, 0}), Domain::Spatial) == 1.0);
    CHECK(auc_roc(make({0.9, 0.8, 0.3, 0.1}, {1, 0, 1, 0}), Domain::Spatial) == 0.75);
    CHECK(auc_roc(make({0.5, 0.5}, {1, 0}), Domain::Spatial) == 0.5);
    try {
      auc_roc(make({0.2, 0.3}, {1, 1}), Domain::Spatial);
      FAIL("expected an undefined-metric error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::UndefinedMetric);
    }
  }

  TEST_CASE("auc equals the pairwise oracle and is monotone-invariant") {
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
      auto r = random_records(rng, 2 + rng.below(200));
      r[0].g = 0;
      r[1].g = 1;
      std::vector<double> s;
      std::vector<int> g;
      for (const auto& x : r) {
        s.push_back(x.score_p);
        g.push_back(x.g);
      }
      const double a = auc_roc(r, Domain::Spatial);
      CHECK(std::abs(a - oracle::pairwise_auc(s, g)) < 1e-12);
      auto warped = r;
      for (auto& x : warped) x.score_p = std::exp(3 * x.score_p) - 7;
      CHECK(auc_roc(warped, Domain::Spatial) == doctest::Approx(a).epsilon(1e-12));
    }
  }

  TEST_CASE("efficiency ratios") {
    const auto shuffle = efficiency_ratios(92.40, 0.3439e6, 1.0e6);
    CHECK(shuffle.acc_per_mparams == doctest::Approx(268.68).epsilon(1e-4));
    CHECK(std::abs(shuffle.acc_per_mparams / 268.72 - 1.0) < 1e-3);
    const auto unit = efficiency_ratios(100.0, 1e6, 1e6);
    CHECK(unit.acc_per_mparams == 100.0);
    CHECK(unit.acc_per_mflops == 100.0);
    CHECK(efficiency_ratios(50.0, 2e6, 1e6).acc_per_mparams == 25.0);
    CHECK_THROWS_AS(efficiency_ratios(50.0, 0.0, 1e6), Error);
    CostReport c;
    c.params = 2000000;
    c.flops = 4000000;
    CHECK(efficiency_ratios(50.0, c).acc_per_mflops == 12.5);
  }

  TEST_CASE("fusion rule") {
    CHECK(fusion_success(rec(1, 0, 1)));
    CHECK_FALSE(fusion_success(rec(0, 0, 1)));
    CHECK(fusion_success(rec(1, 1, 1)));
    CHECK(fusion_success(rec(0, 1, 1)));
  }

  TEST_CASE("protocol settings") {
    Rng rng(4);
    const auto r = random_records(rng, 500);
    const auto sp = evaluate_protocol(r, Setting::AdvSpatial);
    const auto sf = evaluate_protocol(r, Setting::AdvSpectral);
    const auto fu = evaluate_protocol(r, Setting::AdvFusion);
    CHECK(fu.accuracy >= std::max(sp.accuracy, sf.accuracy));
    std::size_t hits = 0;
    for (const auto& x : r) hits += (x.y_p == x.g) || (x.y_f == x.g);
    CHECK(fu.accuracy == 100.0 * static_cast<double>(hits) / 500.0);
    CHECK(fusion_accuracy(r) == fu.accuracy);
    CHECK(sp.f1.has_value());
    CHECK(sp.auc_roc.has_value());
    CHECK_FALSE(fu.f1.has_value());
    try {
      (void)fu.auc_value();
      FAIL("expected unsupported-metric");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::UnsupportedMetric);
    }
    CHECK_THROWS_AS((void)fu.f1_value(), Error);
    CHECK(sp.n == 500);
    CHECK(is_fusion(Setting::CleanFusion));
    CHECK(domain_of(Setting::CleanSpectral) == Domain::Spectral);
  }

  TEST_CASE("disjoint failures give perfect fusion") {
    std::vector<PredictionRecord> r;
    for (int i = 0; i < 50; ++i) {
      const std::uint8_t g = static_cast<std::uint8_t>(i % 2);
      const bool crop_like = i < 25;
      r.push_back(rec(crop_like ? g : 1 - g, crop_like ? 1 - g : g, g));
    }
    CHECK(evaluate_protocol(r, Setting::AdvFusion).accuracy == 100.0);
    CHECK(evaluate_protocol(r, Setting::AdvSpatial).accuracy == 50.0);
  }

  TEST_CASE("single-class records leave AUC empty") {
    const std::vector<PredictionRecord> r = {rec(1, 1, 1), rec(0, 1, 1)};
    const auto e = evaluate_protocol(r, Setting::CleanSpatial);
    CHECK_FALSE(e.auc_roc.has_value());
    CHECK_THROWS_AS((void)e.auc_value(), Error);
  }

  TEST_CASE("report formatting") {
    Rng rng(5);
    const auto r = random_records(rng, 100);
    CostReport c;
    c.params = 3714;
    c.flops = 1000000;
    std::vector<EvalReport> reports = {evaluate_protocol(r, Setting::CleanSpatial, &c),
                                       evaluate_protocol(r, Setting::AdvFusion)};
    reports[1].label = "jpeg";
    const auto text = format_reports_text(reports);
    CHECK(text.find("clean-spatial") != std::string::npos);
    CHECK(text.find("jpeg") != std::string::npos);
    const auto j = nlohmann::json::parse(format_reports_json(reports));
    REQUIRE(j.is_array());
    REQUIRE(j.size() == 2);
    CHECK(j[0]["accuracy"].get<double>() == doctest::Approx(reports[0].accuracy));
    CHECK(j[1]["f1"].is_null());
    CHECK(j[0]["acc_per_mparams"].get<double>() > 0);
  }
}
