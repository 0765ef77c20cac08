// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "laid/attacks.hpp"
#include "laid/data.hpp"
#include "laid/fft.hpp"
#include "laid/metrics.hpp"
#include "laid/nn.hpp"
#include "laid/rng.hpp"
#include "laid/selection.hpp"
#include "laid/trend.hpp"
#include "oracles.hpp"

using namespace laid;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and budgets.
constexpr double kFftTol = 1e-6;
constexpr double kFftSeconds = 10.0;
constexpr double kGradTol = 1e-3;
constexpr double kGradSeconds = 60.0;
constexpr double kAucTol = 1e-12;
constexpr double kFitRelTol = 0.005;
constexpr double kFitR2Tol = 0.02;
constexpr double kNoiseVarRelTol = 0.10;
constexpr double kInclusionTol = 0.02;
constexpr double kSpectralMinAcc = 95.0;
constexpr double kSpatialMinAcc = 85.0;
constexpr double kRunSeconds = 30.0 * 60.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s %-22s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
  std::fflush(stdout);
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("missing " + p.string());
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome fft_oracle() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst = 0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t h = 4 + rng.below(13), w = 4 + rng.below(13);
    std::vector<double> plane(h * w);
    double norm = 0;
    for (double& v : plane) {
      v = rng.uniform(-1, 1) * 255;
      norm += v * v;
    }
    norm = std::sqrt(norm);
    const ComplexPlane got = fft2d(plane, h, w);
    const auto want = oracle::naive_dft2(plane, h, w);
    for (std::size_t k = 0; k < h * w; ++k) {
      const double err = std::abs(std::complex<double>(got.re[k], got.im[k]) - want[k]);
      worst = std::max(worst, err / norm);
    }
  }
  const double secs = seconds_since(t0);
  return {worst < kFftTol && secs < kFftSeconds,
          fmt("max err/norm %.3g, %.2f s", worst, secs)};
}

Outcome gradient_suite() {
  using namespace nn;
  const auto t0 = Clock::now();
  Rng rng(202);
  double worst = 0;
  std::size_t configs = 0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t cin = 1 + rng.below(3), mid = 2 + rng.below(3);
    const std::size_t side = 4 + rng.below(4);
    const std::size_t k = 1 + 2 * rng.below(2), stride = 1 + rng.below(2);
    // Every configuration exercises each layer kind once.
    const NetworkGraph net({LayerSpec::conv2d(cin, mid, k, stride, k / 2), LayerSpec::batchnorm(mid),
                            LayerSpec::relu(), LayerSpec::depthwise(mid, 3, 1, 1),
                            LayerSpec::maxpool(2, 1, 0), LayerSpec::pointwise(mid, mid),
                            LayerSpec::global_avg_pool(), LayerSpec::linear(mid, 2)});
    const auto r = gradcheck::run<double>(net, {cin, side, side}, 2 + rng.below(2), rng, 1e-6);
    worst = std::max({worst, r.max_rel_param, r.max_rel_input});
    ++configs;
  }
  const double secs = seconds_since(t0);
  return {worst < kGradTol && secs < kGradSeconds,
          fmt("%g configs, max rel err %.3g, %.2f s", static_cast<double>(configs), worst, secs)};
}

Outcome auc_oracle() {
  Rng rng(303);
  double worst = 0;
  for (int s = 0; s < 100; ++s) {
    const std::size_t n = 2 + rng.below(499);
    std::vector<PredictionRecord> recs;
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint8_t g = i < 2 ? static_cast<std::uint8_t>(i) : static_cast<std::uint8_t>(rng.below(2));
      const double sp = std::round(rng.uniform() * 50) / 50;
      recs.push_back(PredictionRecord::from_scores(sp, rng.uniform(), g));
    }
    std::vector<double> sp, sf;
    std::vector<int> y;
    for (const auto& r : recs) {
      sp.push_back(r.score_p);
      sf.push_back(r.score_f);
      y.push_back(r.g);
    }
    worst = std::max(worst, std::abs(auc_roc(recs, Domain::Spatial) - oracle::pairwise_auc(sp, y)));
    worst = std::max(worst, std::abs(auc_roc(recs, Domain::Spectral) - oracle::pairwise_auc(sf, y)));
  }
  return {worst <= kAucTol, fmt("max |diff| %.3g over 100 sets", worst)};
}

Outcome efficiency_score_checks() {
  const EfficiencyWeights w{0.5, 0.25, 0.25};
  const std::vector<CandidateModel> dom = {
      {"best", "a", 91, 1.2e6, 4e7}, {"b", "b", 88, 3e6, 3e8}, {"c", "c", 75, 2e6, 9e8}};
  const bool dominant = efficiency_score(dom[0], dom, w) == 1.0;

  const std::vector<CandidateModel> ab = {{"A", "A", 80, 4e6, 2e9}, {"B", "B", 40, 1e6, 1e9}};
  const double ea = efficiency_score(ab[0], ab, w), eb = efficiency_score(ab[1], ab, w);
  const bool example = ea == 0.6875 && eb == 0.75;

  Rng rng(404);
  double worst = 0;
  for (int t = 0; t < 50; ++t) {
    std::vector<CandidateModel> pool;
    for (int i = 0; i < 6; ++i) {
      pool.push_back({"m" + std::to_string(i), "f", rng.uniform(50, 99), rng.uniform(1e5, 1e7),
                      rng.uniform(1e7, 1e9)});
    }
    const double k = rng.uniform(0.1, 100);
    // Accuracy stays a percentage, so its factor is drawn from (0.1, 1].
    const double k_acc = rng.uniform(0.1, 1.0);
    for (int field = 0; field < 3; ++field) {
      auto scaled = pool;
      for (auto& m : scaled) {
        if (field == 0) m.top1_acc *= k_acc;
        if (field == 1) m.params *= k;
        if (field == 2) m.flops *= k;
      }
      for (std::size_t i = 0; i < pool.size(); ++i) {
        worst = std::max(worst, std::abs(efficiency_score(pool[i], pool, w) -
                                         efficiency_score(scaled[i], scaled, w)));
      }
    }
  }
  const bool invariant = worst < 1e-12;
  return {dominant && example && invariant,
          fmt("dominant E=%.6f, example %.6f/%.6f", efficiency_score(dom[0], dom, w), ea, eb) +
              fmt(", rescale drift %.3g", worst)};
}

Outcome trend_panels() {
  struct Target {
    const char* name;
    double slope, intercept, r2;
  };
  const Target targets[3] = {{"a", 1.058, 93.902, 0.27},
                             {"b", 5.624, 93.495, 0.33},
                             {"c", -18.92, 107.84, 0.55}};
  const auto panels = reference_trend_panels();
  bool ok = panels.size() == 3;
  std::string detail;
  for (std::size_t i = 0; i < std::min<std::size_t>(3, panels.size()); ++i) {
    const TrendFit f = linear_fit(panels[i].points);
    const Target& t = targets[i];
    const bool good = std::abs(f.slope - t.slope) <= kFitRelTol * std::abs(t.slope) &&
                      std::abs(f.intercept - t.intercept) <= kFitRelTol * std::abs(t.intercept) &&
                      std::abs(f.r_squared - t.r2) <= kFitR2Tol;
    ok = ok && good;
    detail += std::string(t.name) + fmt("=(%.3f, %.3f, %.3f)", f.slope, f.intercept, f.r_squared) +
              (good ? " ok; " : " off; ");
  }
  return {ok, detail};
}

Outcome attack_statistics() {
  using namespace attack_ranges;
  Rng rng(505);
  bool in_range = true;
  for (int kind = 0; kind < 5; ++kind) {
    for (int i = 0; i < 100000; ++i) {
      const AttackSpec s = sample_attack(static_cast<AttackKind>(kind), rng);
      if (s.crop_fraction < kCropMin || s.crop_fraction > kCropMax) in_range = false;
      if (std::find(kBlurKernels.begin(), kBlurKernels.end(), s.blur_kernel) == kBlurKernels.end()) in_range = false;
      if (std::find(kBlurSigmas.begin(), kBlurSigmas.end(), s.blur_sigma) == kBlurSigmas.end()) in_range = false;
      if (s.noise_variance < kNoiseVarMin || s.noise_variance > kNoiseVarMax) in_range = false;
      if (s.jpeg_quality < kJpegQualityMin || s.jpeg_quality > kJpegQualityMax) in_range = false;
    }
  }

  const ImageTensor gray(512, 512, 1, RangeTag::Byte0255, 128.0f);
  AttackSpec ns;
  ns.kind = AttackKind::Noise;
  ns.noise_variance = 12.0;
  ns.seed = 77;
  const ImageTensor noisy = attack_noise(gray, ns);
  double sum = 0, ss = 0;
  for (float v : noisy.data()) {
    sum += v;
    ss += static_cast<double>(v) * v;
  }
  const double n = static_cast<double>(noisy.size());
  const double var = ss / n - (sum / n) * (sum / n);
  const bool noise_ok = std::abs(var - ns.noise_variance) <= kNoiseVarRelTol * ns.noise_variance;

  Rng crng(606);
  std::array<int, 4> counts{};
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) {
    const AttackSpec s = sample_attack(AttackKind::Combined, crng);
    for (int k = 0; k < 4; ++k) counts[k] += s.include[k];
  }
  double worst_freq = 0;
  for (int c : counts) worst_freq = std::max(worst_freq, std::abs(c / double(draws) - 0.5));
  const bool incl_ok = worst_freq <= kInclusionTol;

  const QuantTables q = jpeg_tables(50);
  const bool tables_ok = q.luma == kBaseLumaTable && q.chroma == kBaseChromaTable;

  const ImageTensor mid(32, 32, 3, RangeTag::Byte0255, 128.0f);
  AttackSpec js;
  js.kind = AttackKind::Jpeg;
  bool fixed_ok = true;
  for (int quality : {25, 50, 90}) {
    js.jpeg_quality = quality;
    fixed_ok = fixed_ok && attack_jpeg(mid, js) == mid;
  }
  return {in_range && noise_ok && incl_ok && tables_ok && fixed_ok,
          std::string("ranges ") + (in_range ? "ok" : "off") + fmt(", noise var %.3f/12", var) +
              fmt(", inclusion dev %.4f", worst_freq) + ", q50 tables " + (tables_ok ? "ok" : "off") +
              ", fixed point " + (fixed_ok ? "ok" : "off")};
}

Outcome protocol_counts() {
  DatasetManifest pop;
  for (int g = 0; g < 8; ++g) {
    for (std::uint8_t label = 0; label < 2; ++label) {
      for (int i = 0; i < 8000; ++i) {
        pop.entries.push_back({"p/" + std::to_string(g) + "/" + std::to_string(label) + "/" + std::to_string(i),
                               label, "g" + std::to_string(g), Split::Train});
      }
    }
  }
  Rng rng(707);
  const auto sub = stratified_subsample(pop, 100000, rng);
  std::map<std::pair<std::string, int>, int> counts;
  for (const auto& e : sub.entries) ++counts[{e.generator, e.label}];
  bool per_ok = counts.size() == 16;
  for (const auto& [k, n] : counts) per_ok = per_ok && n == 6250;

  DatasetManifest held;
  for (int g = 0; g < 8; ++g) {
    for (std::uint8_t label = 0; label < 2; ++label) {
      for (int i = 0; i < 2000; ++i) {
        held.entries.push_back({"h/" + std::to_string(g) + "/" + std::to_string(label) + "/" + std::to_string(i),
                                label, "g" + std::to_string(g), Split::Test});
      }
    }
  }
  const auto [val, test] = split_val_test(held, rng);
  const bool split_ok = val.entries.size() == 16000 && test.entries.size() == 16000;
  return {per_ok && split_ok && sub.entries.size() == 100000,
          fmt("subsample %g, ", static_cast<double>(sub.entries.size())) +
              (per_ok ? "6250 per stratum, " : "uneven strata, ") +
              fmt("split %g/%g", static_cast<double>(val.entries.size()), static_cast<double>(test.entries.size()))};
}

// Full default runs through the CLI; both are shared by the remaining criteria.
struct FullRuns {
  fs::path dir;
  int status_a = -1, status_b = -1;
  double seconds_a = 0;
};

FullRuns full_runs() {
  FullRuns r;
  r.dir = fs::temp_directory_path() / ("laid_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(r.dir);
  fs::create_directories(r.dir);
  auto run = [&](const char* name, double* secs) {
    const auto t0 = Clock::now();
    const std::string cmd = std::string(LAID_BENCH_EXE) + " --seed 42 --out " + (r.dir / name).string() +
                            " run > " + (r.dir / (std::string(name) + ".stdout")).string() + " 2>&1";
    const int st = std::system(cmd.c_str());
    if (secs) *secs = seconds_since(t0);
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  };
  r.status_a = run("a", &r.seconds_a);
  r.status_b = run("b", nullptr);
  return r;
}

// Best validation accuracy from a training log's footer.
double best_val(const fs::path& tsv) {
  const std::string text = slurp(tsv);
  const auto pos = text.find("best_val_accuracy=");
  if (pos == std::string::npos) throw std::runtime_error("no footer in " + tsv.string());
  return std::stod(text.substr(pos + 18));
}

Outcome end_to_end(const FullRuns& r) {
  if (r.status_a != 0) return {false, fmt("run exited with %g", r.status_a)};
  const double spatial = best_val(r.dir / "a" / "train_spatial.tsv");
  const double spectral = best_val(r.dir / "a" / "train_spectral.tsv");
  return {spectral >= kSpectralMinAcc && spatial >= kSpatialMinAcc && r.seconds_a < kRunSeconds,
          fmt("spectral %.2f%%, spatial %.2f%%, %.0f s", spectral, spatial, r.seconds_a)};
}

Outcome fusion_dominance(const FullRuns& r) {
  if (r.status_a != 0) return {false, "run failed"};
  const auto j = nlohmann::json::parse(slurp(r.dir / "a" / "metrics.json"));
  std::map<std::string, std::map<std::string, double>> by_label;
  for (const auto& e : j) by_label[e["label"]][e["setting"]] = e["accuracy"].get<double>();
  int checked = 0;
  bool ok = true;
  for (AttackKind k : {AttackKind::Crop, AttackKind::Blur, AttackKind::Noise, AttackKind::Jpeg,
                       AttackKind::Combined}) {
    const auto it = by_label.find(std::string(to_string(k)));
    if (it == by_label.end()) return {false, "missing attack " + std::string(to_string(k))};
    const auto& m = it->second;
    ok = ok && m.at("adv-fusion") >= std::max(m.at("adv-spatial"), m.at("adv-spectral"));
    ++checked;
  }
  return {ok && checked == 5, fmt("%g attack kinds checked", checked)};
}

Outcome determinism(const FullRuns& r) {
  if (r.status_a != 0 || r.status_b != 0) return {false, "run failed"};
  std::vector<std::string> files = {"metrics.txt", "metrics.json"};
  for (AttackKind k : {AttackKind::Crop, AttackKind::Blur, AttackKind::Noise, AttackKind::Jpeg,
                       AttackKind::Combined}) {
    files.push_back("attacks_" + std::string(to_string(k)) + ".log");
  }
  for (const auto& f : files) {
    if (slurp(r.dir / "a" / f) != slurp(r.dir / "b" / f)) return {false, f + " differs"};
  }
  return {true, fmt("%g files byte-identical", static_cast<double>(files.size()))};
}

}  // namespace

int main() {
  report("fft_oracle", fft_oracle);
  report("gradient_suite", gradient_suite);
  report("auc_oracle", auc_oracle);
  report("efficiency_score", efficiency_score_checks);
  report("trend_panels", trend_panels);
  report("attack_statistics", attack_statistics);
  report("protocol_counts", protocol_counts);
  const FullRuns runs = full_runs();
  report("end_to_end_training", [&] { return end_to_end(runs); });
  report("fusion_dominance", [&] { return fusion_dominance(runs); });
  report("determinism", [&] { return determinism(runs); });
  fs::remove_all(runs.dir);
  return failures == 0 ? 0 : 1;
}
