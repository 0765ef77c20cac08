#include "laid/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "laid/error.hpp"

namespace laid {

PredictionRecord PredictionRecord::from_scores(double score_p, double score_f, std::uint8_t g) {
  if (g > 1) throw Error(ErrorKind::Parameter, "ground truth must be 0 or 1");
  return {score_p, score_f, static_cast<std::uint8_t>(score_p >= kDecisionThreshold),
          static_cast<std::uint8_t>(score_f >= kDecisionThreshold), g};
}

namespace {

std::uint8_t decision(const PredictionRecord& r, Domain d) {
  return d == Domain::Spatial ? r.y_p : r.y_f;
}
double score(const PredictionRecord& r, Domain d) {
  return d == Domain::Spatial ? r.score_p : r.score_f;
}

}  // namespace

double accuracy(std::span<const PredictionRecord> records, Domain domain) {
  if (records.empty()) throw Error(ErrorKind::Parameter, "accuracy over no records");
  const auto hits = std::count_if(records.begin(), records.end(),
                                  [&](const auto& r) { return decision(r, domain) == r.g; });
  return 100.0 * static_cast<double>(hits) / static_cast<double>(records.size());
}

double f1_score(std::span<const PredictionRecord> records, Domain domain) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& r : records) {
    const bool pred = decision(r, domain) == 1;
    if (pred && r.g == 1) ++tp;
    if (pred && r.g == 0) ++fp;
    if (!pred && r.g == 1) ++fn;
  }
  const double p = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  const double rc = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  return p + rc > 0 ? 2 * p * rc / (p + rc) : 0.0;
}

double auc_roc(std::span<const PredictionRecord> records, Domain domain) {
  std::vector<std::pair<double, std::uint8_t>> v;
  v.reserve(records.size());
  std::size_t pos = 0;
  for (const auto& r : records) {
    v.emplace_back(score(r, domain), r.g);
    pos += r.g;
  }
  const std::size_t neg = v.size() - pos;
  if (pos == 0 || neg == 0) {
    throw Error(ErrorKind::UndefinedMetric, "AUC-ROC needs both positive and negative records");
  }
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  // Sum of (1-based, tie-averaged) ranks of the positives.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    std::size_t pos_in_group = 0;
    while (j < v.size() && v[j].first == v[i].first) pos_in_group += v[j++].second;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    rank_sum += avg_rank * static_cast<double>(pos_in_group);
    i = j;
  }
  const double p = static_cast<double>(pos), n = static_cast<double>(neg);
  return (rank_sum - p * (p + 1) / 2.0) / (p * n);
}

EfficiencyRatios efficiency_ratios(double accuracy_pct, double params, double flops) {
  if (!(params > 0) || !(flops > 0)) {
    throw Error(ErrorKind::Parameter, "efficiency ratios need positive params and flops");
  }
  return {accuracy_pct / (params / 1e6), accuracy_pct / (flops / 1e6)};
}

EfficiencyRatios efficiency_ratios(double accuracy_pct, const CostReport& cost) {
  return efficiency_ratios(accuracy_pct, static_cast<double>(cost.params),
                           static_cast<double>(cost.flops));
}

bool fusion_success(const PredictionRecord& r) { return r.y_p == r.g || r.y_f == r.g; }

double fusion_accuracy(std::span<const PredictionRecord> records) {
  if (records.empty()) throw Error(ErrorKind::Parameter, "accuracy over no records");
  const auto hits = std::count_if(records.begin(), records.end(), fusion_success);
  return 100.0 * static_cast<double>(hits) / static_cast<double>(records.size());
}

std::string_view to_string(Setting s) {
  switch (s) {
    case Setting::CleanSpatial: return "clean-spatial";
    case Setting::CleanSpectral: return "clean-spectral";
    case Setting::CleanFusion: return "clean-fusion";
    case Setting::AdvSpatial: return "adv-spatial";
    case Setting::AdvSpectral: return "adv-spectral";
    case Setting::AdvFusion: return "adv-fusion";
  }
  return "?";
}

bool is_fusion(Setting s) { return s == Setting::CleanFusion || s == Setting::AdvFusion; }

Domain domain_of(Setting s) {
  return s == Setting::CleanSpectral || s == Setting::AdvSpectral ? Domain::Spectral
                                                                  : Domain::Spatial;
}

double EvalReport::f1_value() const {
  if (is_fusion(setting)) {
    throw Error(ErrorKind::UnsupportedMetric, "F1 is undefined for decision-level fusion");
  }
  if (!f1) throw Error(ErrorKind::UndefinedMetric, "F1 not computed");
  return *f1;
}

double EvalReport::auc_value() const {
  if (is_fusion(setting)) {
    throw Error(ErrorKind::UnsupportedMetric, "AUC-ROC is undefined for decision-level fusion");
  }
  if (!auc_roc) throw Error(ErrorKind::UndefinedMetric, "AUC-ROC not computed");
  return *auc_roc;
}

EvalReport evaluate_protocol(std::span<const PredictionRecord> records, Setting setting,
                             const CostReport* cost) {
  EvalReport r;
  r.setting = setting;
  r.n = records.size();
  if (is_fusion(setting)) {
    r.accuracy = fusion_accuracy(records);
    return r;
  }
  const Domain d = domain_of(setting);
  r.accuracy = accuracy(records, d);
  r.f1 = f1_score(records, d);
  try {
    r.auc_roc = auc_roc(records, d);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::UndefinedMetric) throw;
  }
  if (cost) {
    const auto eff = efficiency_ratios(r.accuracy, *cost);
    r.acc_per_mparams = eff.acc_per_mparams;
    r.acc_per_mflops = eff.acc_per_mflops;
  }
  return r;
}

namespace {

std::string opt(const std::optional<double>& v, const char* fmt) {
  if (!v) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, *v);
  return buf;
}

}  // namespace

std::string format_reports_text(const std::vector<EvalReport>& reports) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %-10s %8s %9s %8s %8s %14s %13s\n", "setting", "label",
                "n", "accuracy", "f1", "auc", "acc/MParams", "acc/MFLOPs");
  out += line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-16s %-10s %8zu %9.2f %8s %8s %14s %13s\n",
                  std::string(to_string(r.setting)).c_str(), r.label.c_str(), r.n, r.accuracy,
                  opt(r.f1, "%.4f").c_str(), opt(r.auc_roc, "%.4f").c_str(),
                  opt(r.acc_per_mparams, "%.2f").c_str(), opt(r.acc_per_mflops, "%.4f").c_str());
    out += line;
  }
  return out;
}

std::string format_reports_json(const std::vector<EvalReport>& reports) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    j["setting"] = std::string(to_string(r.setting));
    j["label"] = r.label;
    j["n"] = r.n;
    j["accuracy"] = r.accuracy;
    auto put = [&](const char* key, const std::optional<double>& v) {
      if (v) {
        j[key] = *v;
      } else {
        j[key] = nullptr;
      }
    };
    put("f1", r.f1);
    put("auc_roc", r.auc_roc);
    put("acc_per_mparams", r.acc_per_mparams);
    put("acc_per_mflops", r.acc_per_mflops);
    arr.push_back(j);
  }
  return arr.dump(2) + "\n";
}

}  // namespace laid
