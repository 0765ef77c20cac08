#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "laid/profiler.hpp"

namespace laid {

enum class Domain { Spatial, Spectral };

// One test sample seen by both detectors. Label 1 is the synthetic class.
struct PredictionRecord {
  double score_p = 0.0;  // spatial positive-class probability
  double score_f = 0.0;  // spectral positive-class probability
  std::uint8_t y_p = 0;
  std::uint8_t y_f = 0;
  std::uint8_t g = 0;

  // Builds a record with decisions thresholded at 0.5.
  static PredictionRecord from_scores(double score_p, double score_f, std::uint8_t g);

  bool operator==(const PredictionRecord&) const = default;
};

inline constexpr double kDecisionThreshold = 0.5;

double accuracy(std::span<const PredictionRecord> records, Domain domain);
double f1_score(std::span<const PredictionRecord> records, Domain domain);
// Mann-Whitney statistic, ties count one half. Throws an undefined-metric
// error unless both classes are present.
double auc_roc(std::span<const PredictionRecord> records, Domain domain);

struct EfficiencyRatios {
  double acc_per_mparams = 0.0;
  double acc_per_mflops = 0.0;
};

EfficiencyRatios efficiency_ratios(double accuracy_pct, double params, double flops);
EfficiencyRatios efficiency_ratios(double accuracy_pct, const CostReport& cost);

bool fusion_success(const PredictionRecord& r);
double fusion_accuracy(std::span<const PredictionRecord> records);

// Clean fusion is only produced when explicitly requested.
enum class Setting { CleanSpatial, CleanSpectral, CleanFusion, AdvSpatial, AdvSpectral, AdvFusion };

std::string_view to_string(Setting s);
bool is_fusion(Setting s);
Domain domain_of(Setting s);

struct EvalReport {
  Setting setting = Setting::CleanSpatial;
  std::string label;  // e.g. attack name; free-form
  double accuracy = 0.0;
  std::optional<double> f1;
  std::optional<double> auc_roc;
  std::optional<double> acc_per_mparams;
  std::optional<double> acc_per_mflops;
  std::size_t n = 0;

  // Throw an unsupported-metric error for fusion settings.
  double f1_value() const;
  double auc_value() const;
};

// Accuracy per setting (fusion uses the OR rule); F1 and AUC only for single
// domains. AUC is left empty when the records hold a single class.
EvalReport evaluate_protocol(std::span<const PredictionRecord> records, Setting setting,
                             const CostReport* cost = nullptr);

std::string format_reports_text(const std::vector<EvalReport>& reports);
std::string format_reports_json(const std::vector<EvalReport>& reports);

}  // namespace laid
