#pragma once

#include <functional>
#include <string>
#include <vector>

#include "laid/config.hpp"
#include "laid/error.hpp"
#include "laid/data.hpp"
#include "laid/metrics.hpp"
#include "laid/nn.hpp"

namespace laid {

// Error raised by run_pipeline; carries the failing stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.kind(), "stage '" + stage + "': " + cause.what()), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct RunResult {
  std::vector<EvalReport> reports;
  nn::TrainLog spatial_log;
  nn::TrainLog spectral_log;
  CostReport cost;
};

using ProgressFn = std::function<void(const std::string&)>;

// Builds records for one test set: spatial model on `spatial`, spectral model
// on `spectral` (same sample order).
std::vector<PredictionRecord> predict_records(const nn::NetworkGraph& spatial_model,
                                              const nn::NetworkGraph& spectral_model,
                                              const TensorCache& spatial,
                                              const TensorCache& spectral);

// Attacks every tensor of `clean` with per-sample specs drawn from
// Rng(seed).child(index). Returns the attacked cache and the spec list.
std::pair<TensorCache, std::vector<AttackSpec>> attack_cache(const TensorCache& clean,
                                                             AttackKind kind, std::uint64_t seed);

std::string format_attack_log(const std::vector<AttackSpec>& specs);

// Seed used for the attack stream of `kind` within a run.
std::uint64_t attack_seed(std::uint64_t run_seed, AttackKind kind);

// preprocess -> spectral -> train both detectors -> clean and adversarial
// evaluation -> reports, all under config.out_dir.
RunResult run_pipeline(const RunConfig& config, const ProgressFn& progress = {});

}  // namespace laid
