#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace laid {

struct CandidateModel {
  std::string name;
  std::string family;
  double top1_acc = 0.0;  // percent
  double params = 0.0;    // count
  double flops = 0.0;     // per sample

  void validate() const;
};

struct EfficiencyWeights {
  double lambda1 = 0.5;   // accuracy
  double lambda2 = 0.25;  // inverse FLOPs
  double lambda3 = 0.25;  // inverse parameters

  void validate() const;
};

inline constexpr double kMaxParams = 1e7;
inline constexpr double kMaxFlops = 1e9;

// Keeps models under either the parameter or the FLOP limit.
std::vector<CandidateModel> constraint_filter(const std::vector<CandidateModel>& pool);

// lambda1*acc/max(acc) + lambda2*min(flops)/flops + lambda3*min(params)/params,
// with the extrema taken over `pool`.
double efficiency_score(const CandidateModel& m, const std::vector<CandidateModel>& pool,
                        const EfficiencyWeights& w);

struct RankedModel {
  CandidateModel model;
  double score = 0.0;
  std::size_t rank = 0;           // 1-based, after family dedupe
  std::size_t original_rank = 0;  // 1-based, among all variants
};

// Sort by score (ties: lower FLOPs, lower params, name), keep the best entry per
// family, truncate to top_k.
std::vector<RankedModel> rank_and_dedupe(const std::vector<CandidateModel>& pool,
                                         const EfficiencyWeights& w, std::size_t top_k);

// Headered comma- or tab-separated text with columns name, family, top1_acc,
// params, flops (any order).
std::vector<CandidateModel> parse_candidate_pool(std::string_view text);
std::string format_ranking(const std::vector<RankedModel>& ranked);

}  // namespace laid
