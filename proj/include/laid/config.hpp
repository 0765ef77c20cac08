#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "laid/attacks.hpp"
#include "laid/selection.hpp"

namespace laid {

// Run-level settings. Dataset sources, in priority order: explicit spatial
// caches, an image tree, or the built-in synthetic generator.
struct RunConfig {
  std::uint64_t seed = 42;
  std::string out_dir = "run";

  std::string train_cache;
  std::string val_cache;
  std::string test_cache;
  std::string image_root;
  std::size_t subsample_total = 0;  // 0 keeps every training image

  std::size_t image_size = 64;
  std::size_t synth_train_per_class = 2000;
  std::size_t synth_val_per_class = 500;
  std::size_t synth_test_per_class = 500;

  std::vector<AttackKind> attacks = {AttackKind::Crop, AttackKind::Blur, AttackKind::Noise,
                                     AttackKind::Jpeg, AttackKind::Combined};
  int epochs = 100;
  std::size_t batch = 32;
  double lr = 1e-4;
  EfficiencyWeights lambda;
  std::string candidates;  // optional pool file for the selection stage
  std::size_t top_k = 10;
  bool fusion_clean = false;
  bool keep_caches = false;

  // Throws a config error on bad values or missing paths.
  void validate() const;
  // Canonical key=value rendering (round-trips through apply_config_text).
  std::string to_text() const;
};

// Applies "key = value" lines ('#'/';' comments, [sections] ignored).
void apply_config_text(RunConfig& config, std::string_view text);
void apply_config_value(RunConfig& config, const std::string& key, const std::string& value);
RunConfig load_config(const std::string& path);

std::vector<AttackKind> parse_attack_list(std::string_view text);
EfficiencyWeights parse_lambda(std::string_view text);

}  // namespace laid
