#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "laid/image.hpp"
#include "laid/rng.hpp"

namespace laid {

enum class AttackKind { Crop = 0, Blur = 1, Noise = 2, Jpeg = 3, Combined = 4 };

std::string_view to_string(AttackKind kind);
std::optional<AttackKind> parse_attack_kind(std::string_view name);

namespace attack_ranges {
inline constexpr double kCropMin = 0.05;
inline constexpr double kCropMax = 0.20;
inline constexpr std::array<int, 4> kBlurKernels = {3, 5, 7, 9};
inline constexpr std::array<double, 4> kBlurSigmas = {1.0, 2.0, 3.0, 4.0};
inline constexpr double kNoiseVarMin = 5.0;
inline constexpr double kNoiseVarMax = 20.0;
inline constexpr int kJpegQualityMin = 25;
inline constexpr int kJpegQualityMax = 90;
}  // namespace attack_ranges

// Fully determines one perturbation. For Combined, `include` holds the
// crop/blur/noise/jpeg inclusion flags and every parameter field is populated.
struct AttackSpec {
  AttackKind kind = AttackKind::Crop;
  double crop_fraction = 0.05;
  int blur_kernel = 3;
  double blur_sigma = 1.0;
  double noise_variance = 5.0;
  int jpeg_quality = 90;
  std::array<bool, 4> include{};
  std::uint64_t seed = 0;

  // Throws a parameter error if any read field is outside its range.
  void validate() const;
  bool operator==(const AttackSpec&) const = default;
};

AttackSpec sample_attack(AttackKind kind, Rng& rng);

// Output keeps the input dimensions (256x256 in the standard pipeline).
ImageTensor attack_crop(const ImageTensor& img, const AttackSpec& spec);
ImageTensor attack_blur(const ImageTensor& img, const AttackSpec& spec);
ImageTensor attack_noise(const ImageTensor& img, const AttackSpec& spec);
ImageTensor attack_jpeg(const ImageTensor& img, const AttackSpec& spec);
ImageTensor attack_combined(const ImageTensor& img, const AttackSpec& spec);

// Dispatches on spec.kind.
ImageTensor apply_attack(const ImageTensor& img, const AttackSpec& spec);

// Normalized k x k Gaussian, row-major.
std::vector<double> gaussian_kernel_2d(int kernel, double sigma);

struct QuantTables {
  std::array<int, 64> luma{};
  std::array<int, 64> chroma{};
  int quality = 50;
};

// ITU T.81 Annex K base tables, row-major.
extern const std::array<int, 64> kBaseLumaTable;
extern const std::array<int, 64> kBaseChromaTable;

QuantTables jpeg_tables(int quality);

// Sidecar log: one tab-separated record per line.
std::string format_attack_record(std::size_t index, const AttackSpec& spec);
std::pair<std::size_t, AttackSpec> parse_attack_record(std::string_view line);
std::string attack_log_header();

}  // namespace laid
