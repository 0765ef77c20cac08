#include "laid/attacks.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "laid/error.hpp"

namespace laid {

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::Crop: return "crop";
    case AttackKind::Blur: return "blur";
    case AttackKind::Noise: return "noise";
    case AttackKind::Jpeg: return "jpeg";
    case AttackKind::Combined: return "combined";
  }
  return "?";
}

std::optional<AttackKind> parse_attack_kind(std::string_view name) {
  for (auto k : {AttackKind::Crop, AttackKind::Blur, AttackKind::Noise, AttackKind::Jpeg,
                 AttackKind::Combined}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

void AttackSpec::validate() const {
  using namespace attack_ranges;
  auto fail = [](const std::string& what) { throw Error(ErrorKind::Parameter, what); };
  const bool combined = kind == AttackKind::Combined;
  if (kind == AttackKind::Crop || combined) {
    if (!(crop_fraction >= kCropMin && crop_fraction <= kCropMax)) {
      fail("crop fraction " + std::to_string(crop_fraction) + " outside [0.05, 0.20]");
    }
  }
  if (kind == AttackKind::Blur || combined) {
    if (std::find(kBlurKernels.begin(), kBlurKernels.end(), blur_kernel) == kBlurKernels.end()) {
      fail("blur kernel " + std::to_string(blur_kernel) + " not in {3,5,7,9}");
    }
    if (std::find(kBlurSigmas.begin(), kBlurSigmas.end(), blur_sigma) == kBlurSigmas.end()) {
      fail("blur sigma " + std::to_string(blur_sigma) + " not in {1,2,3,4}");
    }
  }
  if (kind == AttackKind::Noise || combined) {
    if (!(noise_variance >= kNoiseVarMin && noise_variance <= kNoiseVarMax)) {
      fail("noise variance " + std::to_string(noise_variance) + " outside [5, 20]");
    }
  }
  if (kind == AttackKind::Jpeg || combined) {
    if (jpeg_quality < kJpegQualityMin || jpeg_quality > kJpegQualityMax) {
      fail("jpeg quality " + std::to_string(jpeg_quality) + " outside [25, 90]");
    }
  }
}

namespace {

void sample_crop(AttackSpec& s, Rng& rng) {
  s.crop_fraction = rng.uniform(attack_ranges::kCropMin, attack_ranges::kCropMax);
}
void sample_blur(AttackSpec& s, Rng& rng) {
  s.blur_kernel = attack_ranges::kBlurKernels[rng.below(4)];
  s.blur_sigma = attack_ranges::kBlurSigmas[rng.below(4)];
}
void sample_noise(AttackSpec& s, Rng& rng) {
  s.noise_variance = rng.uniform(attack_ranges::kNoiseVarMin, attack_ranges::kNoiseVarMax);
}
void sample_jpeg(AttackSpec& s, Rng& rng) {
  s.jpeg_quality = static_cast<int>(
      rng.uniform_int(attack_ranges::kJpegQualityMin, attack_ranges::kJpegQualityMax));
}

// Stream indices under a combined spec's seed.
constexpr std::uint64_t kParamStream = 0;
constexpr std::uint64_t kStageSeedBase = 16;

}  // namespace

AttackSpec sample_attack(AttackKind kind, Rng& rng) {
  AttackSpec s;
  s.kind = kind;
  s.seed = rng.next_u64();
  switch (kind) {
    case AttackKind::Crop: sample_crop(s, rng); break;
    case AttackKind::Blur: sample_blur(s, rng); break;
    case AttackKind::Noise: sample_noise(s, rng); break;
    case AttackKind::Jpeg: sample_jpeg(s, rng); break;
    case AttackKind::Combined: {
      Rng base = Rng(s.seed).child(kParamStream);
      for (bool& flag : s.include) flag = base.bernoulli(0.5);
      Rng c0 = base.child(0), c1 = base.child(1), c2 = base.child(2), c3 = base.child(3);
      sample_crop(s, c0);
      sample_blur(s, c1);
      sample_noise(s, c2);
      sample_jpeg(s, c3);
      break;
    }
  }
  return s;
}

ImageTensor attack_crop(const ImageTensor& img, const AttackSpec& spec) {
  if (img.height() < 8 || img.width() < 8) {
    throw Error(ErrorKind::Dimension, "crop needs at least an 8x8 image");
  }
  const double keep = std::sqrt(1.0 - spec.crop_fraction);
  const auto ch = static_cast<std::size_t>(std::lround(static_cast<double>(img.height()) * keep));
  const auto cw = static_cast<std::size_t>(std::lround(static_cast<double>(img.width()) * keep));
  if (ch < 1 || cw < 1 || ch > img.height() || cw > img.width()) {
    throw Error(ErrorKind::Parameter, "crop rectangle out of bounds");
  }
  Rng rng(spec.seed);
  const auto y0 = static_cast<std::size_t>(rng.below(img.height() - ch + 1));
  const auto x0 = static_cast<std::size_t>(rng.below(img.width() - cw + 1));

  ImageTensor sub(ch, cw, img.channels(), img.range());
  for (std::size_t y = 0; y < ch; ++y) {
    for (std::size_t x = 0; x < cw; ++x) {
      for (std::size_t c = 0; c < img.channels(); ++c) sub.at(y, x, c) = img.at(y0 + y, x0 + x, c);
    }
  }
  return resize_bilinear(sub, img.height(), img.width());
}

std::vector<double> gaussian_kernel_2d(int kernel, double sigma) {
  const int r = kernel / 2;
  std::vector<double> k(static_cast<std::size_t>(kernel * kernel));
  double sum = 0.0;
  for (int y = -r; y <= r; ++y) {
    for (int x = -r; x <= r; ++x) {
      const double v = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
      k[static_cast<std::size_t>((y + r) * kernel + (x + r))] = v;
      sum += v;
    }
  }
  for (double& v : k) v /= sum;
  return k;
}

namespace {

// Half-sample symmetric reflection: ... c b a | a b c ... c b a | ...
std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  const auto period = static_cast<std::ptrdiff_t>(2 * n);
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<std::ptrdiff_t>(n)) m = period - 1 - m;
  return static_cast<std::size_t>(m);
}

}  // namespace

ImageTensor attack_blur(const ImageTensor& img, const AttackSpec& spec) {
  const int k = spec.blur_kernel;
  if (k < 1 || k % 2 == 0) throw Error(ErrorKind::Parameter, "blur kernel must be odd");
  const int r = k / 2;
  // The normalized 2D Gaussian is the outer product of the normalized 1D one.
  std::vector<double> w(static_cast<std::size_t>(k));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    w[static_cast<std::size_t>(i + r)] = std::exp(-(i * i) / (2.0 * spec.blur_sigma * spec.blur_sigma));
    sum += w[static_cast<std::size_t>(i + r)];
  }
  for (double& v : w) v /= sum;

  const std::size_t h = img.height(), wd = img.width(), ch = img.channels();
  std::vector<double> tmp(h * wd * ch);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < wd; ++x) {
      for (std::size_t c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) {
          acc += w[static_cast<std::size_t>(i + r)] *
                 img.at(y, reflect(static_cast<std::ptrdiff_t>(x) + i, wd), c);
        }
        tmp[(y * wd + x) * ch + c] = acc;
      }
    }
  }
  ImageTensor out(h, wd, ch, img.range());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < wd; ++x) {
      for (std::size_t c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) {
          acc += w[static_cast<std::size_t>(i + r)] *
                 tmp[(reflect(static_cast<std::ptrdiff_t>(y) + i, h) * wd + x) * ch + c];
        }
        out.at(y, x, c) = static_cast<float>(acc);
      }
    }
  }
  clamp_to_byte_range(out);
  return out;
}

ImageTensor attack_noise(const ImageTensor& img, const AttackSpec& spec) {
  if (!(spec.noise_variance >= 0.0)) throw Error(ErrorKind::Parameter, "negative noise variance");
  const double sd = std::sqrt(spec.noise_variance);
  Rng rng(spec.seed);
  ImageTensor out = img;
  for (float& v : out.data()) {
    v = static_cast<float>(std::clamp(v + sd * rng.normal(), 0.0, 255.0));
  }
  return out;
}

const std::array<int, 64> kBaseLumaTable = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

const std::array<int, 64> kBaseChromaTable = {
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

QuantTables jpeg_tables(int quality) {
  if (quality < 1 || quality > 100) {
    throw Error(ErrorKind::Parameter, "jpeg quality " + std::to_string(quality) + " outside [1,100]");
  }
  const int s = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  QuantTables t;
  t.quality = quality;
  for (std::size_t i = 0; i < 64; ++i) {
    t.luma[i] = std::clamp((kBaseLumaTable[i] * s + 50) / 100, 1, 255);
    t.chroma[i] = std::clamp((kBaseChromaTable[i] * s + 50) / 100, 1, 255);
  }
  return t;
}

namespace {

struct DctBasis {
  // basis[u][x] = c(u)/2 * cos((2x+1) u pi / 16); orthonormal 8-point DCT-II.
  double basis[8][8];
  DctBasis() {
    for (int u = 0; u < 8; ++u) {
      const double cu = u == 0 ? std::sqrt(0.5) : 1.0;
      for (int x = 0; x < 8; ++x) {
        basis[u][x] = 0.5 * cu * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
      }
    }
  }
};

const DctBasis& dct_basis() {
  static const DctBasis b;
  return b;
}

// Quantization round trip of one 8x8 block (already level-shifted).
void quantize_block(double block[8][8], const std::array<int, 64>& table) {
  const auto& B = dct_basis().basis;
  double tmp[8][8];
  double coef[8][8];
  for (int y = 0; y < 8; ++y) {
    for (int u = 0; u < 8; ++u) {
      double acc = 0.0;
      for (int x = 0; x < 8; ++x) acc += B[u][x] * block[y][x];
      tmp[y][u] = acc;
    }
  }
  for (int v = 0; v < 8; ++v) {
    for (int u = 0; u < 8; ++u) {
      double acc = 0.0;
      for (int y = 0; y < 8; ++y) acc += B[v][y] * tmp[y][u];
      const double q = table[static_cast<std::size_t>(v * 8 + u)];
      coef[v][u] = std::round(acc / q) * q;
    }
  }
  for (int v = 0; v < 8; ++v) {
    for (int x = 0; x < 8; ++x) {
      double acc = 0.0;
      for (int u = 0; u < 8; ++u) acc += B[u][x] * coef[v][u];
      tmp[v][x] = acc;
    }
  }
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      double acc = 0.0;
      for (int v = 0; v < 8; ++v) acc += B[v][y] * tmp[v][x];
      block[y][x] = acc;
    }
  }
}

void quantize_plane(std::vector<double>& plane, std::size_t ph, std::size_t pw,
                    const std::array<int, 64>& table) {
  double block[8][8];
  for (std::size_t by = 0; by < ph; by += 8) {
    for (std::size_t bx = 0; bx < pw; bx += 8) {
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) block[y][x] = plane[(by + y) * pw + bx + x] - 128.0;
      }
      quantize_block(block, table);
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) plane[(by + y) * pw + bx + x] = block[y][x] + 128.0;
      }
    }
  }
}

}  // namespace

ImageTensor attack_jpeg(const ImageTensor& img, const AttackSpec& spec) {
  if (img.channels() != 3 && img.channels() != 1) {
    throw Error(ErrorKind::Dimension, "jpeg round trip needs 1 or 3 channels");
  }
  const QuantTables tables = jpeg_tables(spec.jpeg_quality);
  const std::size_t h = img.height(), w = img.width();
  const std::size_t ph = (h + 7) / 8 * 8, pw = (w + 7) / 8 * 8;
  const std::size_t nplanes = img.channels();

  // Edge-replicated padding to whole blocks.
  std::vector<std::vector<double>> planes(nplanes, std::vector<double>(ph * pw));
  for (std::size_t y = 0; y < ph; ++y) {
    const std::size_t sy = std::min(y, h - 1);
    for (std::size_t x = 0; x < pw; ++x) {
      const std::size_t sx = std::min(x, w - 1);
      if (nplanes == 1) {
        planes[0][y * pw + x] = img.at(sy, sx, 0);
        continue;
      }
      const double r = img.at(sy, sx, 0), g = img.at(sy, sx, 1), b = img.at(sy, sx, 2);
      planes[0][y * pw + x] = 0.299 * r + 0.587 * g + 0.114 * b;
      planes[1][y * pw + x] = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
      planes[2][y * pw + x] = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
    }
  }
  quantize_plane(planes[0], ph, pw, tables.luma);
  for (std::size_t p = 1; p < nplanes; ++p) quantize_plane(planes[p], ph, pw, tables.chroma);

  ImageTensor out(h, w, nplanes, img.range());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t i = y * pw + x;
      if (nplanes == 1) {
        out.at(y, x, 0) = static_cast<float>(std::clamp(planes[0][i], 0.0, 255.0));
        continue;
      }
      const double Y = planes[0][i], cb = planes[1][i] - 128.0, cr = planes[2][i] - 128.0;
      const double rgb[3] = {Y + 1.402 * cr, Y - 0.344136 * cb - 0.714136 * cr, Y + 1.772 * cb};
      for (std::size_t c = 0; c < 3; ++c) {
        out.at(y, x, c) = static_cast<float>(std::clamp(rgb[c], 0.0, 255.0));
      }
    }
  }
  return out;
}

ImageTensor attack_combined(const ImageTensor& img, const AttackSpec& spec) {
  ImageTensor cur = img;
  const Rng stages(spec.seed);
  for (std::size_t i = 0; i < 4; ++i) {
    if (!spec.include[i]) continue;
    AttackSpec stage = spec;
    stage.kind = static_cast<AttackKind>(i);
    stage.seed = stages.child(kStageSeedBase + i).next_u64();
    cur = apply_attack(cur, stage);
  }
  return cur;
}

ImageTensor apply_attack(const ImageTensor& img, const AttackSpec& spec) {
  if (img.empty()) throw Error(ErrorKind::Dimension, "attack on empty image");
  spec.validate();
  switch (spec.kind) {
    case AttackKind::Crop: return attack_crop(img, spec);
    case AttackKind::Blur: return attack_blur(img, spec);
    case AttackKind::Noise: return attack_noise(img, spec);
    case AttackKind::Jpeg: return attack_jpeg(img, spec);
    case AttackKind::Combined: return attack_combined(img, spec);
  }
  throw Error(ErrorKind::Parameter, "unknown attack kind");
}

std::string attack_log_header() {
  return "#index\tkind\tcrop_fraction\tblur_kernel\tblur_sigma\tnoise_variance\tjpeg_quality\t"
         "include\tseed";
}

std::string format_attack_record(std::size_t index, const AttackSpec& s) {
  char buf[256];
  std::string flags;
  for (bool f : s.include) flags += f ? '1' : '0';
  std::snprintf(buf, sizeof buf, "%zu\t%s\t%.17g\t%d\t%.17g\t%.17g\t%d\t%s\t%llu", index,
                std::string(to_string(s.kind)).c_str(), s.crop_fraction, s.blur_kernel,
                s.blur_sigma, s.noise_variance, s.jpeg_quality, flags.c_str(),
                static_cast<unsigned long long>(s.seed));
  return buf;
}

std::pair<std::size_t, AttackSpec> parse_attack_record(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == '\t') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r' && c != '\n') {
      cur += c;
    }
  }
  fields.push_back(cur);
  if (fields.size() != 9) throw Error(ErrorKind::Data, "attack record needs 9 fields");
  try {
    AttackSpec s;
    const auto kind = parse_attack_kind(fields[1]);
    if (!kind) throw Error(ErrorKind::Data, "unknown attack kind '" + fields[1] + "'");
    s.kind = *kind;
    s.crop_fraction = std::stod(fields[2]);
    s.blur_kernel = std::stoi(fields[3]);
    s.blur_sigma = std::stod(fields[4]);
    s.noise_variance = std::stod(fields[5]);
    s.jpeg_quality = std::stoi(fields[6]);
    if (fields[7].size() != 4) throw Error(ErrorKind::Data, "include flags need 4 digits");
    for (std::size_t i = 0; i < 4; ++i) s.include[i] = fields[7][i] == '1';
    s.seed = std::stoull(fields[8]);
    return {static_cast<std::size_t>(std::stoull(fields[0])), s};
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::Data, "malformed attack record: " + std::string(line));
  }
}

}  // namespace laid
