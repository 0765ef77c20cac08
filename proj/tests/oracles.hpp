#pragma once

// Straight-line reference implementations used as test oracles. They share no
// code with the library.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

namespace oracle {

inline std::vector<std::complex<double>> naive_dft2(const std::vector<double>& x, std::size_t h,
                                                    std::size_t w) {
  std::vector<std::complex<double>> f(h * w);
  for (std::size_t u = 0; u < h; ++u) {
    for (std::size_t v = 0; v < w; ++v) {
      std::complex<double> acc = 0;
      for (std::size_t m = 0; m < h; ++m) {
        for (std::size_t n = 0; n < w; ++n) {
          const double ang = -2.0 * std::numbers::pi *
                             (static_cast<double>(u * m % h) / static_cast<double>(h) +
                              static_cast<double>(v * n % w) / static_cast<double>(w));
          acc += x[m * w + n] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
      }
      f[u * w + v] = acc;
    }
  }
  return f;
}

// Half-pixel-centre bilinear sample of a single-channel plane, clamped edges.
inline double bilinear_at(const std::vector<double>& p, std::size_t h, std::size_t w,
                          std::size_t oy, std::size_t ox, std::size_t out_h, std::size_t out_w) {
  const double sy = (static_cast<double>(oy) + 0.5) * static_cast<double>(h) / static_cast<double>(out_h) - 0.5;
  const double sx = (static_cast<double>(ox) + 0.5) * static_cast<double>(w) / static_cast<double>(out_w) - 0.5;
  const double cy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
  const double cx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
  const auto y0 = static_cast<std::size_t>(std::floor(cy));
  const auto x0 = static_cast<std::size_t>(std::floor(cx));
  const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double fy = cy - static_cast<double>(y0), fx = cx - static_cast<double>(x0);
  const double top = p[y0 * w + x0] * (1 - fx) + p[y0 * w + x1] * fx;
  const double bot = p[y1 * w + x0] * (1 - fx) + p[y1 * w + x1] * fx;
  return top * (1 - fy) + bot * fy;
}

// Pairwise Mann-Whitney statistic.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0;
  double pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1;
      if (scores[i] > scores[j]) wins += 1;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

// Spectral image oracle: naive DFT, index shift, log1p, joint min-max to [0,255].
inline std::vector<double> spectral_oracle(const std::vector<std::vector<double>>& planes,
                                           std::size_t h, std::size_t w) {
  const std::size_t c = planes.size();
  std::vector<double> out(h * w * c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const auto f = naive_dft2(planes[ch], h, w);
    for (std::size_t u = 0; u < h; ++u) {
      for (std::size_t v = 0; v < w; ++v) {
        const std::size_t su = (u + h / 2) % h, sv = (v + w / 2) % w;
        out[(su * w + sv) * c + ch] = std::log1p(std::abs(f[u * w + v]));
      }
    }
  }
  const auto [mn, mx] = std::minmax_element(out.begin(), out.end());
  const double lo = *mn, hi = *mx;
  for (double& v : out) v = hi > lo ? (v - lo) / (hi - lo) * 255.0 : 127.5;
  return out;
}

}  // namespace oracle
