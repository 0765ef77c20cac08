#include "laid/fft.hpp"

#include <bit>
#include <cmath>
#include <numbers>

#include "laid/error.hpp"

namespace laid {

namespace {

using cd = std::complex<double>;

void radix2(std::span<cd> a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    const std::size_t half = len / 2;
    std::vector<cd> tw(half);
    for (std::size_t k = 0; k < half; ++k) {
      tw[k] = std::polar(1.0, ang * static_cast<double>(k));
    }
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const cd u = a[i + k];
        const cd v = a[i + k + half] * tw[k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

// Chirp-z: X[k] = conj(w_k) * sum_m (x_m conj(w_m)) w_{k-m}, w_j = exp(i*pi*j^2/n).
void bluestein(std::span<cd> a, bool inverse) {
  const std::size_t n = a.size();
  const std::size_t m = std::bit_ceil(2 * n - 1);
  const double sign = inverse ? 1.0 : -1.0;

  std::vector<cd> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle argument small for large k.
    const auto k2 = static_cast<double>((k * k) % (2 * n));
    chirp[k] = std::polar(1.0, sign * std::numbers::pi * k2 / static_cast<double>(n));
  }
  std::vector<cd> x(m), y(m);
  for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * chirp[k];
  y[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) y[k] = y[m - k] = std::conj(chirp[k]);

  radix2(x, false);
  radix2(y, false);
  for (std::size_t k = 0; k < m; ++k) x[k] *= y[k];
  radix2(x, true);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * inv_m * chirp[k];
}

// Applies fft1d along both axes of a row-major complex buffer.
void transform2d(std::vector<cd>& buf, std::size_t h, std::size_t w, bool inverse) {
  for (std::size_t r = 0; r < h; ++r) fft1d(std::span<cd>(buf.data() + r * w, w), inverse);
  std::vector<cd> col(h);
  for (std::size_t c = 0; c < w; ++c) {
    for (std::size_t r = 0; r < h; ++r) col[r] = buf[r * w + c];
    fft1d(col, inverse);
    for (std::size_t r = 0; r < h; ++r) buf[r * w + c] = col[r];
  }
}

}  // namespace

void fft1d(std::span<cd> data, bool inverse) {
  if (data.size() <= 1) return;
  if (std::has_single_bit(data.size())) {
    radix2(data, inverse);
  } else {
    bluestein(data, inverse);
  }
}

ComplexPlane fft2d(std::span<const double> plane, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0 || plane.size() != height * width) {
    throw Error(ErrorKind::Dimension, "fft2d plane size mismatch");
  }
  std::vector<cd> buf(plane.begin(), plane.end());
  transform2d(buf, height, width, false);
  ComplexPlane out(height, width);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    out.re[i] = buf[i].real();
    out.im[i] = buf[i].imag();
  }
  return out;
}

ComplexPlane ifft2d(const ComplexPlane& spectrum) {
  const std::size_t h = spectrum.height;
  const std::size_t w = spectrum.width;
  std::vector<cd> buf(h * w);
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = {spectrum.re[i], spectrum.im[i]};
  transform2d(buf, h, w, true);
  ComplexPlane out(h, w);
  const double scale = 1.0 / static_cast<double>(h * w);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    out.re[i] = buf[i].real() * scale;
    out.im[i] = buf[i].imag() * scale;
  }
  return out;
}

ComplexPlane zero_center_shift(const ComplexPlane& spectrum) {
  const std::size_t h = spectrum.height;
  const std::size_t w = spectrum.width;
  ComplexPlane out(h, w);
  for (std::size_t u = 0; u < h; ++u) {
    const std::size_t du = (u + h / 2) % h;
    for (std::size_t v = 0; v < w; ++v) {
      const std::size_t dv = (v + w / 2) % w;
      out.re[du * w + dv] = spectrum.re[u * w + v];
      out.im[du * w + dv] = spectrum.im[u * w + v];
    }
  }
  return out;
}

ImageTensor spectral_image(const ImageTensor& img) {
  if (img.empty()) throw Error(ErrorKind::Dimension, "spectral image of empty tensor");
  if (img.range() != RangeTag::Byte0255) {
    throw Error(ErrorKind::Parameter, "spectral image expects a byte-range tensor");
  }
  const std::size_t h = img.height();
  const std::size_t w = img.width();
  ImageTensor logmag(h, w, img.channels(), RangeTag::Unbounded);
  for (std::size_t c = 0; c < img.channels(); ++c) {
    const auto plane = img.plane(c);
    const ComplexPlane shifted = zero_center_shift(fft2d(plane, h, w));
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        logmag.at(y, x, c) = static_cast<float>(std::log1p(shifted.magnitude(y, x)));
      }
    }
  }
  return normalize_range(logmag, RangeTag::Byte0255);
}

}  // namespace laid
