#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "laid/image.hpp"

namespace laid {

struct ComplexPlane {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> re;
  std::vector<double> im;

  ComplexPlane() = default;
  ComplexPlane(std::size_t h, std::size_t w) : height(h), width(w), re(h * w), im(h * w) {}

  std::complex<double> at(std::size_t u, std::size_t v) const {
    return {re[u * width + v], im[u * width + v]};
  }
  double magnitude(std::size_t u, std::size_t v) const { return std::abs(at(u, v)); }
};

// In-place 1D DFT of any length (radix-2 or Bluestein). `inverse` flips the
// exponent sign without 1/N scaling.
void fft1d(std::span<std::complex<double>> data, bool inverse = false);

// Unnormalized forward 2D DFT of a real H x W plane.
ComplexPlane fft2d(std::span<const double> plane, std::size_t height, std::size_t width);

// Inverse 2D DFT including the 1/(HW) factor.
ComplexPlane ifft2d(const ComplexPlane& spectrum);

// Moves bin (0,0) to (H/2, W/2).
ComplexPlane zero_center_shift(const ComplexPlane& spectrum);

// Per-channel log-magnitude of the centred spectrum, min-max scaled to [0, 255].
ImageTensor spectral_image(const ImageTensor& img);

}  // namespace laid
