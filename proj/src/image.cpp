#include "laid/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "laid/error.hpp"

namespace laid {

std::string_view to_string(RangeTag tag) {
  switch (tag) {
    case RangeTag::Unit01: return "unit01";
    case RangeTag::Byte0255: return "byte0255";
    case RangeTag::Unbounded: return "unbounded";
  }
  return "?";
}

ImageTensor::ImageTensor(std::size_t height, std::size_t width, std::size_t channels,
                         RangeTag tag, float fill)
    : height_(height), width_(width), channels_(channels), range_(tag),
      data_(height * width * channels, fill) {}

ImageTensor::ImageTensor(std::size_t height, std::size_t width, std::size_t channels,
                         RangeTag tag, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), range_(tag), data_(std::move(data)) {
  if (data_.size() != height * width * channels) {
    throw Error(ErrorKind::Dimension,
                "tensor data length " + std::to_string(data_.size()) + " != " +
                    std::to_string(height) + "x" + std::to_string(width) + "x" +
                    std::to_string(channels));
  }
}

std::vector<double> ImageTensor::plane(std::size_t c) const {
  std::vector<double> out(height_ * width_);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = data_[i * channels_ + c];
  return out;
}

void ImageTensor::check_range() const {
  float hi = 0.0f;
  switch (range_) {
    case RangeTag::Unit01: hi = 1.0f; break;
    case RangeTag::Byte0255: hi = 255.0f; break;
    case RangeTag::Unbounded: return;
  }
  for (float v : data_) {
    if (!(v >= 0.0f && v <= hi)) {
      throw Error(ErrorKind::Numeric, "sample " + std::to_string(v) + " outside " +
                                          std::string(to_string(range_)));
    }
  }
}

ImageTensor resize_bilinear(const ImageTensor& img, std::size_t out_h, std::size_t out_w) {
  if (img.empty()) throw Error(ErrorKind::Dimension, "resize of empty image");
  if (out_h == 0 || out_w == 0) throw Error(ErrorKind::Dimension, "resize target must be >= 1x1");

  const std::size_t in_h = img.height();
  const std::size_t in_w = img.width();
  const std::size_t ch = img.channels();
  ImageTensor out(out_h, out_w, ch, img.range());

  struct Tap {
    std::size_t i0, i1;
    double frac;
  };
  auto taps = [](std::size_t in, std::size_t out_n) {
    std::vector<Tap> t(out_n);
    const double scale = static_cast<double>(in) / static_cast<double>(out_n);
    for (std::size_t o = 0; o < out_n; ++o) {
      double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(src));
      const std::size_t i1 = std::min(i0 + 1, in - 1);
      t[o] = {i0, i1, src - static_cast<double>(i0)};
    }
    return t;
  };
  const auto ty = taps(in_h, out_h);
  const auto tx = taps(in_w, out_w);

  for (std::size_t y = 0; y < out_h; ++y) {
    const Tap& a = ty[y];
    for (std::size_t x = 0; x < out_w; ++x) {
      const Tap& b = tx[x];
      for (std::size_t c = 0; c < ch; ++c) {
        const double top = img.at(a.i0, b.i0, c) * (1.0 - b.frac) + img.at(a.i0, b.i1, c) * b.frac;
        const double bot = img.at(a.i1, b.i0, c) * (1.0 - b.frac) + img.at(a.i1, b.i1, c) * b.frac;
        out.at(y, x, c) = static_cast<float>(top * (1.0 - a.frac) + bot * a.frac);
      }
    }
  }
  return out;
}

ImageTensor normalize_range(const ImageTensor& img, RangeTag target) {
  if (img.empty()) throw Error(ErrorKind::Dimension, "normalize of empty image");
  ImageTensor out = img;
  out.set_range(target);
  if (target == RangeTag::Unbounded) return out;

  const double hi = target == RangeTag::Unit01 ? 1.0 : 255.0;
  const auto [mn_it, mx_it] = std::minmax_element(img.data().begin(), img.data().end());
  const double mn = *mn_it;
  const double mx = *mx_it;
  auto dst = out.data();
  if (mx == mn) {
    std::fill(dst.begin(), dst.end(), static_cast<float>(hi / 2.0));
    return out;
  }
  const double scale = hi / (mx - mn);
  for (float& v : dst) {
    v = static_cast<float>(std::clamp((v - mn) * scale, 0.0, hi));
  }
  return out;
}

void clamp_to_byte_range(ImageTensor& img) {
  for (float& v : img.data()) v = std::clamp(v, 0.0f, 255.0f);
}

}  // namespace laid
