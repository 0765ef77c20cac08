#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace laid {

enum class RangeTag : unsigned char { Unit01 = 0, Byte0255 = 1, Unbounded = 2 };

std::string_view to_string(RangeTag tag);

// H x W x C real samples, row-major with the channel index fastest.
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(std::size_t height, std::size_t width, std::size_t channels,
              RangeTag tag = RangeTag::Byte0255, float fill = 0.0f);
  ImageTensor(std::size_t height, std::size_t width, std::size_t channels, RangeTag tag,
              std::vector<float> data);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  RangeTag range() const { return range_; }
  void set_range(RangeTag tag) { range_ = tag; }

  float& at(std::size_t y, std::size_t x, std::size_t c) {
    return data_[(y * width_ + x) * channels_ + c];
  }
  float at(std::size_t y, std::size_t x, std::size_t c) const {
    return data_[(y * width_ + x) * channels_ + c];
  }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  // Single channel as a dense H x W plane.
  std::vector<double> plane(std::size_t c) const;

  // Throws if samples violate the range tag.
  void check_range() const;

  bool operator==(const ImageTensor&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  RangeTag range_ = RangeTag::Byte0255;
  std::vector<float> data_;
};

// Half-pixel-centre bilinear resampling. Output keeps the input range tag.
ImageTensor resize_bilinear(const ImageTensor& img, std::size_t out_h, std::size_t out_w);

// Joint min-max map over all channels onto the target range. Constant images
// map to the midpoint. Unbounded targets only retag.
ImageTensor normalize_range(const ImageTensor& img, RangeTag target);

void clamp_to_byte_range(ImageTensor& img);

}  // namespace laid
