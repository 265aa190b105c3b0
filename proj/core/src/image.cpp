#include "foldaug/image.hpp"

#include <algorithm>
#include <string>

#include "foldaug/errors.hpp"

namespace foldaug {
namespace {

std::size_t checked_area(int width, int height) {
  if (width < 1 || height < 1) {
    throw DimensionError("image dimensions must be positive, got " + std::to_string(width) + "x" +
                         std::to_string(height));
  }
  return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
}

}  // namespace

GrayImage::GrayImage(int width, int height, std::uint8_t fill)
    : width_(width), height_(height), data_(checked_area(width, height), fill) {}

GrayImage::GrayImage(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (data_.size() != checked_area(width, height)) {
    throw DimensionError("pixel buffer length does not match width x height");
  }
}

RealField::RealField(int width, int height, double fill)
    : width_(width), height_(height), data_(checked_area(width, height), fill) {}

RealField::RealField(int width, int height, std::vector<double> data, bool normalized)
    : width_(width), height_(height), data_(std::move(data)) {
  if (data_.size() != checked_area(width, height)) {
    throw DimensionError("field buffer length does not match width x height");
  }
  if (normalized) mark_normalized();
}

void RealField::mark_normalized() {
  const bool in_range =
      std::all_of(data_.begin(), data_.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
  if (!in_range) throw DomainError("field tagged normalized has values outside [0, 1]");
  normalized_ = true;
}

BinaryMask::BinaryMask(int width, int height, bool fill)
    : width_(width), height_(height), data_(checked_area(width, height), fill ? 1 : 0) {}

std::size_t BinaryMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

std::size_t hamming_distance(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw DimensionError("mask dimensions differ");
  }
  std::size_t n = 0;
  const auto x = a.bits();
  const auto y = b.bits();
  for (std::size_t i = 0; i < x.size(); ++i) n += (x[i] != y[i]) ? 1 : 0;
  return n;
}

}  // namespace foldaug
