#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace foldaug {

/// Row-major 8-bit grayscale raster.
class GrayImage {
public:
  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 0);
  GrayImage(int width, int height, std::vector<std::uint8_t> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::uint8_t& operator()(int x, int y) { return data_[index(x, y)]; }
  std::uint8_t operator()(int x, int y) const { return data_[index(x, y)]; }

  std::span<std::uint8_t> pixels() noexcept { return data_; }
  std::span<const std::uint8_t> pixels() const noexcept { return data_; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Row-major real-valued field. `normalized()` marks fields whose values are known to lie in [0, 1].
class RealField {
public:
  RealField() = default;
  RealField(int width, int height, double fill = 0.0);
  RealField(int width, int height, std::vector<double> data, bool normalized = false);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  bool normalized() const noexcept { return normalized_; }
  /// Tags the field as normalized after checking every value lies in [0, 1].
  void mark_normalized();

  double& operator()(int x, int y) { return data_[index(x, y)]; }
  double operator()(int x, int y) const { return data_[index(x, y)]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  friend bool operator==(const RealField&, const RealField&) = default;

private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
  bool normalized_ = false;
};

/// Row-major binary mask. Stored one byte per pixel (0 or 1).
class BinaryMask {
public:
  BinaryMask() = default;
  BinaryMask(int width, int height, bool fill = false);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }

  bool operator()(int x, int y) const { return data_[index(x, y)] != 0; }
  void set(int x, int y, bool v) { data_[index(x, y)] = v ? 1 : 0; }

  std::span<const std::uint8_t> bits() const noexcept { return data_; }
  std::span<std::uint8_t> bits() noexcept { return data_; }

  std::size_t count() const noexcept;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Number of positions where two same-sized masks differ.
std::size_t hamming_distance(const BinaryMask& a, const BinaryMask& b);

}  // namespace foldaug
