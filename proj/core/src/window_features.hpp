#pragma once

#include <span>
#include <vector>

#include "foldaug/boxes.hpp"
#include "foldaug/detector.hpp"
#include "foldaug/image.hpp"

namespace foldaug::detector::detail {

/// Integral images of the per-pixel channels the window features pool over.
class FeatureMaps {
public:
  /// `equalized` must already be histogram-equalized.
  explicit FeatureMaps(const GrayImage& equalized);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  /// Sum of channel `ch` over [x0, x1) x [y0, y1).
  double sum(int ch, int x0, int y0, int x1, int y1) const noexcept {
    const std::size_t stride = static_cast<std::size_t>(width_ + 1);
    const double* t = integral_.data() + static_cast<std::size_t>(ch) * plane_;
    return t[y1 * stride + x1] - t[y0 * stride + x1] - t[y1 * stride + x0] + t[y0 * stride + x0];
  }

  /// Writes feature_dimension() values for the window.
  void window_features(const BoundingBox& window, std::span<double> out) const;

private:
  int width_;
  int height_;
  std::size_t plane_;
  std::vector<double> integral_;
};

/// Dense square windows for an image of the given size, scale-major, row-major within a scale.
std::vector<BoundingBox> enumerate_windows(int width, int height, const DetectorHyper& hyper);

}  // namespace foldaug::detector::detail
