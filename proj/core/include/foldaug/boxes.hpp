#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace foldaug {

/// Axis-aligned box in pixel coordinates. Max edges are exclusive.
struct BoundingBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  int width() const noexcept { return x_max - x_min; }
  int height() const noexcept { return y_max - y_min; }
  std::int64_t area() const noexcept {
    return valid() ? static_cast<std::int64_t>(width()) * height() : 0;
  }
  bool valid() const noexcept { return x_min < x_max && y_min < y_max; }
  bool within(int image_width, int image_height) const noexcept {
    return valid() && x_min >= 0 && y_min >= 0 && x_max <= image_width && y_max <= image_height;
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Intersection area over union area. Zero when either box is degenerate.
double iou(const BoundingBox& a, const BoundingBox& b) noexcept;

enum class ClassLabel : std::uint8_t { lesion = 0, hard_sample = 1 };

std::string_view to_string(ClassLabel label) noexcept;
std::optional<ClassLabel> parse_class_label(std::string_view text) noexcept;

struct Annotation {
  BoundingBox box;
  ClassLabel label = ClassLabel::lesion;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct Detection {
  BoundingBox box;
  ClassLabel label = ClassLabel::lesion;
  double confidence = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

}  // namespace foldaug
