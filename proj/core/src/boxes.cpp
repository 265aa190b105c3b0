#include "foldaug/boxes.hpp"

#include <algorithm>

namespace foldaug {

double iou(const BoundingBox& a, const BoundingBox& b) noexcept {
  if (!a.valid() || !b.valid()) return 0.0;
  const std::int64_t iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const std::int64_t ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0 || ih <= 0) return 0.0;
  const std::int64_t inter = iw * ih;
  const std::int64_t uni = a.area() + b.area() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::string_view to_string(ClassLabel label) noexcept {
  return label == ClassLabel::lesion ? "lesion" : "hard-sample";
}

std::optional<ClassLabel> parse_class_label(std::string_view text) noexcept {
  if (text == "lesion") return ClassLabel::lesion;
  if (text == "hard-sample") return ClassLabel::hard_sample;
  return std::nullopt;
}

}  // namespace foldaug
