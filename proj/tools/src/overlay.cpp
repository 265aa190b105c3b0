#include "foldaug_cli/overlay.hpp"

#include <array>
#include <cstdio>

namespace foldaug::cli {
namespace {

struct Color {
  std::uint8_t r, g, b;
};

constexpr Color kTruth{40, 220, 60};
constexpr Color kLesion{235, 40, 40};
constexpr Color kHard{240, 210, 40};

// Rows of a 3x5 glyph, high bit on the left.
constexpr std::array<std::array<std::uint8_t, 5>, 11> kGlyphs{{
    {7, 5, 5, 5, 7},  // 0
    {2, 6, 2, 2, 7},  // 1
    {7, 1, 7, 4, 7},  // 2
    {7, 1, 7, 1, 7},  // 3
    {5, 5, 7, 1, 1},  // 4
    {7, 4, 7, 1, 7},  // 5
    {7, 4, 7, 5, 7},  // 6
    {7, 1, 2, 2, 2},  // 7
    {7, 5, 7, 5, 7},  // 8
    {7, 5, 7, 1, 7},  // 9
    {0, 0, 0, 0, 2},  // .
}};

void plot(io::RgbImage& img, int x, int y, Color c) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  img.set(x, y, c.r, c.g, c.b);
}

void rectangle(io::RgbImage& img, const BoundingBox& box, Color c, bool dashed) {
  const int x0 = box.x_min, y0 = box.y_min, x1 = box.x_max - 1, y1 = box.y_max - 1;
  const auto on = [dashed](int t) { return !dashed || (t / 4) % 2 == 0; };
  for (int x = x0; x <= x1; ++x) {
    if (on(x - x0)) {
      plot(img, x, y0, c);
      plot(img, x, y1, c);
    }
  }
  for (int y = y0; y <= y1; ++y) {
    if (on(y - y0)) {
      plot(img, x0, y, c);
      plot(img, x1, y, c);
    }
  }
}

}  // namespace

void draw_text(io::RgbImage& img, int x, int y, std::string_view text, std::uint8_t r,
               std::uint8_t g, std::uint8_t b) {
  for (char ch : text) {
    int glyph = -1;
    if (ch >= '0' && ch <= '9') glyph = ch - '0';
    if (ch == '.') glyph = 10;
    if (glyph >= 0) {
      for (int row = 0; row < 5; ++row) {
        for (int col = 0; col < 3; ++col) {
          if (kGlyphs[static_cast<std::size_t>(glyph)][static_cast<std::size_t>(row)] & (4 >> col)) {
            plot(img, x + col, y + row, Color{r, g, b});
          }
        }
      }
    }
    x += 4;
  }
}

io::RgbImage draw_overlay(const GrayImage& image, std::span<const Annotation> ground_truth,
                          std::span<const Detection> detections) {
  io::RgbImage out(image);
  for (const auto& a : ground_truth) rectangle(out, a.box, kTruth, false);
  for (const auto& d : detections) {
    const Color c = d.label == ClassLabel::lesion ? kLesion : kHard;
    rectangle(out, d.box, c, true);
    char label[16];
    std::snprintf(label, sizeof label, "%.2f", d.confidence);
    const int ty = d.box.y_min >= 7 ? d.box.y_min - 7 : d.box.y_min + 2;
    draw_text(out, d.box.x_min + 1, ty, label, c.r, c.g, c.b);
  }
  return out;
}

}  // namespace foldaug::cli
