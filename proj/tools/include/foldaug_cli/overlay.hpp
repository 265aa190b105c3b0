#pragma once

#include <span>
#include <string_view>

#include "foldaug/boxes.hpp"
#include "foldaug/image_io.hpp"

namespace foldaug::cli {

/// Ground truth in solid green, lesion detections dashed red and hard-sample detections dashed
/// yellow, each detection labelled with its confidence to two decimals.
io::RgbImage draw_overlay(const GrayImage& image, std::span<const Annotation> ground_truth,
                          std::span<const Detection> detections);

/// Renders digits and '.' with a 3x5 bitmap font at (x, y), clipped to the image.
void draw_text(io::RgbImage& img, int x, int y, std::string_view text, std::uint8_t r,
               std::uint8_t g, std::uint8_t b);

}  // namespace foldaug::cli
