#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "foldaug/image.hpp"

namespace foldaug::io {

/// Interleaved 8-bit RGB raster, used only for visual overlays.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  RgbImage() = default;
  explicit RgbImage(const GrayImage& gray);

  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
};

GrayImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const GrayImage& img);
void write_png(const std::filesystem::path& path, const RgbImage& img);

/// Binary PGM (P5), maxval 255.
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& img);

/// Dispatches on extension: ".pgm" is PGM, everything else PNG.
GrayImage read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const GrayImage& img);

/// Raw field dump: "RFLD", u32 width, u32 height, u32 reserved (0), then width*height
/// float32 values, all little-endian.
void write_field(const std::filesystem::path& path, const RealField& field);
RealField read_field(const std::filesystem::path& path);

/// Mask rendered as a 0/255 image.
GrayImage mask_to_image(const BinaryMask& mask);

}  // namespace foldaug::io
