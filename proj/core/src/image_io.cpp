#include "foldaug/image_io.hpp"

#include <png.h>

#include <bit>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "foldaug/errors.hpp"

namespace foldaug::io {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

[[noreturn]] void png_error_handler(png_structp, png_const_charp msg) { throw IoError(msg); }
void png_warning_handler(png_structp, png_const_charp) {}

void write_png_rows(const std::filesystem::path& path, int width, int height, int color_type,
                    const std::uint8_t* data, std::size_t row_bytes) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                            png_warning_handler);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  if (!info) throw IoError("png_create_info_struct failed");

  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, data + static_cast<std::size_t>(y) * row_bytes);
  }
  png_write_end(png, nullptr);
}

void put_u32le(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

std::uint32_t get_u32le(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw ParseError("truncated field header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string lower_extension(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  for (char& c : e) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return e;
}

}  // namespace

RgbImage::RgbImage(const GrayImage& gray)
    : width(gray.width()), height(gray.height()), rgb(gray.size() * 3) {
  for (std::size_t i = 0; i < gray.size(); ++i) {
    rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = gray.pixels()[i];
  }
}

void RgbImage::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
  rgb[i] = r;
  rgb[i + 1] = g;
  rgb[i + 2] = b;
}

GrayImage read_png(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw ParseError(path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                           png_warning_handler);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};
  if (!info) throw IoError("png_create_info_struct failed");

  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);
  if (png_get_channels(png, info) != 1) throw ParseError(path.string() + ": unsupported PNG layout");

  GrayImage img(width, height);
  for (int y = 0; y < height; ++y) {
    png_read_row(png, img.pixels().data() + static_cast<std::size_t>(y) * width, nullptr);
  }
  png_read_end(png, nullptr);
  return img;
}

void write_png(const std::filesystem::path& path, const GrayImage& img) {
  write_png_rows(path, img.width(), img.height(), PNG_COLOR_TYPE_GRAY, img.pixels().data(),
                 static_cast<std::size_t>(img.width()));
}

void write_png(const std::filesystem::path& path, const RgbImage& img) {
  write_png_rows(path, img.width, img.height, PNG_COLOR_TYPE_RGB, img.rgb.data(),
                 static_cast<std::size_t>(img.width) * 3);
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());

  auto next_token = [&]() {
    std::string tok;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(c);
    }
    return tok;
  };

  if (next_token() != "P5") throw ParseError(path.string() + " is not a binary PGM (P5)");
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(next_token());
    height = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw ParseError(path.string() + ": malformed PGM header");
  }
  if (maxval != 255) throw ParseError(path.string() + ": only maxval 255 is supported");

  GrayImage img(width, height);
  if (!in.read(reinterpret_cast<char*>(img.pixels().data()),
               static_cast<std::streamsize>(img.size()))) {
    throw ParseError(path.string() + ": truncated PGM data");
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels().data()),
            static_cast<std::streamsize>(img.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

GrayImage read_image(const std::filesystem::path& path) {
  return lower_extension(path) == ".pgm" ? read_pgm(path) : read_png(path);
}

void write_image(const std::filesystem::path& path, const GrayImage& img) {
  if (lower_extension(path) == ".pgm") {
    write_pgm(path, img);
  } else {
    write_png(path, img);
  }
}

void write_field(const std::filesystem::path& path, const RealField& field) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write("RFLD", 4);
  put_u32le(out, static_cast<std::uint32_t>(field.width()));
  put_u32le(out, static_cast<std::uint32_t>(field.height()));
  put_u32le(out, 0);
  for (double v : field.values()) put_u32le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  if (!out) throw IoError("write failed for " + path.string());
}

RealField read_field(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "RFLD", 4) != 0) {
    throw ParseError(path.string() + ": bad field magic");
  }
  const auto w = static_cast<int>(get_u32le(in));
  const auto h = static_cast<int>(get_u32le(in));
  get_u32le(in);
  RealField field(w, h);
  for (double& v : field.values()) v = std::bit_cast<float>(get_u32le(in));
  return field;
}

GrayImage mask_to_image(const BinaryMask& mask) {
  GrayImage img(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.size(); ++i) img.pixels()[i] = mask.bits()[i] ? 255 : 0;
  return img;
}

}  // namespace foldaug::io
