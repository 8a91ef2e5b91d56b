#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace uigauge {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Interleaved 8-bit RGB image, row-major, origin top-left.
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, Rgb fill = {255, 255, 255});

  int width() const { return width_; }
  int height() const { return height_; }
  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  Rgb at(int x, int y) const;
  void set(int x, int y, Rgb c);

  std::span<const std::uint8_t> bytes() const { return data_; }
  std::span<std::uint8_t> bytes() { return data_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Encoded image file contents plus MIME type, as sent to inference backends.
struct EncodedImage {
  std::string mime;
  std::vector<std::uint8_t> bytes;
};

std::vector<std::uint8_t> encode_png(const Raster& image);
Raster decode_png(std::span<const std::uint8_t> bytes);
Raster decode_jpeg(std::span<const std::uint8_t> bytes);

/// Decodes PNG or JPEG by signature.
Raster decode_image(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

Raster read_image(const std::filesystem::path& path);
void write_png(const Raster& image, const std::filesystem::path& path);

/// Reads a file without decoding it and tags it with a MIME type guessed from its signature.
EncodedImage read_encoded_image(const std::filesystem::path& path);

}  // namespace uigauge
