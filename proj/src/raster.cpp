#include "uigauge/raster.hpp"

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include <jpeglib.h>
#include <png.h>

#include "uigauge/error.hpp"

namespace uigauge {

Raster::Raster(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw Error(ErrorCode::IoError, "negative raster dimensions");
  data_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = fill.r;
    data_[i + 1] = fill.g;
    data_[i + 2] = fill.b;
  }
}

Rgb Raster::at(int x, int y) const {
  std::size_t i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) * 3;
  return {data_[i], data_[i + 1], data_[i + 2]};
}

void Raster::set(int x, int y, Rgb c) {
  std::size_t i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) * 3;
  data_[i] = c.r;
  data_[i + 1] = c.g;
  data_[i + 2] = c.b;
}

namespace {

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

struct PngReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void png_read_from_span(png_structp png, png_bytep data, png_size_t length) {
  auto* cur = static_cast<PngReadCursor*>(png_get_io_ptr(png));
  if (cur->offset + length > cur->bytes.size()) png_error(png, "truncated PNG");
  std::memcpy(data, cur->bytes.data() + cur->offset, length);
  cur->offset += length;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  std::longjmp(err->jump, 1);
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Raster& image) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(ErrorCode::IoError, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "PNG encoding failed");
  }
  png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()), static_cast<png_uint_32>(image.height()), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  auto bytes = image.bytes();
  std::size_t stride = static_cast<std::size_t>(image.width()) * 3;
  for (int y = 0; y < image.height(); ++y) {
    png_write_row(png, const_cast<png_bytep>(bytes.data() + static_cast<std::size_t>(y) * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

Raster decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw Error(ErrorCode::IoError, "not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(ErrorCode::IoError, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  PngReadCursor cursor{bytes, 0};
  // Declared before setjmp so a longjmp never skips their destructors.
  Raster result;
  std::vector<png_bytep> rows;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::IoError, "PNG decoding failed");
  }
  png_set_read_fn(png, &cursor, png_read_from_span);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  int w = static_cast<int>(png_get_image_width(png, info));
  int h = static_cast<int>(png_get_image_height(png, info));
  result = Raster(w, h);
  rows.resize(static_cast<std::size_t>(h));
  auto data = result.bytes();
  for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = data.data() + static_cast<std::size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return result;
}

Raster decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  Raster result;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorCode::IoError, "JPEG decoding failed");
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  result = Raster(static_cast<int>(cinfo.output_width), static_cast<int>(cinfo.output_height));
  auto data = result.bytes();
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = data.data() + static_cast<std::size_t>(cinfo.output_scanline) * cinfo.output_width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return result;
}

namespace {
bool is_png(std::span<const std::uint8_t> b) { return b.size() >= 8 && png_sig_cmp(b.data(), 0, 8) == 0; }
bool is_jpeg(std::span<const std::uint8_t> b) { return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF; }
}  // namespace

Raster decode_image(std::span<const std::uint8_t> bytes) {
  if (is_png(bytes)) return decode_png(bytes);
  if (is_jpeg(bytes)) return decode_jpeg(bytes);
  throw Error(ErrorCode::IoError, "unsupported image format (expected PNG or JPEG)");
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

Raster read_image(const std::filesystem::path& path) { return decode_image(read_file_bytes(path)); }

void write_png(const Raster& image, const std::filesystem::path& path) { write_file_bytes(path, encode_png(image)); }

EncodedImage read_encoded_image(const std::filesystem::path& path) {
  EncodedImage img;
  img.bytes = read_file_bytes(path);
  if (is_png(img.bytes)) {
    img.mime = "image/png";
  } else if (is_jpeg(img.bytes)) {
    img.mime = "image/jpeg";
  } else {
    throw Error(ErrorCode::IoError, "unsupported image format: " + path.string());
  }
  return img;
}

}  // namespace uigauge
