#include "cyscolor/image.hpp"

#include <png.h>
#include <jpeglib.h>

#include <algorithm>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

namespace cys {

RgbImage::RgbImage(Eigen::Index height, Eigen::Index width) {
  for (Plane& p : channels) p = Plane::Zero(height, width);
}

namespace {

struct PngReadState {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void png_read_from_span(png_structp png, png_bytep out, png_size_t length) {
  auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (state->offset + length > state->bytes.size()) png_error(png, "truncated PNG stream");
  std::memcpy(out, state->bytes.data() + state->offset, length);
  state->offset += length;
}

void png_warning_ignore(png_structp, png_const_charp) {}

RgbImage decode_png(std::span<const std::uint8_t> bytes) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warning_ignore);
  if (!png) throw ParseError("PNG: cannot allocate decoder");
  png_infop info = png_create_info_struct(png);
  PngReadState state{bytes, 0};
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  RgbImage image;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError("PNG: corrupt or truncated stream");
  }
  png_set_read_fn(png, &state, png_read_from_span);
  png_read_info(png, info);
  const int color_type = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);  // native little-endian words
  png_read_update_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  image = RgbImage(height, width);
  for (png_uint_32 y = 0; y < height; ++y) {
    for (png_uint_32 x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double v;
        if (out_depth == 16) {
          std::uint16_t word;
          std::memcpy(&word, rows[y] + (x * 3 + c) * 2, 2);
          v = word / 65535.0;
        } else {
          v = rows[y][x * 3 + c] / 255.0;
        }
        image.channels[c](y, x) = v;
      }
    }
  }
  return image;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

RgbImage decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  std::vector<std::uint8_t> pixels;
  unsigned width = 0, height = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw ParseError(std::string("JPEG: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = cinfo.output_width;
  height = cinfo.output_height;
  pixels.resize(static_cast<std::size_t>(width) * height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);

  RgbImage image(height, width);
  for (unsigned y = 0; y < height; ++y) {
    for (unsigned x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) image.channels[c](y, x) = pixels[(y * width + x) * 3 + c] / 255.0;
    }
  }
  return image;
}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

}  // namespace

RgbImage decode_image(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t kPngMagic[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (bytes.size() >= 8 && std::equal(kPngMagic, kPngMagic + 8, bytes.begin())) return decode_png(bytes);
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) return decode_jpeg(bytes);
  throw ParseError("unsupported image format (expected PNG or JPEG)");
}

RgbImage read_image(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_image(bytes);
}

std::vector<std::uint8_t> encode_png(const RgbImage& image, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw ValidationError("PNG bit depth must be 8 or 16");
  if (image.empty()) throw ValidationError("cannot encode an empty image");
  const auto width = static_cast<png_uint_32>(image.width());
  const auto height = static_cast<png_uint_32>(image.height());
  const std::size_t bytes_per_sample = bit_depth / 8;
  const double scale = bit_depth == 16 ? 65535.0 : 255.0;

  // Rows are packed up front so no C++ object is live across libpng calls.
  std::vector<png_byte> packed(static_cast<std::size_t>(height) * width * 3 * bytes_per_sample);
  for (png_uint_32 y = 0; y < height; ++y) {
    for (png_uint_32 x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const auto v = static_cast<unsigned>(std::lround(std::clamp(image.channels[c](y, x), 0.0, 1.0) * scale));
        const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3 + c;
        if (bit_depth == 16) {
          packed[i * 2] = static_cast<png_byte>(v >> 8);  // PNG is big-endian
          packed[i * 2 + 1] = static_cast<png_byte>(v & 0xFF);
        } else {
          packed[i] = static_cast<png_byte>(v);
        }
      }
    }
  }
  std::vector<png_bytep> rows(height);
  const std::size_t rowbytes = static_cast<std::size_t>(width) * 3 * bytes_per_sample;
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = packed.data() + y * rowbytes;

  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warning_ignore);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("PNG: encoding failed");
  }
  png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
  png_set_IHDR(png, info, width, height, bit_depth, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_png(const std::filesystem::path& path, const RgbImage& image, int bit_depth) {
  write_file_bytes(path, encode_png(image, bit_depth));
}

GrayImage luminance(const RgbImage& image) {
  GrayImage gray(image.height(), image.width());
  for (Eigen::Index y = 0; y < image.height(); ++y) {
    for (Eigen::Index x = 0; x < image.width(); ++x) {
      gray(y, x) = std::clamp(srgb_to_lab<double>(image.pixel(y, x))[0] / 100.0, 0.0, 1.0);
    }
  }
  return gray;
}

RgbImage gray_to_rgb(const GrayImage& gray) {
  RgbImage image(gray.rows(), gray.cols());
  for (Eigen::Index y = 0; y < gray.rows(); ++y) {
    for (Eigen::Index x = 0; x < gray.cols(); ++x) {
      const Eigen::Vector3d rgb = lab_to_srgb_unclamped<double>({gray(y, x) * 100.0, 0.0, 0.0});
      image.set_pixel(y, x, rgb.cwiseMax(0.0).cwiseMin(1.0));
    }
  }
  return image;
}

Plane resize_bilinear(const Plane& plane, Eigen::Index height, Eigen::Index width) {
  if (plane.size() == 0 || height <= 0 || width <= 0) throw ValidationError("resize of an empty plane");
  if (plane.rows() == height && plane.cols() == width) return plane;
  Plane out(height, width);
  const double sy = static_cast<double>(plane.rows()) / height;
  const double sx = static_cast<double>(plane.cols()) / width;
  for (Eigen::Index y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(plane.rows() - 1));
    const auto y0 = static_cast<Eigen::Index>(fy);
    const Eigen::Index y1 = std::min(y0 + 1, plane.rows() - 1);
    const double wy = fy - y0;
    for (Eigen::Index x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(plane.cols() - 1));
      const auto x0 = static_cast<Eigen::Index>(fx);
      const Eigen::Index x1 = std::min(x0 + 1, plane.cols() - 1);
      const double wx = fx - x0;
      out(y, x) = (1 - wy) * ((1 - wx) * plane(y0, x0) + wx * plane(y0, x1)) +
                  wy * ((1 - wx) * plane(y1, x0) + wx * plane(y1, x1));
    }
  }
  return out;
}

Plane resize_nearest(const Plane& plane, Eigen::Index height, Eigen::Index width) {
  if (plane.size() == 0 || height <= 0 || width <= 0) throw ValidationError("resize of an empty plane");
  Plane out(height, width);
  for (Eigen::Index y = 0; y < height; ++y) {
    const Eigen::Index sy = std::min(plane.rows() - 1, y * plane.rows() / height);
    for (Eigen::Index x = 0; x < width; ++x) {
      out(y, x) = plane(sy, std::min(plane.cols() - 1, x * plane.cols() / width));
    }
  }
  return out;
}

RgbImage resize_bilinear(const RgbImage& image, Eigen::Index height, Eigen::Index width) {
  RgbImage out;
  for (int c = 0; c < 3; ++c) out.channels[c] = resize_bilinear(image.channels[c], height, width);
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write file: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ValidationError("write failed: " + path.string());
}

}  // namespace cys
