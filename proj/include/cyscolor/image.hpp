#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cyscolor/color.hpp"

namespace cys {

/// One image channel, rows = height, cols = width.
using Plane = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Single-channel image with values in [0, 1]. For context images the value
/// is Lab lightness divided by 100.
using GrayImage = Plane;

struct RgbImage {
  std::array<Plane, 3> channels;

  RgbImage() = default;
  RgbImage(Eigen::Index height, Eigen::Index width);

  Eigen::Index height() const { return channels[0].rows(); }
  Eigen::Index width() const { return channels[0].cols(); }
  Eigen::Index pixel_count() const { return height() * width(); }
  bool empty() const { return pixel_count() == 0; }

  Eigen::Vector3d pixel(Eigen::Index y, Eigen::Index x) const {
    return {channels[0](y, x), channels[1](y, x), channels[2](y, x)};
  }
  void set_pixel(Eigen::Index y, Eigen::Index x, const Eigen::Vector3d& rgb) {
    for (int c = 0; c < 3; ++c) channels[c](y, x) = rgb[c];
  }
};

/// Decodes PNG (8/16 bit, any color type) or baseline JPEG, sniffed by magic bytes.
RgbImage decode_image(std::span<const std::uint8_t> bytes);
RgbImage read_image(const std::filesystem::path& path);

/// Encodes an RGB PNG with 8 or 16 bits per channel.
std::vector<std::uint8_t> encode_png(const RgbImage& image, int bit_depth = 8);
void write_png(const std::filesystem::path& path, const RgbImage& image, int bit_depth = 8);

/// Lab lightness / 100 for every pixel.
GrayImage luminance(const RgbImage& image);
/// Renders a gray image (Lab L / 100) as neutral sRGB.
RgbImage gray_to_rgb(const GrayImage& gray);

Plane resize_bilinear(const Plane& plane, Eigen::Index height, Eigen::Index width);
Plane resize_nearest(const Plane& plane, Eigen::Index height, Eigen::Index width);
RgbImage resize_bilinear(const RgbImage& image, Eigen::Index height, Eigen::Index width);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace cys
