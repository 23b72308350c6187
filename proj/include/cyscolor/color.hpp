#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cyscolor/error.hpp"

namespace cys {

enum class ColorSpace { RGB, HSL, LAB };

std::string_view to_string(ColorSpace space);

/// A color in one of the supported spaces.
///
/// Channel conventions:
///   RGB  r, g, b in [0, 1] (sRGB, gamma encoded)
///   HSL  hue in degrees [0, 360), saturation and lightness in [0, 1]
///   LAB  L in [0, 100], a and b in [-128, 127] (D65 white)
struct Color {
  ColorSpace space = ColorSpace::RGB;
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;

  static Color rgb(double r, double g, double b) { return {ColorSpace::RGB, r, g, b}; }
  static Color hsl(double h, double s, double l) { return {ColorSpace::HSL, h, s, l}; }
  static Color lab(double l, double a, double b) { return {ColorSpace::LAB, l, a, b}; }

  Eigen::Vector3d channels() const { return {c0, c1, c2}; }

  /// Throws ValidationError when a channel is outside its space's range.
  void validate() const;

  friend bool operator==(const Color&, const Color&) = default;
};

namespace detail {

inline constexpr double kWhiteX = 0.95047;
inline constexpr double kWhiteY = 1.0;
inline constexpr double kWhiteZ = 1.08883;

template <typename Scalar>
Scalar srgb_to_linear(Scalar c) {
  using std::pow;
  return c <= Scalar(0.04045) ? c / Scalar(12.92) : pow((c + Scalar(0.055)) / Scalar(1.055), Scalar(2.4));
}

template <typename Scalar>
Scalar linear_to_srgb(Scalar c) {
  using std::pow;
  return c <= Scalar(0.0031308) ? c * Scalar(12.92) : Scalar(1.055) * pow(c, Scalar(1) / Scalar(2.4)) - Scalar(0.055);
}

template <typename Scalar>
const Eigen::Matrix<Scalar, 3, 3>& rgb_to_xyz_matrix() {
  static const Eigen::Matrix<Scalar, 3, 3> m = (Eigen::Matrix<Scalar, 3, 3>() <<
      Scalar(0.4124564), Scalar(0.3575761), Scalar(0.1804375),
      Scalar(0.2126729), Scalar(0.7151522), Scalar(0.0721750),
      Scalar(0.0193339), Scalar(0.1191920), Scalar(0.9503041)).finished();
  return m;
}

template <typename Scalar>
const Eigen::Matrix<Scalar, 3, 3>& xyz_to_rgb_matrix() {
  static const Eigen::Matrix<Scalar, 3, 3> m = rgb_to_xyz_matrix<Scalar>().inverse();
  return m;
}

template <typename Scalar>
Scalar lab_f(Scalar t) {
  using std::cbrt;
  constexpr double delta = 6.0 / 29.0;
  return t > Scalar(delta * delta * delta) ? cbrt(t) : t / Scalar(3.0 * delta * delta) + Scalar(4.0 / 29.0);
}

template <typename Scalar>
Scalar lab_f_inverse(Scalar f) {
  constexpr double delta = 6.0 / 29.0;
  return f > Scalar(delta) ? f * f * f : Scalar(3.0 * delta * delta) * (f - Scalar(4.0 / 29.0));
}

}  // namespace detail

/// sRGB (gamma encoded, [0,1]) to CIE Lab under D65. No range checks.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> srgb_to_lab(const Eigen::Matrix<Scalar, 3, 1>& rgb) {
  Eigen::Matrix<Scalar, 3, 1> linear;
  for (int i = 0; i < 3; ++i) linear[i] = detail::srgb_to_linear(rgb[i]);
  const Eigen::Matrix<Scalar, 3, 1> xyz = detail::rgb_to_xyz_matrix<Scalar>() * linear;
  const Scalar fx = detail::lab_f(xyz[0] / Scalar(detail::kWhiteX));
  const Scalar fy = detail::lab_f(xyz[1] / Scalar(detail::kWhiteY));
  const Scalar fz = detail::lab_f(xyz[2] / Scalar(detail::kWhiteZ));
  return {Scalar(116) * fy - Scalar(16), Scalar(500) * (fx - fy), Scalar(200) * (fy - fz)};
}

/// Lab to sRGB without clamping; the result may leave [0,1]^3 for out-of-gamut input.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> lab_to_srgb_unclamped(const Eigen::Matrix<Scalar, 3, 1>& lab) {
  const Scalar fy = (lab[0] + Scalar(16)) / Scalar(116);
  const Scalar fx = fy + lab[1] / Scalar(500);
  const Scalar fz = fy - lab[2] / Scalar(200);
  const Eigen::Matrix<Scalar, 3, 1> xyz(Scalar(detail::kWhiteX) * detail::lab_f_inverse(fx),
                                        Scalar(detail::kWhiteY) * detail::lab_f_inverse(fy),
                                        Scalar(detail::kWhiteZ) * detail::lab_f_inverse(fz));
  Eigen::Matrix<Scalar, 3, 1> linear = detail::xyz_to_rgb_matrix<Scalar>() * xyz;
  Eigen::Matrix<Scalar, 3, 1> rgb;
  for (int i = 0; i < 3; ++i) {
    // pow of a small negative linear value is undefined; mirror the curve.
    const Scalar v = linear[i];
    rgb[i] = v < Scalar(0) ? -detail::linear_to_srgb(-v) : detail::linear_to_srgb(v);
  }
  return rgb;
}

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> srgb_to_hsl(const Eigen::Matrix<Scalar, 3, 1>& rgb) {
  const Scalar hi = rgb.maxCoeff();
  const Scalar lo = rgb.minCoeff();
  const Scalar l = (hi + lo) / Scalar(2);
  const Scalar chroma = hi - lo;
  if (chroma <= Scalar(0)) return {Scalar(0), Scalar(0), l};
  const Scalar s = chroma / (Scalar(1) - std::abs(Scalar(2) * l - Scalar(1)));
  Scalar h;
  if (hi == rgb[0]) {
    h = std::fmod((rgb[1] - rgb[2]) / chroma, Scalar(6));
  } else if (hi == rgb[1]) {
    h = (rgb[2] - rgb[0]) / chroma + Scalar(2);
  } else {
    h = (rgb[0] - rgb[1]) / chroma + Scalar(4);
  }
  h *= Scalar(60);
  if (h < Scalar(0)) h += Scalar(360);
  if (h >= Scalar(360)) h -= Scalar(360);
  return {h, std::min(s, Scalar(1)), l};
}

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> hsl_to_srgb(const Eigen::Matrix<Scalar, 3, 1>& hsl) {
  const Scalar chroma = (Scalar(1) - std::abs(Scalar(2) * hsl[2] - Scalar(1))) * hsl[1];
  const Scalar hp = hsl[0] / Scalar(60);
  const Scalar x = chroma * (Scalar(1) - std::abs(std::fmod(hp, Scalar(2)) - Scalar(1)));
  Eigen::Matrix<Scalar, 3, 1> rgb;
  switch (static_cast<int>(hp) % 6) {
    case 0: rgb << chroma, x, 0; break;
    case 1: rgb << x, chroma, 0; break;
    case 2: rgb << 0, chroma, x; break;
    case 3: rgb << 0, x, chroma; break;
    case 4: rgb << x, 0, chroma; break;
    default: rgb << chroma, 0, x; break;
  }
  rgb.array() += hsl[2] - chroma / Scalar(2);
  return rgb;
}

/// Converts between spaces. Output channels are clamped into the target range.
Color convert(const Color& color, ColorSpace target);

/// Decodes "#RRGGBB" (either case) into an RGB color.
Color from_hex(std::string_view hex);
/// Encodes as uppercase "#RRGGBB"; non-RGB colors are converted first.
std::string to_hex(const Color& color);

/// Euclidean distance in Lab (CIE76).
double delta_e76(const Color& a, const Color& b);

inline constexpr std::size_t kPaletteSize = 5;

/// Ordered five-color palette; index 0 is the most representative color.
class Palette {
 public:
  Palette() = default;
  explicit Palette(const std::array<Color, kPaletteSize>& colors);
  /// Throws ValidationError unless exactly five colors in one space are given.
  static Palette from_colors(std::span<const Color> colors);
  static Palette from_hex(std::span<const std::string> hex);

  const std::array<Color, kPaletteSize>& colors() const { return colors_; }
  const Color& operator[](std::size_t i) const { return colors_[i]; }
  ColorSpace space() const { return colors_[0].space; }

  Palette converted(ColorSpace target) const;
  std::vector<std::string> to_hex() const;

  friend bool operator==(const Palette&, const Palette&) = default;

 private:
  std::array<Color, kPaletteSize> colors_{};
};

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method).
/// Returns the assignment row -> column; `total` receives the matched cost.
std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost, double* total = nullptr);

/// Order-free palette distance: optimal matching of the pairwise Lab ΔE76
/// matrix, averaged over the five matched pairs.
double palette_distance(const Palette& a, const Palette& b);

}  // namespace cys
