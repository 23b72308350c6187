#include "cyscolor/color.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

namespace cys {

std::string_view to_string(ColorSpace space) {
  switch (space) {
    case ColorSpace::RGB: return "RGB";
    case ColorSpace::HSL: return "HSL";
    case ColorSpace::LAB: return "LAB";
  }
  return "?";
}

namespace {

bool within(double v, double lo, double hi) { return std::isfinite(v) && v >= lo && v <= hi; }

std::string describe(const Color& c) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%s(%g, %g, %g)", std::string(to_string(c.space)).c_str(), c.c0, c.c1, c.c2);
  return buf;
}

Eigen::Vector3d clamp_rgb(Eigen::Vector3d v) { return v.cwiseMax(0.0).cwiseMin(1.0); }

Eigen::Vector3d clamp_lab(Eigen::Vector3d v) {
  v[0] = std::clamp(v[0], 0.0, 100.0);
  v[1] = std::clamp(v[1], -128.0, 127.0);
  v[2] = std::clamp(v[2], -128.0, 127.0);
  return v;
}

Eigen::Vector3d clamp_hsl(Eigen::Vector3d v) {
  if (v[0] < 0.0 || v[0] >= 360.0) v[0] = 0.0;
  v[1] = std::clamp(v[1], 0.0, 1.0);
  v[2] = std::clamp(v[2], 0.0, 1.0);
  if (v[1] == 0.0) v[0] = 0.0;
  return v;
}

Eigen::Vector3d to_rgb(const Color& c) {
  switch (c.space) {
    case ColorSpace::RGB: return c.channels();
    case ColorSpace::HSL: return clamp_rgb(hsl_to_srgb<double>(c.channels()));
    case ColorSpace::LAB: return clamp_rgb(lab_to_srgb_unclamped<double>(c.channels()));
  }
  return {};
}

int hex_digit(char ch) {
  if (ch >= '0' && ch <= '9') return ch - '0';
  if (ch >= 'a' && ch <= 'f') return ch - 'a' + 10;
  if (ch >= 'A' && ch <= 'F') return ch - 'A' + 10;
  return -1;
}

}  // namespace

void Color::validate() const {
  bool ok = false;
  switch (space) {
    case ColorSpace::RGB:
      ok = within(c0, 0, 1) && within(c1, 0, 1) && within(c2, 0, 1);
      break;
    case ColorSpace::HSL:
      ok = std::isfinite(c0) && c0 >= 0 && c0 < 360 && within(c1, 0, 1) && within(c2, 0, 1);
      break;
    case ColorSpace::LAB:
      ok = within(c0, 0, 100) && within(c1, -128, 127) && within(c2, -128, 127);
      break;
  }
  if (!ok) throw ValidationError("color channels out of range: " + describe(*this));
}

Color convert(const Color& color, ColorSpace target) {
  color.validate();
  if (color.space == target) return color;
  const Eigen::Vector3d rgb = to_rgb(color);
  Eigen::Vector3d out = rgb;
  switch (target) {
    case ColorSpace::RGB: out = rgb; break;
    case ColorSpace::HSL: out = clamp_hsl(srgb_to_hsl<double>(rgb)); break;
    case ColorSpace::LAB: out = clamp_lab(srgb_to_lab<double>(rgb)); break;
  }
  return {target, out[0], out[1], out[2]};
}

Color from_hex(std::string_view hex) {
  const auto fail = [&] { return ParseError("malformed hex color \"" + std::string(hex) + "\", expected #RRGGBB"); };
  if (hex.size() != 7 || hex[0] != '#') throw fail();
  std::array<double, 3> ch{};
  for (int i = 0; i < 3; ++i) {
    const int hi = hex_digit(hex[1 + 2 * i]);
    const int lo = hex_digit(hex[2 + 2 * i]);
    if (hi < 0 || lo < 0) throw fail();
    ch[i] = (hi * 16 + lo) / 255.0;
  }
  return Color::rgb(ch[0], ch[1], ch[2]);
}

std::string to_hex(const Color& color) {
  const Color rgb = convert(color, ColorSpace::RGB);
  char buf[8];
  const auto byte = [](double v) { return static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
  std::snprintf(buf, sizeof buf, "#%02X%02X%02X", byte(rgb.c0), byte(rgb.c1), byte(rgb.c2));
  return buf;
}

double delta_e76(const Color& a, const Color& b) {
  const Color la = convert(a, ColorSpace::LAB);
  const Color lb = convert(b, ColorSpace::LAB);
  return (la.channels() - lb.channels()).norm();
}

Palette::Palette(const std::array<Color, kPaletteSize>& colors) : colors_(colors) {
  for (const Color& c : colors_) {
    c.validate();
    if (c.space != colors_[0].space) throw ValidationError("palette colors must share one color space");
  }
}

Palette Palette::from_colors(std::span<const Color> colors) {
  if (colors.size() != kPaletteSize) {
    throw ValidationError("palette length must be 5, got " + std::to_string(colors.size()));
  }
  std::array<Color, kPaletteSize> arr;
  std::copy(colors.begin(), colors.end(), arr.begin());
  return Palette(arr);
}

Palette Palette::from_hex(std::span<const std::string> hex) {
  if (hex.size() != kPaletteSize) {
    throw ValidationError("palette length must be 5, got " + std::to_string(hex.size()));
  }
  std::array<Color, kPaletteSize> arr;
  for (std::size_t i = 0; i < kPaletteSize; ++i) arr[i] = cys::from_hex(hex[i]);
  return Palette(arr);
}

Palette Palette::converted(ColorSpace target) const {
  std::array<Color, kPaletteSize> arr;
  for (std::size_t i = 0; i < kPaletteSize; ++i) arr[i] = convert(colors_[i], target);
  return Palette(arr);
}

std::vector<std::string> Palette::to_hex() const {
  std::vector<std::string> out;
  out.reserve(kPaletteSize);
  for (const Color& c : colors_) out.push_back(cys::to_hex(c));
  return out;
}

std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost, double* total) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw ValidationError("assignment cost matrix must be square");
  constexpr double inf = std::numeric_limits<double>::infinity();
  // Potentials formulation, 1-based with a virtual column 0.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(n, -1);
  double sum = 0.0;
  for (int j = 1; j <= n; ++j) {
    assignment[match[j] - 1] = j - 1;
    sum += cost(match[j] - 1, j - 1);
  }
  if (total) *total = sum;
  return assignment;
}

double palette_distance(const Palette& a, const Palette& b) {
  const Palette la = a.converted(ColorSpace::LAB);
  const Palette lb = b.converted(ColorSpace::LAB);
  Eigen::MatrixXd cost(kPaletteSize, kPaletteSize);
  for (std::size_t i = 0; i < kPaletteSize; ++i) {
    for (std::size_t j = 0; j < kPaletteSize; ++j) {
      cost(i, j) = (la[i].channels() - lb[j].channels()).norm();
    }
  }
  double total = 0.0;
  min_cost_assignment(cost, &total);
  return total / static_cast<double>(kPaletteSize);
}

}  // namespace cys
