#pragma once

#include <random>
#include <vector>

#include "cyscolor/color.hpp"
#include "cyscolor/encoders.hpp"
#include "cyscolor/palette_gan.hpp"

namespace toy {

// Two-class task: "dark" contexts pair with low-lightness palettes, "bright"
// with high-lightness ones. Text, category and image all carry the label.
struct DarkBright {
  std::vector<cys::ContextInput> contexts;
  std::vector<cys::Palette> palettes;
  std::vector<bool> bright;
  cys::ContextInput dark_query;
  cys::ContextInput bright_query;
};

inline cys::ContextInput dark_bright_context(bool bright, int resolution) {
  cys::ContextInput c;
  c.tokens = bright ? std::vector<int>{2, 3} : std::vector<int>{4, 5};
  c.category = bright ? 1 : 0;
  c.image = cys::GrayImage::Constant(resolution, resolution, bright ? 0.8 : 0.2);
  return c;
}

inline DarkBright dark_bright(int records, int resolution, std::uint64_t seed) {
  DarkBright out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> hue(0.0, 359.0), sat(0.3, 0.9), dark(0.08, 0.3), light(0.7, 0.92);
  for (int r = 0; r < records; ++r) {
    const bool bright = r % 2 == 1;
    std::vector<cys::Color> colors;
    for (int i = 0; i < 5; ++i) {
      colors.push_back(cys::convert(cys::Color::hsl(hue(rng), sat(rng), bright ? light(rng) : dark(rng)),
                                    cys::ColorSpace::RGB));
    }
    out.contexts.push_back(dark_bright_context(bright, resolution));
    out.palettes.push_back(cys::Palette::from_colors(colors));
    out.bright.push_back(bright);
  }
  out.dark_query = dark_bright_context(false, resolution);
  out.bright_query = dark_bright_context(true, resolution);
  return out;
}

inline cys::GanConfig small_gan_config(int dim, int noise_dim, int resolution) {
  cys::GanConfig c;
  c.encoder.dim = dim;
  c.encoder.image_resolution = resolution;
  c.encoder.vocab_size = 8;
  c.encoder.category_count = 2;
  c.noise_dim = noise_dim;
  c.hidden = 32;
  c.generator_optimizer.learning_rate = 1e-3;
  c.discriminator_optimizer.learning_rate = 1e-3;
  c.batch_size = 32;
  c.seed = 11;
  return c;
}

inline double mean_hsl_lightness(const cys::Palette& p) {
  double s = 0.0;
  for (const auto& c : p.colors()) s += cys::convert(c, cys::ColorSpace::HSL).c2;
  return s / 5.0;
}

}  // namespace toy

#include "cyscolor/colorizer.hpp"
#include "cyscolor/stats.hpp"

namespace toy {

// Red-tinted image whose lightness varies smoothly with a random pattern.
inline cys::RgbImage red_image(int size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double fx = 1.0 + 3.0 * u(rng), fy = 1.0 + 3.0 * u(rng), phase = 6.28 * u(rng);
  cys::RgbImage img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double l = 0.3 + 0.25 * (1.0 + std::sin(fx * x / size * 6.28 + fy * y / size * 6.28 + phase)) * 0.8;
      const cys::Color c = cys::convert(cys::Color::hsl(0.0, 0.85, l), cys::ColorSpace::RGB);
      img.set_pixel(y, x, c.channels());
    }
  }
  return img;
}

inline cys::Palette red_palette() {
  std::vector<cys::Color> colors;
  for (double l : {0.3, 0.4, 0.5, 0.6, 0.7}) colors.push_back(cys::Color::hsl(0.0, 0.85, l));
  return cys::Palette::from_colors(colors).converted(cys::ColorSpace::RGB);
}

inline cys::ColorizerConfig small_colorizer_config(int resolution) {
  cys::ColorizerConfig c;
  c.resolution = resolution;
  c.channels = 8;
  c.context_channels = 4;
  c.hidden = 16;
  c.noise_dim = 4;
  c.encoder.dim = 8;
  c.encoder.image_resolution = 8;
  c.encoder.vocab_size = 8;
  c.encoder.category_count = 2;
  c.encoder.palette_mode = cys::PaletteInputMode::Full;
  c.generator_optimizer.learning_rate = 2e-3;
  c.discriminator_optimizer.learning_rate = 2e-3;
  c.seed = 5;
  return c;
}

inline cys::ContextInput red_context(int encoder_resolution) {
  cys::ContextInput c;
  c.tokens = {2, 3};
  c.category = 0;
  c.image = cys::GrayImage::Constant(encoder_resolution, encoder_resolution, 0.5);
  return c;
}

// Circular mean hue (degrees in [0, 360)) over pixels with visible chroma.
inline double mean_hue(const cys::ColorizedImage& img) {
  std::vector<double> hues;
  for (Eigen::Index y = 0; y < img.height(); ++y) {
    for (Eigen::Index x = 0; x < img.width(); ++x) {
      const cys::Color hsl = cys::convert(cys::Color::rgb(img.rgb.pixel(y, x)[0], img.rgb.pixel(y, x)[1], img.rgb.pixel(y, x)[2]), cys::ColorSpace::HSL);
      if (hsl.c1 > 0.05) hues.push_back(hsl.c0);
    }
  }
  if (hues.empty()) return std::nan("");
  double s = 0.0, c = 0.0;
  for (double h : hues) {
    s += std::sin(h * M_PI / 180.0);
    c += std::cos(h * M_PI / 180.0);
  }
  const double deg = std::atan2(s, c) * 180.0 / M_PI;
  return deg < 0.0 ? deg + 360.0 : deg;
}

inline double hue_distance(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 360.0);
  return std::min(d, 360.0 - d);
}

}  // namespace toy
