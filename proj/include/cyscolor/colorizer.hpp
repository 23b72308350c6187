#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "cyscolor/color.hpp"
#include "cyscolor/encoders.hpp"
#include "cyscolor/image.hpp"
#include "cyscolor/nn.hpp"
#include "cyscolor/palette_gan.hpp"

namespace cys {

/// Chroma planes are scaled by this factor into roughly [-1, 1] inside the networks.
inline constexpr double kChromaScale = 110.0;

struct ColorizerConfig {
  double alpha = 0.5;
  int noise_dim = 8;
  int resolution = 128;  ///< working resolution, a multiple of 8
  int channels = 16;     ///< width of the first convolution
  int context_channels = 8;
  int hidden = 64;
  double l1_weight = 10.0;  ///< 0 trains on L_G alone
  EncoderConfig encoder;
  FusionWeights weights = FusionWeights::colorizer_defaults();
  nn::AdamOptions generator_optimizer{};
  nn::AdamOptions discriminator_optimizer{};
  int batch_size = 4;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const ColorizerConfig& c);
void from_json(const nlohmann::json& j, ColorizerConfig& c);

/// Lab planes (L in 0..100) computed from the final RGB rendering.
struct ColorizedImage {
  Plane L, a, b;
  RgbImage rgb;
  std::size_t gamut_mapped_pixels = 0;  ///< pixels whose chroma was reduced to fit sRGB

  Eigen::Index height() const { return L.rows(); }
  Eigen::Index width() const { return L.cols(); }
  static ColorizedImage from_rgb(const RgbImage& rgb);
};

/// Combines a lightness plane (Lab L / 100) with chroma planes (Lab units).
/// Out-of-gamut pixels keep their L and have chroma scaled down until they fit.
ColorizedImage compose_lab(const Plane& lightness, const Plane& a, const Plane& b);

struct ColorizeRequest {
  GrayImage grayscale;  ///< Lab L / 100 at the working resolution
  Palette palette;
  ContextInput context;  ///< context.image is at the encoder resolution
};

struct ColorizerExample {
  ContextInput context;
  Palette palette;
  GrayImage grayscale;  ///< working resolution, Lab L / 100
  Plane a, b;           ///< ground-truth chroma in Lab units
};

/// Resizes `image` to the working resolution and splits it into L and chroma.
/// The context image is replaced by the luminance at the encoder resolution.
ColorizerExample make_colorizer_example(const RgbImage& image, const Palette& palette, ContextInput context,
                                        const ColorizerConfig& config);

using ColorizerBatch = std::vector<const ColorizerExample*>;

struct DiscriminatorScores {
  Eigen::VectorXd real;
  Eigen::VectorXd fake;
};

/// Palette-conditioned colorization GAN that predicts Lab a,b planes.
class ColorizerGan {
 public:
  ColorizerGan() = default;
  explicit ColorizerGan(const ColorizerConfig& config);

  const ColorizerConfig& config() const { return config_; }
  const ContextEncoders& encoders() const { return encoders_; }

  /// Predicted chroma for one request, in Lab units, at the working resolution.
  std::pair<Plane, Plane> predict_chroma(const ColorizeRequest& request, std::uint64_t seed) const;

  /// Colorizes at the working resolution. L is copied from the input.
  ColorizedImage colorize(const ColorizeRequest& request, std::uint64_t seed) const;
  /// Colorizes an image of any size: chroma is predicted at the working
  /// resolution and upscaled nearest-neighbour onto the full-size L plane.
  ColorizedImage colorize_full(const GrayImage& grayscale, const Palette& palette, const ContextInput& context,
                               std::uint64_t seed) const;

  /// Fake chroma for a batch (B x 2R², channel-major, scaled by kChromaScale).
  Eigen::MatrixXd generate_batch(const ColorizerBatch& batch, const Eigen::MatrixXd& noise) const;
  DiscriminatorScores scores(const ColorizerBatch& batch, const Eigen::MatrixXd& noise) const;

  double discriminator_loss(const ColorizerBatch& batch, const Eigen::MatrixXd& noise, bool accumulate);
  /// Mean L_G plus l1_weight times the mean absolute chroma error (scaled units).
  double generator_loss(const ColorizerBatch& batch, const Eigen::MatrixXd& noise, bool accumulate);

  LossValues train_step(const ColorizerBatch& batch, Rng& rng);

  std::vector<ad::NamedParameter> generator_parameters();
  std::vector<ad::NamedParameter> discriminator_parameters();
  std::vector<ad::NamedParameter> named_parameters();

 private:
  ad::Var generate(ad::Tape& tape, ad::Var gray, ad::Var noise, ad::Var y) const;
  ad::Var discriminate(ad::Tape& tape, ad::Var gray, ad::Var chroma, ad::Var y) const;
  ad::Var batch_context(ad::Tape& tape, const ColorizerBatch& batch) const;
  Eigen::MatrixXd batch_context(const ColorizerBatch& batch) const;
  Eigen::MatrixXd batch_gray(const ColorizerBatch& batch) const;
  Eigen::MatrixXd batch_chroma(const ColorizerBatch& batch) const;
  void check_batch(const ColorizerBatch& batch, const Eigen::MatrixXd& noise) const;

  ColorizerConfig config_;
  ContextEncoders encoders_;
  nn::Linear g_context_;
  nn::Conv2d g_down1_, g_down2_, g_mid_, g_up1_, g_out_;
  nn::Conv2d d_conv1_, d_conv2_, d_conv3_;
  nn::Linear d_fc1_, d_fc2_;
  nn::Adam g_optimizer_;
  nn::Adam d_optimizer_;
};

struct ColorizerTrainOptions {
  long steps = 1000;
  int batch_size = 4;
  std::uint64_t seed = 0;
  std::function<void(const TrainLogEntry&)> on_step;
};

std::vector<TrainLogEntry> train_colorizer(ColorizerGan& model, std::span<const ColorizerExample> examples,
                                           const ColorizerTrainOptions& options);

/// Fraction of pixels whose nearest palette color is closer than `threshold` (ΔE76).
double palette_adherence(const ColorizedImage& image, const Palette& palette, double threshold = 25.0);

}  // namespace cys
