#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "cyscolor/color.hpp"
#include "cyscolor/encoders.hpp"
#include "cyscolor/nn.hpp"

namespace cys {

inline double square(double x) { return x * x; }

/// Least-squares discriminator loss α (D(x,y) - 1)² + (1 - α) D(G(z,y),y)².
/// Works elementwise for doubles and for autodiff variables alike.
template <typename T>
T loss_discriminator(const T& score_real, const T& score_fake, double alpha) {
  return alpha * square(score_real - 1.0) + (1.0 - alpha) * square(score_fake);
}

/// Least-squares generator loss α (D(G(z,y),y) - 1)².
template <typename T>
T loss_generator(const T& score_fake, double alpha) {
  return alpha * square(score_fake - 1.0);
}

struct GanConfig {
  double alpha = 0.5;
  int noise_dim = 16;
  int hidden = 64;
  EncoderConfig encoder;
  FusionWeights weights = FusionWeights::palette_defaults();
  nn::AdamOptions generator_optimizer{};
  nn::AdamOptions discriminator_optimizer{};
  int batch_size = 32;
  int steps_per_epoch = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const GanConfig& c);
void from_json(const nlohmann::json& j, GanConfig& c);

/// One teacher-forced sample: the prefix is palette[0..step) and the real
/// next color is palette[step].
struct TrainingExample {
  ContextInput context;
  Palette palette;
  int step = 0;
};

using TrainingBatch = std::vector<const TrainingExample*>;

/// Expands every (context, palette) pair into its five next-color samples.
std::vector<TrainingExample> expand_training_examples(std::span<const ContextInput> contexts,
                                                      std::span<const Palette> palettes);

struct LossValues {
  double discriminator = 0.0;
  double generator = 0.0;
};

/// Autoregressive conditional LSGAN over single next colors.
///
/// The context encoders train with the discriminator; the generator sees
/// the fused context as a constant.
class PaletteGan {
 public:
  PaletteGan() = default;
  explicit PaletteGan(const GanConfig& config);

  const GanConfig& config() const { return config_; }
  const ContextEncoders& encoders() const { return encoders_; }

  /// Builds y from the context and the colors generated so far (at most four).
  FusedContext context(const ContextInput& input, std::span<const Color> prefix) const;

  /// Next color in RGB [0,1]^3 for noise z (noise_dim) and context y (2d).
  Color generator_forward(const Eigen::VectorXd& z, const FusedContext& y) const;
  /// Unbounded realness score of color x as the next color under y.
  double discriminator_forward(const Color& x, const FusedContext& y) const;

  /// Mean L_D over the batch with fake colors from `noise` (batch x noise_dim).
  /// With `accumulate`, gradients are added to discriminator and encoder parameters.
  double discriminator_loss(const TrainingBatch& batch, const Eigen::MatrixXd& noise, bool accumulate);
  /// Mean L_G over the batch. With `accumulate`, gradients reach the generator
  /// (and, through D, the discriminator buffers, which the caller discards).
  double generator_loss(const TrainingBatch& batch, const Eigen::MatrixXd& noise, bool accumulate);

  /// One discriminator update on L_D followed by one generator update on L_G.
  /// Throws DivergenceError if either loss is non-finite.
  LossValues train_step(const TrainingBatch& batch, Rng& rng);

  /// Five colors emitted autoregressively from a seeded noise stream.
  Palette sample_palette(const ContextInput& input, std::uint64_t seed) const;

  std::vector<ad::NamedParameter> generator_parameters();
  /// Discriminator and context encoder parameters.
  std::vector<ad::NamedParameter> discriminator_parameters();
  std::vector<ad::NamedParameter> named_parameters();

 private:
  ad::Var generate(ad::Tape& tape, ad::Var noise, ad::Var y) const;
  ad::Var discriminate(ad::Tape& tape, ad::Var x, ad::Var y) const;
  Eigen::MatrixXd batch_context(const TrainingBatch& batch) const;
  ad::Var batch_context(ad::Tape& tape, const TrainingBatch& batch) const;
  void check_noise(const TrainingBatch& batch, const Eigen::MatrixXd& noise) const;

  GanConfig config_;
  ContextEncoders encoders_;
  nn::Linear g1_, g2_, g3_;
  nn::Linear d1_, d2_, d3_;
  nn::Adam g_optimizer_;
  nn::Adam d_optimizer_;
};

struct TrainLogEntry {
  long step = 0;
  double discriminator_loss = 0.0;
  double generator_loss = 0.0;
};

struct TrainOptions {
  long steps = 1000;
  int batch_size = 32;
  std::uint64_t seed = 0;
  std::function<void(const TrainLogEntry&)> on_step;
};

/// Runs `steps` train_step calls on uniformly drawn minibatches.
std::vector<TrainLogEntry> train_palette_gan(PaletteGan& model, std::span<const TrainingExample> examples,
                                             const TrainOptions& options);

}  // namespace cys
