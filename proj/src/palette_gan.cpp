#include "cyscolor/palette_gan.hpp"

#include <cmath>
#include <string>

namespace cys {

void GanConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  if (noise_dim <= 0) throw ValidationError("noise_dim must be positive");
  if (hidden <= 0) throw ValidationError("hidden width must be positive");
  if (batch_size <= 0) throw ValidationError("batch_size must be positive");
  if (steps_per_epoch <= 0) throw ValidationError("steps_per_epoch must be positive");
  encoder.validate();
  weights.validate();
}

void to_json(nlohmann::json& j, const GanConfig& c) {
  j = {{"alpha", c.alpha},
       {"noise_dim", c.noise_dim},
       {"hidden", c.hidden},
       {"encoder", c.encoder},
       {"weights", c.weights},
       {"generator_optimizer", c.generator_optimizer},
       {"discriminator_optimizer", c.discriminator_optimizer},
       {"batch_size", c.batch_size},
       {"steps_per_epoch", c.steps_per_epoch},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, GanConfig& c) {
  c.alpha = j.value("alpha", 0.5);
  c.noise_dim = j.value("noise_dim", 16);
  c.hidden = j.value("hidden", 64);
  c.encoder = j.at("encoder").get<EncoderConfig>();
  c.weights = j.contains("weights") ? j.at("weights").get<FusionWeights>() : FusionWeights::palette_defaults();
  if (j.contains("generator_optimizer")) c.generator_optimizer = j.at("generator_optimizer").get<nn::AdamOptions>();
  if (j.contains("discriminator_optimizer")) {
    c.discriminator_optimizer = j.at("discriminator_optimizer").get<nn::AdamOptions>();
  }
  c.batch_size = j.value("batch_size", 32);
  c.steps_per_epoch = j.value("steps_per_epoch", 100);
  c.seed = j.value("seed", std::uint64_t{0});
  c.validate();
}

std::vector<TrainingExample> expand_training_examples(std::span<const ContextInput> contexts,
                                                      std::span<const Palette> palettes) {
  if (contexts.size() != palettes.size()) throw ValidationError("contexts and palettes differ in length");
  std::vector<TrainingExample> out;
  out.reserve(contexts.size() * kPaletteSize);
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    const Palette rgb = palettes[i].converted(ColorSpace::RGB);
    for (int t = 0; t < static_cast<int>(kPaletteSize); ++t) out.push_back({contexts[i], rgb, t});
  }
  return out;
}

PaletteGan::PaletteGan(const GanConfig& config) : config_(config) {
  config_.validate();
  if (config_.encoder.palette_mode != PaletteInputMode::Prefix) {
    throw ValidationError("the palette generator encodes prefixes; encoder palette_mode must be prefix");
  }
  Rng rng(config_.seed);
  encoders_ = ContextEncoders(config_.encoder, rng);
  const int y_dim = 2 * config_.encoder.dim;
  const int h = config_.hidden;
  g1_ = nn::Linear(config_.noise_dim + y_dim, h, rng);
  g2_ = nn::Linear(h, h, rng);
  g3_ = nn::Linear(h, 3, rng);
  d1_ = nn::Linear(3 + y_dim, h, rng);
  d2_ = nn::Linear(h, h, rng);
  d3_ = nn::Linear(h, 1, rng);
  g_optimizer_ = nn::Adam(config_.generator_optimizer);
  d_optimizer_ = nn::Adam(config_.discriminator_optimizer);
}

FusedContext PaletteGan::context(const ContextInput& input, std::span<const Color> prefix) const {
  encoders_.validate(input);
  if (prefix.size() > kMaxPrefix) throw ValidationError("palette prefix holds at most 4 colors");
  return fuse(config_.weights, encoders_.encode_text(input.tokens), encoders_.encode_image(input.image),
              encoders_.encode_category(input.category), encoders_.encode_palette(prefix));
}

ad::Var PaletteGan::generate(ad::Tape& tape, ad::Var noise, ad::Var y) const {
  const ad::Var parts[] = {noise, y};
  ad::Var h = ad::leaky_relu(g1_(tape, ad::concat_cols(parts)));
  h = ad::leaky_relu(g2_(tape, h));
  return ad::sigmoid(g3_(tape, h));
}

ad::Var PaletteGan::discriminate(ad::Tape& tape, ad::Var x, ad::Var y) const {
  const ad::Var parts[] = {x, y};
  ad::Var h = ad::leaky_relu(d1_(tape, ad::concat_cols(parts)));
  h = ad::leaky_relu(d2_(tape, h));
  return d3_(tape, h);
}

Color PaletteGan::generator_forward(const Eigen::VectorXd& z, const FusedContext& y) const {
  if (z.size() != config_.noise_dim) throw ValidationError("generator: noise dimension mismatch");
  if (y.y.size() != 2 * config_.encoder.dim) throw ValidationError("generator: context dimension mismatch");
  ad::Tape tape(ad::Tape::Mode::Inference);
  const Eigen::RowVectorXd rgb = generate(tape, tape.constant(z.transpose()), tape.constant(y.y.transpose())).value().row(0);
  return Color::rgb(rgb[0], rgb[1], rgb[2]);
}

double PaletteGan::discriminator_forward(const Color& x, const FusedContext& y) const {
  if (y.y.size() != 2 * config_.encoder.dim) throw ValidationError("discriminator: context dimension mismatch");
  const Color rgb = convert(x, ColorSpace::RGB);
  ad::Tape tape(ad::Tape::Mode::Inference);
  return discriminate(tape, tape.constant(rgb.channels().transpose()), tape.constant(y.y.transpose())).value()(0, 0);
}

ad::Var PaletteGan::batch_context(ad::Tape& tape, const TrainingBatch& batch) const {
  std::vector<const ContextInput*> inputs;
  Eigen::MatrixXd features(static_cast<Eigen::Index>(batch.size()), config_.encoder.palette_features());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const TrainingExample& ex = *batch[i];
    if (ex.step < 0 || ex.step >= static_cast<int>(kPaletteSize)) {
      throw ValidationError("training example step must be in 0..4");
    }
    inputs.push_back(&ex.context);
    const auto& colors = ex.palette.colors();
    features.row(i) = palette_features(std::span<const Color>(colors.data(), ex.step), PaletteInputMode::Prefix);
  }
  return encoders_.fused(tape, config_.weights, inputs, features);
}

Eigen::MatrixXd PaletteGan::batch_context(const TrainingBatch& batch) const {
  ad::Tape tape(ad::Tape::Mode::Inference);
  return batch_context(tape, batch).value();
}

void PaletteGan::check_noise(const TrainingBatch& batch, const Eigen::MatrixXd& noise) const {
  if (batch.empty()) throw ValidationError("empty training batch");
  if (noise.rows() != static_cast<Eigen::Index>(batch.size()) || noise.cols() != config_.noise_dim) {
    throw ValidationError("noise must be batch x noise_dim");
  }
}

namespace {

Eigen::MatrixXd real_next_colors(const TrainingBatch& batch) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(batch.size()), 3);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    x.row(i) = convert(batch[i]->palette[batch[i]->step], ColorSpace::RGB).channels().transpose();
  }
  return x;
}

}  // namespace

double PaletteGan::discriminator_loss(const TrainingBatch& batch, const Eigen::MatrixXd& noise, bool accumulate) {
  check_noise(batch, noise);
  const Eigen::MatrixXd fake = [&] {
    ad::Tape gen(ad::Tape::Mode::Inference);
    return Eigen::MatrixXd(generate(gen, gen.constant(noise), gen.constant(batch_context(batch))).value());
  }();
  ad::Tape tape(accumulate ? ad::Tape::Mode::Training : ad::Tape::Mode::Inference);
  const ad::Var y = batch_context(tape, batch);
  const ad::Var real_score = discriminate(tape, tape.constant(real_next_colors(batch)), y);
  const ad::Var fake_score = discriminate(tape, tape.constant(fake), y);
  const ad::Var loss = ad::mean(loss_discriminator(real_score, fake_score, config_.alpha));
  if (accumulate) tape.backward(loss);
  return loss.value()(0, 0);
}

double PaletteGan::generator_loss(const TrainingBatch& batch, const Eigen::MatrixXd& noise, bool accumulate) {
  check_noise(batch, noise);
  ad::Tape tape(accumulate ? ad::Tape::Mode::Training : ad::Tape::Mode::Inference);
  const ad::Var y = tape.constant(batch_context(batch));
  const ad::Var fake = generate(tape, tape.constant(noise), y);
  const ad::Var loss = ad::mean(loss_generator(discriminate(tape, fake, y), config_.alpha));
  if (accumulate) tape.backward(loss);
  return loss.value()(0, 0);
}

namespace {

bool gradients_finite(const std::vector<ad::NamedParameter>& params) {
  for (const auto& p : params) {
    if (!p.param->grad.allFinite()) return false;
  }
  return true;
}

}  // namespace

LossValues PaletteGan::train_step(const TrainingBatch& batch, Rng& rng) {
  const auto all = named_parameters();
  const auto d_params = discriminator_parameters();
  const auto g_params = generator_parameters();
  LossValues out;

  nn::zero_grad(all);
  out.discriminator = discriminator_loss(batch, standard_normal(static_cast<Eigen::Index>(batch.size()), config_.noise_dim, rng), true);
  if (!std::isfinite(out.discriminator) || !gradients_finite(d_params)) {
    throw DivergenceError("discriminator loss diverged (L_D = " + std::to_string(out.discriminator) + ")");
  }
  d_optimizer_.step(nn::parameter_pointers(d_params));

  nn::zero_grad(all);
  out.generator = generator_loss(batch, standard_normal(static_cast<Eigen::Index>(batch.size()), config_.noise_dim, rng), true);
  if (!std::isfinite(out.generator) || !gradients_finite(g_params)) {
    throw DivergenceError("generator loss diverged (L_G = " + std::to_string(out.generator) + ")");
  }
  g_optimizer_.step(nn::parameter_pointers(g_params));
  nn::zero_grad(all);
  return out;
}

Palette PaletteGan::sample_palette(const ContextInput& input, std::uint64_t seed) const {
  encoders_.validate(input);
  Rng rng(seed);
  std::vector<Color> prefix;
  for (std::size_t t = 0; t < kPaletteSize; ++t) {
    const FusedContext y = context(input, std::span<const Color>(prefix.data(), std::min(prefix.size(), kMaxPrefix)));
    const Eigen::VectorXd z = standard_normal(1, config_.noise_dim, rng).row(0).transpose();
    prefix.push_back(generator_forward(z, y));
  }
  return Palette::from_colors(prefix);
}

std::vector<ad::NamedParameter> PaletteGan::generator_parameters() {
  std::vector<ad::NamedParameter> out;
  g1_.collect("generator.fc1", out);
  g2_.collect("generator.fc2", out);
  g3_.collect("generator.fc3", out);
  return out;
}

std::vector<ad::NamedParameter> PaletteGan::discriminator_parameters() {
  std::vector<ad::NamedParameter> out;
  d1_.collect("discriminator.fc1", out);
  d2_.collect("discriminator.fc2", out);
  d3_.collect("discriminator.fc3", out);
  encoders_.collect("encoders", out);
  return out;
}

std::vector<ad::NamedParameter> PaletteGan::named_parameters() {
  auto out = generator_parameters();
  auto d = discriminator_parameters();
  out.insert(out.end(), d.begin(), d.end());
  return out;
}

std::vector<TrainLogEntry> train_palette_gan(PaletteGan& model, std::span<const TrainingExample> examples,
                                             const TrainOptions& options) {
  if (examples.empty()) throw ValidationError("no training examples");
  if (options.batch_size <= 0) throw ValidationError("batch_size must be positive");
  Rng rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, examples.size() - 1);
  std::vector<TrainLogEntry> log;
  log.reserve(static_cast<std::size_t>(std::max(0L, options.steps)));
  for (long step = 0; step < options.steps; ++step) {
    TrainingBatch batch;
    for (int i = 0; i < options.batch_size; ++i) batch.push_back(&examples[pick(rng)]);
    const LossValues losses = model.train_step(batch, rng);
    log.push_back({step, losses.discriminator, losses.generator});
    if (options.on_step) options.on_step(log.back());
  }
  return log;
}

}  // namespace cys
