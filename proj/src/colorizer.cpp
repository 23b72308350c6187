#include "cyscolor/colorizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cys {

void ColorizerConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  if (noise_dim <= 0) throw ValidationError("noise_dim must be positive");
  if (resolution < 8 || resolution % 8 != 0) throw ValidationError("colorizer resolution must be a positive multiple of 8");
  if (channels <= 0 || context_channels <= 0 || hidden <= 0) throw ValidationError("layer widths must be positive");
  if (!(l1_weight >= 0.0) || !std::isfinite(l1_weight)) throw ValidationError("l1_weight must be finite and non-negative");
  if (batch_size <= 0) throw ValidationError("batch_size must be positive");
  encoder.validate();
  if (encoder.palette_mode != PaletteInputMode::Full) {
    throw ValidationError("the colorizer encodes whole palettes; encoder palette_mode must be full");
  }
  weights.validate();
}

void to_json(nlohmann::json& j, const ColorizerConfig& c) {
  j = {{"alpha", c.alpha},
       {"noise_dim", c.noise_dim},
       {"resolution", c.resolution},
       {"channels", c.channels},
       {"context_channels", c.context_channels},
       {"hidden", c.hidden},
       {"l1_weight", c.l1_weight},
       {"encoder", c.encoder},
       {"weights", c.weights},
       {"generator_optimizer", c.generator_optimizer},
       {"discriminator_optimizer", c.discriminator_optimizer},
       {"batch_size", c.batch_size},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ColorizerConfig& c) {
  c = ColorizerConfig{};
  c.alpha = j.value("alpha", c.alpha);
  c.noise_dim = j.value("noise_dim", c.noise_dim);
  c.resolution = j.value("resolution", c.resolution);
  c.channels = j.value("channels", c.channels);
  c.context_channels = j.value("context_channels", c.context_channels);
  c.hidden = j.value("hidden", c.hidden);
  c.l1_weight = j.value("l1_weight", c.l1_weight);
  c.encoder = j.at("encoder").get<EncoderConfig>();
  if (j.contains("weights")) c.weights = j.at("weights").get<FusionWeights>();
  if (j.contains("generator_optimizer")) c.generator_optimizer = j.at("generator_optimizer").get<nn::AdamOptions>();
  if (j.contains("discriminator_optimizer")) {
    c.discriminator_optimizer = j.at("discriminator_optimizer").get<nn::AdamOptions>();
  }
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.validate();
}

namespace {

std::array<Plane, 3> lab_planes(const RgbImage& rgb) {
  std::array<Plane, 3> lab;
  for (auto& p : lab) p.resize(rgb.height(), rgb.width());
  for (Eigen::Index y = 0; y < rgb.height(); ++y) {
    for (Eigen::Index x = 0; x < rgb.width(); ++x) {
      const Eigen::Vector3d v = srgb_to_lab<double>(rgb.pixel(y, x));
      for (int c = 0; c < 3; ++c) lab[c](y, x) = v[c];
    }
  }
  return lab;
}

bool in_gamut(const Eigen::Vector3d& rgb) {
  constexpr double eps = 1e-12;
  return (rgb.array() >= -eps).all() && (rgb.array() <= 1.0 + eps).all();
}

}  // namespace

ColorizedImage ColorizedImage::from_rgb(const RgbImage& rgb) {
  ColorizedImage out;
  auto lab = lab_planes(rgb);
  out.L = std::move(lab[0]);
  out.a = std::move(lab[1]);
  out.b = std::move(lab[2]);
  out.rgb = rgb;
  return out;
}

ColorizedImage compose_lab(const Plane& lightness, const Plane& a, const Plane& b) {
  if (a.rows() != lightness.rows() || a.cols() != lightness.cols() || b.rows() != lightness.rows() ||
      b.cols() != lightness.cols()) {
    throw ValidationError("lightness and chroma planes differ in size");
  }
  RgbImage rgb(lightness.rows(), lightness.cols());
  std::size_t mapped = 0;
  for (Eigen::Index y = 0; y < lightness.rows(); ++y) {
    for (Eigen::Index x = 0; x < lightness.cols(); ++x) {
      const double L = 100.0 * std::clamp(lightness(y, x), 0.0, 1.0);
      const double ca = std::clamp(a(y, x), -128.0, 127.0);
      const double cb = std::clamp(b(y, x), -128.0, 127.0);
      Eigen::Vector3d v = lab_to_srgb_unclamped<double>(Eigen::Vector3d(L, ca, cb));
      if (!in_gamut(v)) {
        ++mapped;
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 50; ++it) {
          const double mid = 0.5 * (lo + hi);
          if (in_gamut(lab_to_srgb_unclamped<double>(Eigen::Vector3d(L, mid * ca, mid * cb)))) {
            lo = mid;
          } else {
            hi = mid;
          }
        }
        v = lab_to_srgb_unclamped<double>(Eigen::Vector3d(L, lo * ca, lo * cb));
      }
      rgb.set_pixel(y, x, v.cwiseMax(0.0).cwiseMin(1.0));
    }
  }
  ColorizedImage out = ColorizedImage::from_rgb(rgb);
  out.gamut_mapped_pixels = mapped;
  return out;
}

ColorizerExample make_colorizer_example(const RgbImage& image, const Palette& palette, ContextInput context,
                                        const ColorizerConfig& config) {
  if (image.empty()) throw ValidationError("image: empty");
  const int r = config.resolution;
  const RgbImage small = resize_bilinear(image, r, r);
  auto lab = lab_planes(small);
  const int er = config.encoder.image_resolution;
  context.image = resize_bilinear(luminance(image), er, er);
  return {std::move(context), palette, lab[0] / 100.0, std::move(lab[1]), std::move(lab[2])};
}

ColorizerGan::ColorizerGan(const ColorizerConfig& config) : config_(config) {
  config_.validate();
  Rng rng(config_.seed);
  encoders_ = ContextEncoders(config_.encoder, rng);
  const int c = config_.channels;
  const int k = config_.context_channels;
  const int y_dim = 2 * config_.encoder.dim;
  const int r8 = config_.resolution / 8;
  g_context_ = nn::Linear(config_.noise_dim + y_dim, k, rng);
  g_down1_ = nn::Conv2d(1, c, 3, 2, 1, rng);
  g_down2_ = nn::Conv2d(c, 2 * c, 3, 2, 1, rng);
  g_mid_ = nn::Conv2d(2 * c + k, 2 * c, 3, 1, 1, rng);
  g_up1_ = nn::Conv2d(3 * c, c, 3, 1, 1, rng);
  g_out_ = nn::Conv2d(c + 1, 2, 3, 1, 1, rng);
  d_conv1_ = nn::Conv2d(3, c, 3, 2, 1, rng);
  d_conv2_ = nn::Conv2d(c, 2 * c, 3, 2, 1, rng);
  d_conv3_ = nn::Conv2d(2 * c, 2 * c, 3, 2, 1, rng);
  d_fc1_ = nn::Linear(2 * c * r8 * r8 + y_dim, config_.hidden, rng);
  d_fc2_ = nn::Linear(config_.hidden, 1, rng);
  g_optimizer_ = nn::Adam(config_.generator_optimizer);
  d_optimizer_ = nn::Adam(config_.discriminator_optimizer);
}

ad::Var ColorizerGan::generate(ad::Tape& tape, ad::Var gray, ad::Var noise, ad::Var y) const {
  const int r = config_.resolution;
  const int c = config_.channels;
  const ad::Geometry g0{1, r, r};
  const ad::Geometry g1 = g_down1_.output(g0);
  const ad::Geometry g2 = g_down2_.output(g1);
  const ad::Var h1 = ad::leaky_relu(g_down1_(tape, gray, g0));
  const ad::Var h2 = ad::leaky_relu(g_down2_(tape, h1, g1));
  const ad::Var zy[] = {noise, y};
  const ad::Var ctx = ad::broadcast_spatial(ad::leaky_relu(g_context_(tape, ad::concat_cols(zy))), g2.height, g2.width);
  const ad::Var mid_in[] = {h2, ctx};
  const ad::Geometry gm{2 * c + config_.context_channels, g2.height, g2.width};
  const ad::Var m = ad::leaky_relu(g_mid_(tape, ad::concat_cols(mid_in), gm));
  const ad::Var up1_in[] = {ad::upsample_nearest2x(m, {2 * c, g2.height, g2.width}), h1};
  const ad::Var u1 = ad::leaky_relu(g_up1_(tape, ad::concat_cols(up1_in), {3 * c, g1.height, g1.width}));
  const ad::Var out_in[] = {ad::upsample_nearest2x(u1, {c, g1.height, g1.width}), gray};
  return ad::tanh(g_out_(tape, ad::concat_cols(out_in), {c + 1, r, r}));
}

ad::Var ColorizerGan::discriminate(ad::Tape& tape, ad::Var gray, ad::Var chroma, ad::Var y) const {
  const int r = config_.resolution;
  const ad::Var in[] = {gray, chroma};
  ad::Geometry g{3, r, r};
  ad::Var h = ad::leaky_relu(d_conv1_(tape, ad::concat_cols(in), g));
  g = d_conv1_.output(g);
  h = ad::leaky_relu(d_conv2_(tape, h, g));
  g = d_conv2_.output(g);
  h = ad::leaky_relu(d_conv3_(tape, h, g));
  const ad::Var fc_in[] = {h, y};
  return d_fc2_(tape, ad::leaky_relu(d_fc1_(tape, ad::concat_cols(fc_in))));
}

void ColorizerGan::check_batch(const ColorizerBatch& batch, const Eigen::MatrixXd& noise) const {
  if (batch.empty()) throw ValidationError("empty training batch");
  if (noise.rows() != static_cast<Eigen::Index>(batch.size()) || noise.cols() != config_.noise_dim) {
    throw ValidationError("noise must be batch x noise_dim");
  }
  const int r = config_.resolution;
  for (const ColorizerExample* ex : batch) {
    if (ex->grayscale.rows() != r || ex->grayscale.cols() != r) {
      throw ValidationError("grayscale: expected " + std::to_string(r) + "x" + std::to_string(r) + ", got " +
                            std::to_string(ex->grayscale.rows()) + "x" + std::to_string(ex->grayscale.cols()));
    }
  }
}

ad::Var ColorizerGan::batch_context(ad::Tape& tape, const ColorizerBatch& batch) const {
  std::vector<const ContextInput*> inputs;
  Eigen::MatrixXd features(static_cast<Eigen::Index>(batch.size()), config_.encoder.palette_features());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    inputs.push_back(&batch[i]->context);
    features.row(i) = palette_features(batch[i]->palette.colors(), PaletteInputMode::Full);
  }
  return encoders_.fused(tape, config_.weights, inputs, features);
}

Eigen::MatrixXd ColorizerGan::batch_context(const ColorizerBatch& batch) const {
  ad::Tape tape(ad::Tape::Mode::Inference);
  return batch_context(tape, batch).value();
}

Eigen::MatrixXd ColorizerGan::batch_gray(const ColorizerBatch& batch) const {
  const Eigen::Index area = static_cast<Eigen::Index>(config_.resolution) * config_.resolution;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(batch.size()), area);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.row(i) = Eigen::Map<const Eigen::RowVectorXd>(batch[i]->grayscale.data(), area);
  }
  return out;
}

Eigen::MatrixXd ColorizerGan::batch_chroma(const ColorizerBatch& batch) const {
  const Eigen::Index area = static_cast<Eigen::Index>(config_.resolution) * config_.resolution;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(batch.size()), 2 * area);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const ColorizerExample& ex = *batch[i];
    if (ex.a.size() != area || ex.b.size() != area) throw ValidationError("chroma planes do not match the working resolution");
    out.row(i).head(area) = (Eigen::Map<const Eigen::RowVectorXd>(ex.a.data(), area) / kChromaScale).cwiseMax(-1.0).cwiseMin(1.0);
    out.row(i).tail(area) = (Eigen::Map<const Eigen::RowVectorXd>(ex.b.data(), area) / kChromaScale).cwiseMax(-1.0).cwiseMin(1.0);
  }
  return out;
}

Eigen::MatrixXd ColorizerGan::generate_batch(const ColorizerBatch& batch, const Eigen::MatrixXd& noise) const {
  check_batch(batch, noise);
  ad::Tape tape(ad::Tape::Mode::Inference);
  return generate(tape, tape.constant(batch_gray(batch)), tape.constant(noise), tape.constant(batch_context(batch))).value();
}

DiscriminatorScores ColorizerGan::scores(const ColorizerBatch& batch, const Eigen::MatrixXd& noise) const {
  const Eigen::MatrixXd fake = generate_batch(batch, noise);
  ad::Tape tape(ad::Tape::Mode::Inference);
  const ad::Var y = tape.constant(batch_context(batch));
  const ad::Var gray = tape.constant(batch_gray(batch));
  return {discriminate(tape, gray, tape.constant(batch_chroma(batch)), y).value().col(0),
          discriminate(tape, gray, tape.constant(fake), y).value().col(0)};
}

double ColorizerGan::discriminator_loss(const ColorizerBatch& batch, const Eigen::MatrixXd& noise, bool accumulate) {
  const Eigen::MatrixXd fake = generate_batch(batch, noise);
  ad::Tape tape(accumulate ? ad::Tape::Mode::Training : ad::Tape::Mode::Inference);
  const ad::Var y = batch_context(tape, batch);
  const ad::Var gray = tape.constant(batch_gray(batch));
  const ad::Var real_score = discriminate(tape, gray, tape.constant(batch_chroma(batch)), y);
  const ad::Var fake_score = discriminate(tape, gray, tape.constant(fake), y);
  const ad::Var loss = ad::mean(loss_discriminator(real_score, fake_score, config_.alpha));
  if (accumulate) tape.backward(loss);
  return loss.value()(0, 0);
}

double ColorizerGan::generator_loss(const ColorizerBatch& batch, const Eigen::MatrixXd& noise, bool accumulate) {
  check_batch(batch, noise);
  ad::Tape tape(accumulate ? ad::Tape::Mode::Training : ad::Tape::Mode::Inference);
  const ad::Var y = tape.constant(batch_context(batch));
  const ad::Var gray = tape.constant(batch_gray(batch));
  const ad::Var fake = generate(tape, gray, tape.constant(noise), y);
  ad::Var loss = ad::mean(loss_generator(discriminate(tape, gray, fake, y), config_.alpha));
  if (config_.l1_weight > 0.0) {
    loss = loss + config_.l1_weight * ad::mean(ad::abs(fake - tape.constant(batch_chroma(batch))));
  }
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

LossValues ColorizerGan::train_step(const ColorizerBatch& batch, Rng& rng) {
  const auto all = named_parameters();
  const auto d_params = discriminator_parameters();
  const auto g_params = generator_parameters();
  const auto rows = static_cast<Eigen::Index>(batch.size());
  LossValues out;

  nn::zero_grad(all);
  out.discriminator = discriminator_loss(batch, standard_normal(rows, config_.noise_dim, rng), true);
  if (!std::isfinite(out.discriminator) || !gradients_finite(d_params)) {
    throw DivergenceError("colorizer discriminator loss diverged (L_D = " + std::to_string(out.discriminator) + ")");
  }
  d_optimizer_.step(nn::parameter_pointers(d_params));

  nn::zero_grad(all);
  out.generator = generator_loss(batch, standard_normal(rows, config_.noise_dim, rng), true);
  if (!std::isfinite(out.generator) || !gradients_finite(g_params)) {
    throw DivergenceError("colorizer generator loss diverged (L_G = " + std::to_string(out.generator) + ")");
  }
  g_optimizer_.step(nn::parameter_pointers(g_params));
  nn::zero_grad(all);
  return out;
}

std::pair<Plane, Plane> ColorizerGan::predict_chroma(const ColorizeRequest& request, std::uint64_t seed) const {
  const int r = config_.resolution;
  if (request.grayscale.rows() != r || request.grayscale.cols() != r) {
    throw ValidationError("grayscale: resolution mismatch, expected " + std::to_string(r) + "x" + std::to_string(r) +
                          ", got " + std::to_string(request.grayscale.rows()) + "x" +
                          std::to_string(request.grayscale.cols()));
  }
  if (!request.grayscale.allFinite() || request.grayscale.minCoeff() < 0.0 || request.grayscale.maxCoeff() > 1.0) {
    throw ValidationError("grayscale: values must lie in [0, 1]");
  }
  encoders_.validate(request.context);
  const ColorizerExample ex{request.context, request.palette, request.grayscale, {}, {}};
  const ColorizerBatch batch{&ex};
  Rng rng(seed);
  const Eigen::MatrixXd fake = generate_batch(batch, standard_normal(1, config_.noise_dim, rng));
  const Eigen::Index area = static_cast<Eigen::Index>(r) * r;
  Plane a = Eigen::Map<const Plane>(fake.row(0).head(area).eval().data(), r, r) * kChromaScale;
  Plane b = Eigen::Map<const Plane>(fake.row(0).tail(area).eval().data(), r, r) * kChromaScale;
  return {std::move(a), std::move(b)};
}

ColorizedImage ColorizerGan::colorize(const ColorizeRequest& request, std::uint64_t seed) const {
  const auto [a, b] = predict_chroma(request, seed);
  return compose_lab(request.grayscale, a, b);
}

ColorizedImage ColorizerGan::colorize_full(const GrayImage& grayscale, const Palette& palette,
                                           const ContextInput& context, std::uint64_t seed) const {
  if (grayscale.size() == 0) throw ValidationError("grayscale: empty image");
  const int r = config_.resolution;
  const ColorizeRequest request{resize_bilinear(grayscale, r, r).cwiseMax(0.0).cwiseMin(1.0), palette, context};
  const auto [a, b] = predict_chroma(request, seed);
  return compose_lab(grayscale, resize_nearest(a, grayscale.rows(), grayscale.cols()),
                     resize_nearest(b, grayscale.rows(), grayscale.cols()));
}

std::vector<ad::NamedParameter> ColorizerGan::generator_parameters() {
  std::vector<ad::NamedParameter> out;
  g_context_.collect("generator.context", out);
  g_down1_.collect("generator.down1", out);
  g_down2_.collect("generator.down2", out);
  g_mid_.collect("generator.mid", out);
  g_up1_.collect("generator.up1", out);
  g_out_.collect("generator.out", out);
  return out;
}

std::vector<ad::NamedParameter> ColorizerGan::discriminator_parameters() {
  std::vector<ad::NamedParameter> out;
  d_conv1_.collect("discriminator.conv1", out);
  d_conv2_.collect("discriminator.conv2", out);
  d_conv3_.collect("discriminator.conv3", out);
  d_fc1_.collect("discriminator.fc1", out);
  d_fc2_.collect("discriminator.fc2", out);
  encoders_.collect("encoders", out);
  return out;
}

std::vector<ad::NamedParameter> ColorizerGan::named_parameters() {
  auto out = generator_parameters();
  auto d = discriminator_parameters();
  out.insert(out.end(), d.begin(), d.end());
  return out;
}

std::vector<TrainLogEntry> train_colorizer(ColorizerGan& model, std::span<const ColorizerExample> examples,
                                           const ColorizerTrainOptions& options) {
  if (examples.empty()) throw ValidationError("no training examples");
  if (options.batch_size <= 0) throw ValidationError("batch_size must be positive");
  Rng rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, examples.size() - 1);
  std::vector<TrainLogEntry> log;
  for (long step = 0; step < options.steps; ++step) {
    ColorizerBatch batch;
    for (int i = 0; i < options.batch_size; ++i) batch.push_back(&examples[pick(rng)]);
    const LossValues losses = model.train_step(batch, rng);
    log.push_back({step, losses.discriminator, losses.generator});
    if (options.on_step) options.on_step(log.back());
  }
  return log;
}

double palette_adherence(const ColorizedImage& image, const Palette& palette, double threshold) {
  const Palette lab = palette.converted(ColorSpace::LAB);
  const Eigen::Index n = image.L.size();
  if (n == 0) return 0.0;
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d p(image.L.data()[i], image.a.data()[i], image.b.data()[i]);
    double best = std::numeric_limits<double>::infinity();
    for (const Color& c : lab.colors()) best = std::min(best, (p - c.channels()).norm());
    if (best < threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace cys
