#include "cyscolor/encoders.hpp"

#include <string>

namespace cys {

void FusionWeights::validate() const {
  for (double w : {text, image, category}) {
    if (!std::isfinite(w) || w < 0.0) throw ValidationError("fusion weights must be finite and non-negative");
  }
}

void to_json(nlohmann::json& j, const FusionWeights& w) {
  j = {{"text", w.text}, {"image", w.image}, {"category", w.category}};
}

void from_json(const nlohmann::json& j, FusionWeights& w) {
  w.text = j.at("text").get<double>();
  w.image = j.at("image").get<double>();
  w.category = j.at("category").get<double>();
  w.validate();
}

void EncoderConfig::validate() const {
  if (dim <= 0) throw ValidationError("encoder dim must be positive");
  if (image_resolution < 8 || image_resolution % 8 != 0) {
    throw ValidationError("encoder image resolution must be a positive multiple of 8");
  }
  if (vocab_size < 2) throw ValidationError("vocabulary must hold at least the PAD and UNK ids");
  if (category_count < 1) throw ValidationError("category count must be positive");
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = {{"d", c.dim},
       {"image_resolution", c.image_resolution},
       {"vocab_size", c.vocab_size},
       {"category_count", c.category_count},
       {"palette_mode", c.palette_mode == PaletteInputMode::Prefix ? "prefix" : "full"}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  c.dim = j.at("d").get<int>();
  c.image_resolution = j.at("image_resolution").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.category_count = j.at("category_count").get<int>();
  const std::string mode = j.value("palette_mode", "prefix");
  if (mode != "prefix" && mode != "full") throw ParseError("palette_mode must be \"prefix\" or \"full\"");
  c.palette_mode = mode == "prefix" ? PaletteInputMode::Prefix : PaletteInputMode::Full;
  c.validate();
}

Eigen::RowVectorXd palette_features(std::span<const Color> colors, PaletteInputMode mode) {
  if (mode == PaletteInputMode::Prefix) {
    if (colors.size() > kMaxPrefix) {
      throw ValidationError("palette prefix holds at most 4 colors, got " + std::to_string(colors.size()));
    }
    Eigen::RowVectorXd f = Eigen::RowVectorXd::Zero(16);
    for (std::size_t i = 0; i < colors.size(); ++i) {
      const Color rgb = convert(colors[i], ColorSpace::RGB);
      f.segment<3>(3 * i) = rgb.channels().transpose();
      f[12 + i] = 1.0;
    }
    return f;
  }
  if (colors.size() != kPaletteSize) throw ValidationError("full palette encoding needs exactly 5 colors");
  Eigen::RowVectorXd f(15);
  for (std::size_t i = 0; i < kPaletteSize; ++i) {
    f.segment<3>(3 * i) = convert(colors[i], ColorSpace::RGB).channels().transpose();
  }
  return f;
}

namespace {

constexpr int kConv1 = 8;
constexpr int kConv2 = 16;
constexpr int kConv3 = 16;

}  // namespace

ContextEncoders::ContextEncoders(const EncoderConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const int d = config_.dim;
  const int r8 = config_.image_resolution / 8;
  token_embedding_ = nn::Embedding(config_.vocab_size, d, rng);
  text_projection_ = nn::Linear(d, d, rng);
  image_conv1_ = nn::Conv2d(1, kConv1, 3, 2, 1, rng);
  image_conv2_ = nn::Conv2d(kConv1, kConv2, 3, 2, 1, rng);
  image_conv3_ = nn::Conv2d(kConv2, kConv3, 3, 2, 1, rng);
  image_projection_ = nn::Linear(kConv3 * r8 * r8, d, rng);
  category_embedding_ = nn::Embedding(config_.category_count, d, rng);
  palette_projection_ = nn::Linear(config_.palette_features(), d, rng);
}

void ContextEncoders::validate(const ContextInput& input) const {
  for (int t : input.tokens) {
    if (t < 0 || t >= config_.vocab_size) {
      throw ValidationError("text: token id " + std::to_string(t) + " outside vocabulary of size " +
                            std::to_string(config_.vocab_size));
    }
  }
  if (input.category < 0 || input.category >= config_.category_count) {
    throw ValidationError("category: id " + std::to_string(input.category) + " out of range [0, " +
                          std::to_string(config_.category_count) + ")");
  }
  if (input.image.rows() != config_.image_resolution || input.image.cols() != config_.image_resolution) {
    throw ValidationError("image: expected " + std::to_string(config_.image_resolution) + "x" +
                          std::to_string(config_.image_resolution) + " grayscale, got " +
                          std::to_string(input.image.rows()) + "x" + std::to_string(input.image.cols()));
  }
}

ad::Var ContextEncoders::text(ad::Tape& tape, const std::vector<std::vector<int>>& tokens) const {
  std::vector<std::vector<int>> segments;
  Eigen::VectorXd present(static_cast<Eigen::Index>(tokens.size()));
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::vector<int> seg;
    for (int t : tokens[i]) {
      if (t < 0 || t >= config_.vocab_size) throw ValidationError("text: token id out of vocabulary");
      if (t != 0) seg.push_back(t);
    }
    present[i] = seg.empty() ? 0.0 : 1.0;
    segments.push_back(std::move(seg));
  }
  ad::Var pooled = ad::segment_mean(tape.parameter(token_embedding_.table), segments);
  return ad::mask_rows(ad::tanh(text_projection_(tape, pooled)), present);
}

ad::Var ContextEncoders::image(ad::Tape& tape, std::span<const GrayImage* const> images) const {
  const int r = config_.image_resolution;
  Eigen::MatrixXd batch(static_cast<Eigen::Index>(images.size()), static_cast<Eigen::Index>(r) * r);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const GrayImage& img = *images[i];
    if (img.rows() != r || img.cols() != r) {
      throw ValidationError("image: expected " + std::to_string(r) + "x" + std::to_string(r) + " grayscale");
    }
    batch.row(i) = Eigen::Map<const Eigen::RowVectorXd>(img.data(), img.size());
  }
  ad::Geometry g{1, r, r};
  ad::Var h = ad::leaky_relu(image_conv1_(tape, tape.constant(std::move(batch)), g));
  g = image_conv1_.output(g);
  h = ad::leaky_relu(image_conv2_(tape, h, g));
  g = image_conv2_.output(g);
  h = ad::leaky_relu(image_conv3_(tape, h, g));
  return ad::tanh(image_projection_(tape, h));
}

ad::Var ContextEncoders::category(ad::Tape& tape, std::span<const int> ids) const {
  for (int id : ids) {
    if (id < 0 || id >= config_.category_count) {
      throw ValidationError("category: id " + std::to_string(id) + " out of range");
    }
  }
  return ad::gather_rows(tape.parameter(category_embedding_.table), ids);
}

ad::Var ContextEncoders::palette(ad::Tape& tape, const Eigen::MatrixXd& features) const {
  if (features.cols() != config_.palette_features()) throw ValidationError("palette features: wrong width");
  return ad::tanh(palette_projection_(tape, tape.constant(features)));
}

ad::Var ContextEncoders::fused(ad::Tape& tape, const FusionWeights& weights,
                               std::span<const ContextInput* const> inputs,
                               const Eigen::MatrixXd& palette_features) const {
  std::vector<std::vector<int>> tokens;
  std::vector<const GrayImage*> images;
  std::vector<int> categories;
  for (const ContextInput* in : inputs) {
    tokens.push_back(in->tokens);
    images.push_back(&in->image);
    categories.push_back(in->category);
  }
  const ad::Var terms[] = {text(tape, tokens), image(tape, images), category(tape, categories)};
  const double w[] = {weights.text, weights.image, weights.category};
  const ad::Var parts[] = {ad::weighted_sum(terms, w), palette(tape, palette_features)};
  return ad::concat_cols(parts);
}

Eigen::VectorXd ContextEncoders::encode_text(std::span<const int> tokens) const {
  ad::Tape tape(ad::Tape::Mode::Inference);
  return text(tape, {std::vector<int>(tokens.begin(), tokens.end())}).value().row(0).transpose();
}

Eigen::VectorXd ContextEncoders::encode_image(const GrayImage& img) const {
  ad::Tape tape(ad::Tape::Mode::Inference);
  const GrayImage* ptr[] = {&img};
  return image(tape, ptr).value().row(0).transpose();
}

Eigen::VectorXd ContextEncoders::encode_category(int id) const {
  ad::Tape tape(ad::Tape::Mode::Inference);
  const int ids[] = {id};
  return category(tape, ids).value().row(0).transpose();
}

Eigen::VectorXd ContextEncoders::encode_palette(std::span<const Color> colors) const {
  ad::Tape tape(ad::Tape::Mode::Inference);
  return palette(tape, palette_features(colors, config_.palette_mode)).value().row(0).transpose();
}

void ContextEncoders::collect(const std::string& prefix, std::vector<ad::NamedParameter>& out) {
  token_embedding_.collect(prefix + ".text.embedding", out);
  text_projection_.collect(prefix + ".text.projection", out);
  image_conv1_.collect(prefix + ".image.conv1", out);
  image_conv2_.collect(prefix + ".image.conv2", out);
  image_conv3_.collect(prefix + ".image.conv3", out);
  image_projection_.collect(prefix + ".image.projection", out);
  category_embedding_.collect(prefix + ".category.embedding", out);
  palette_projection_.collect(prefix + ".palette.projection", out);
}

}  // namespace cys
