#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include <json.hpp>

#include "cyscolor/color.hpp"
#include "cyscolor/image.hpp"
#include "cyscolor/nn.hpp"

namespace cys {

/// Per-modality weights of the context sum c1 = λ_text E_text + λ_image E_image + λ_category E_category.
struct FusionWeights {
  double text = 0.5;
  double image = 0.4;
  double category = 0.1;

  static constexpr FusionWeights palette_defaults() { return {0.5, 0.4, 0.1}; }
  static constexpr FusionWeights colorizer_defaults() { return {0.3, 0.6, 0.1}; }

  void validate() const;
  friend bool operator==(const FusionWeights&, const FusionWeights&) = default;
};

void to_json(nlohmann::json& j, const FusionWeights& w);
void from_json(const nlohmann::json& j, FusionWeights& w);

/// Raw multi-modal condition.
struct ContextInput {
  std::vector<int> tokens;  ///< character ids; 0 = PAD is skipped, 1 = UNK
  GrayImage image;          ///< Lab L / 100 at the encoder resolution
  int category = 0;
};

struct FusedContext {
  Eigen::VectorXd c1;  ///< weighted modality sum, dimension d
  Eigen::VectorXd c2;  ///< palette encoding, dimension d
  Eigen::VectorXd y;   ///< concatenation [c1; c2], dimension 2d
};

/// Weighted modality sum followed by concatenation with the palette encoding.
/// Throws ValidationError on dimension mismatch.
template <typename TextT, typename ImageT, typename CategoryT, typename PaletteT>
FusedContext fuse(const FusionWeights& weights, const Eigen::MatrixBase<TextT>& e_text,
                  const Eigen::MatrixBase<ImageT>& e_image, const Eigen::MatrixBase<CategoryT>& e_category,
                  const Eigen::MatrixBase<PaletteT>& c2) {
  const Eigen::Index d = e_text.size();
  if (e_image.size() != d || e_category.size() != d || c2.size() != d) {
    throw ValidationError("fuse: encoder outputs must share dimension " + std::to_string(d));
  }
  FusedContext out;
  out.c1 = weights.text * e_text.derived() + weights.image * e_image.derived() +
           weights.category * e_category.derived();
  out.c2 = c2;
  out.y.resize(2 * d);
  out.y << out.c1, out.c2;
  return out;
}

/// How the palette encoder sees its input.
enum class PaletteInputMode {
  Prefix,  ///< 0..4 colors, zero padded to 4 slots plus a presence mask
  Full,    ///< exactly 5 colors, no mask
};

struct EncoderConfig {
  int dim = 128;
  int image_resolution = 64;
  int vocab_size = 2;
  int category_count = 1;
  PaletteInputMode palette_mode = PaletteInputMode::Prefix;

  void validate() const;
  int palette_features() const { return palette_mode == PaletteInputMode::Prefix ? 16 : 15; }
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

inline constexpr std::size_t kMaxPrefix = 4;

/// Flattened palette-encoder input for one sample.
Eigen::RowVectorXd palette_features(std::span<const Color> colors, PaletteInputMode mode);

/// E_text, E_image, E_category and E_palette.
///
/// E_text: embedding lookup, mean over tokens, tanh projection; empty input maps to 0.
/// E_image: three stride-2 3x3 convolutions, flatten, tanh projection.
/// E_category: embedding lookup.
/// E_palette: tanh projection of palette_features().
class ContextEncoders {
 public:
  ContextEncoders() = default;
  ContextEncoders(const EncoderConfig& config, Rng& rng);

  const EncoderConfig& config() const { return config_; }

  Eigen::VectorXd encode_text(std::span<const int> tokens) const;
  Eigen::VectorXd encode_image(const GrayImage& image) const;
  Eigen::VectorXd encode_category(int id) const;
  Eigen::VectorXd encode_palette(std::span<const Color> colors) const;

  /// Throws ValidationError if ids, category or image resolution are out of contract.
  void validate(const ContextInput& input) const;

  // Batched graph versions used in training. One row per sample.
  ad::Var text(ad::Tape& tape, const std::vector<std::vector<int>>& tokens) const;
  ad::Var image(ad::Tape& tape, std::span<const GrayImage* const> images) const;
  ad::Var category(ad::Tape& tape, std::span<const int> ids) const;
  ad::Var palette(ad::Tape& tape, const Eigen::MatrixXd& features) const;

  /// y = [Σ λ_c E_c ; E_palette] for a batch.
  ad::Var fused(ad::Tape& tape, const FusionWeights& weights, std::span<const ContextInput* const> inputs,
                const Eigen::MatrixXd& palette_features) const;

  void collect(const std::string& prefix, std::vector<ad::NamedParameter>& out);

 private:
  EncoderConfig config_;
  nn::Embedding token_embedding_;
  nn::Linear text_projection_;
  nn::Conv2d image_conv1_, image_conv2_, image_conv3_;
  nn::Linear image_projection_;
  nn::Embedding category_embedding_;
  nn::Linear palette_projection_;
};

}  // namespace cys
