#include "cyscolor/models.hpp"

namespace cys {

ContextInput make_context(const Vocabulary& vocab, const CategoryVocabulary& categories, int resolution,
                          std::string_view text, const std::string& category, const GrayImage& gray) {
  if (gray.size() == 0) throw ValidationError("image: empty image");
  ContextInput c;
  c.tokens = vocab.encode(text);
  c.category = categories.id(category);
  c.image = resize_bilinear(gray, resolution, resolution).cwiseMax(0.0).cwiseMin(1.0);
  return c;
}

ContextInput record_context(const DatasetRecord& record, const Vocabulary& vocab,
                            const CategoryVocabulary& categories, int resolution, const RgbImage& image) {
  ContextInput c;
  c.tokens = vocab.encode_keywords(record.keywords);
  c.category = categories.id(record.category);
  c.image = resize_bilinear(luminance(image), resolution, resolution).cwiseMax(0.0).cwiseMin(1.0);
  return c;
}

namespace {

void check_vocabularies(const EncoderConfig& enc, const Vocabulary& vocab, const CategoryVocabulary& categories) {
  if (enc.vocab_size != vocab.size()) {
    throw CheckpointError("encoder vocab_size " + std::to_string(enc.vocab_size) + " disagrees with vocabulary of " +
                          std::to_string(vocab.size()) + " tokens");
  }
  if (enc.category_count != categories.size()) {
    throw CheckpointError("encoder category_count " + std::to_string(enc.category_count) + " disagrees with " +
                          std::to_string(categories.size()) + " categories");
  }
}

template <typename Gan>
Checkpoint make_checkpoint(const std::string& kind, Gan& gan, const Vocabulary& vocab,
                           const CategoryVocabulary& categories) {
  check_vocabularies(gan.config().encoder, vocab, categories);
  Checkpoint ckpt;
  ckpt.kind = kind;
  ckpt.config = gan.config();
  ckpt.vocab = vocab;
  ckpt.categories = categories;
  ckpt.tensors = export_parameters(gan.named_parameters());
  return ckpt;
}

template <typename Model, typename Config>
Model load_model(const std::string& kind, const std::filesystem::path& path, const std::string& expected) {
  Checkpoint ckpt = read_checkpoint(path, expected);
  if (ckpt.kind != kind) throw CheckpointError(path.string() + " holds a " + ckpt.kind + " model, not " + kind);
  Config config;
  try {
    config = ckpt.config.get<Config>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint config unreadable: ") + e.what());
  }
  check_vocabularies(config.encoder, ckpt.vocab, ckpt.categories);
  Model model;
  model.gan = decltype(model.gan)(config);
  import_parameters(ckpt.tensors, model.gan.named_parameters());
  model.version = ckpt.model_version();
  model.vocab = std::move(ckpt.vocab);
  model.categories = std::move(ckpt.categories);
  return model;
}

}  // namespace

void PaletteModel::save(const std::filesystem::path& path) {
  const Checkpoint ckpt = make_checkpoint("palette", gan, vocab, categories);
  write_checkpoint(path, ckpt);
  version = ckpt.model_version();
}

PaletteModel PaletteModel::load(const std::filesystem::path& path, const std::string& expected_config_hash) {
  return load_model<PaletteModel, GanConfig>("palette", path, expected_config_hash);
}

void ColorizerModel::save(const std::filesystem::path& path) {
  const Checkpoint ckpt = make_checkpoint("colorizer", gan, vocab, categories);
  write_checkpoint(path, ckpt);
  version = ckpt.model_version();
}

ColorizerModel ColorizerModel::load(const std::filesystem::path& path, const std::string& expected_config_hash) {
  return load_model<ColorizerModel, ColorizerConfig>("colorizer", path, expected_config_hash);
}

}  // namespace cys
