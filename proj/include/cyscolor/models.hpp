#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "cyscolor/checkpoint.hpp"
#include "cyscolor/colorizer.hpp"
#include "cyscolor/dataset.hpp"
#include "cyscolor/palette_gan.hpp"
#include "cyscolor/text.hpp"

namespace cys {

/// Builds an encoder input from raw text, a category name and a grayscale
/// plane of any size (resized bilinearly to `resolution`).
ContextInput make_context(const Vocabulary& vocab, const CategoryVocabulary& categories, int resolution,
                          std::string_view text, const std::string& category, const GrayImage& gray);

/// Same, from a dataset record's keywords and its decoded image.
ContextInput record_context(const DatasetRecord& record, const Vocabulary& vocab,
                            const CategoryVocabulary& categories, int resolution, const RgbImage& image);

struct PaletteModel {
  PaletteGan gan;
  Vocabulary vocab;
  CategoryVocabulary categories;
  std::string version;

  ContextInput context(std::string_view text, const std::string& category, const GrayImage& gray) const {
    return make_context(vocab, categories, gan.config().encoder.image_resolution, text, category, gray);
  }
  /// Writes the checkpoint and records the resulting version.
  void save(const std::filesystem::path& path);
  static PaletteModel load(const std::filesystem::path& path, const std::string& expected_config_hash = {});
};

struct ColorizerModel {
  ColorizerGan gan;
  Vocabulary vocab;
  CategoryVocabulary categories;
  std::string version;

  ContextInput context(std::string_view text, const std::string& category, const GrayImage& gray) const {
    return make_context(vocab, categories, gan.config().encoder.image_resolution, text, category, gray);
  }
  void save(const std::filesystem::path& path);
  static ColorizerModel load(const std::filesystem::path& path, const std::string& expected_config_hash = {});
};

}  // namespace cys
