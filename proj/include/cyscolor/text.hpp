#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace cys {

/// NFC normalization, lowercasing and punctuation stripping. Leading and
/// trailing whitespace is trimmed; inner whitespace collapses to one space.
std::string clean_text(std::string_view text);

/// Cleans every keyword and drops the ones that end up empty.
std::vector<std::string> clean_keywords(std::span<const std::string> keywords);

/// Splits UTF-8 text into code points (as UTF-8 strings), skipping whitespace.
std::vector<std::string> characters(std::string_view text);

/// Character-level token vocabulary. Ids 0 and 1 are reserved for PAD and UNK.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocabulary();

  /// Builds a vocabulary over the characters of cleaned keywords, in order of
  /// first appearance.
  static Vocabulary build(std::span<const std::vector<std::string>> keyword_lists);

  int add(const std::string& token);
  /// Closed-vocabulary lookup: unknown characters map to UNK.
  std::vector<int> encode(std::string_view text) const;
  std::vector<int> encode_keywords(std::span<const std::string> keywords) const;

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const { return tokens_.at(id); }

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Stable 64-bit digest of the token table.
  std::uint64_t hash() const;

 private:
  std::map<std::string, int> ids_;
  std::vector<std::string> tokens_;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace cys
