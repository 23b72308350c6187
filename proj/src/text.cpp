#include "cyscolor/text.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <cstdio>
#include <fstream>

#include "cyscolor/error.hpp"

namespace cys {

std::string clean_text(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
  icu::UnicodeString source = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString normalized = nfc->normalize(source, status);
  if (U_FAILURE(status)) throw ParseError("text is not valid UTF-8: " + std::string(text));
  normalized.toLower(icu::Locale::getRoot());

  icu::UnicodeString out;
  bool pending_space = false;
  for (int32_t i = 0; i < normalized.length();) {
    const UChar32 cp = normalized.char32At(i);
    i += U16_LENGTH(cp);
    if (u_ispunct(cp)) continue;
    if (u_isUWhiteSpace(cp)) {
      pending_space = !out.isEmpty();
      continue;
    }
    if (pending_space) out.append(UChar32(' '));
    pending_space = false;
    out.append(cp);
  }
  std::string result;
  out.toUTF8String(result);
  return result;
}

std::vector<std::string> clean_keywords(std::span<const std::string> keywords) {
  std::vector<std::string> out;
  for (const std::string& k : keywords) {
    std::string c = clean_text(k);
    if (!c.empty()) out.push_back(std::move(c));
  }
  return out;
}

std::vector<std::string> characters(std::string_view text) {
  icu::UnicodeString s = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  std::vector<std::string> out;
  for (int32_t i = 0; i < s.length();) {
    const UChar32 cp = s.char32At(i);
    i += U16_LENGTH(cp);
    if (u_isUWhiteSpace(cp)) continue;
    std::string utf8;
    icu::UnicodeString(cp).toUTF8String(utf8);
    out.push_back(std::move(utf8));
  }
  return out;
}

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> keyword_lists) {
  Vocabulary vocab;
  for (const auto& keywords : keyword_lists) {
    for (const std::string& k : keywords) {
      for (const std::string& ch : characters(clean_text(k))) vocab.add(ch);
    }
  }
  return vocab;
}

int Vocabulary::add(const std::string& token) {
  const auto [it, inserted] = ids_.emplace(token, static_cast<int>(tokens_.size()));
  if (inserted) tokens_.push_back(token);
  return it->second;
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const std::string& ch : characters(clean_text(text))) {
    const auto it = ids_.find(ch);
    ids.push_back(it == ids_.end() ? kUnk : it->second);
  }
  return ids;
}

std::vector<int> Vocabulary::encode_keywords(std::span<const std::string> keywords) const {
  std::vector<int> ids;
  for (const std::string& k : keywords) {
    const auto part = encode(k);
    ids.insert(ids.end(), part.begin(), part.end());
  }
  return ids;
}

nlohmann::json Vocabulary::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < tokens_.size(); ++i) j[tokens_[i]] = static_cast<int>(i);
  return j;
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("vocabulary must be a JSON object of token -> id");
  std::vector<std::string> tokens(j.size());
  for (const auto& [token, id] : j.items()) {
    if (!id.is_number_integer()) throw ParseError("vocabulary id for \"" + token + "\" is not an integer");
    const int v = id.get<int>();
    if (v < 0 || v >= static_cast<int>(tokens.size()) || !tokens[v].empty()) {
      throw ParseError("vocabulary ids must be a dense permutation of 0..n-1");
    }
    tokens[v] = token;
  }
  if (tokens.size() < 2 || tokens[kPad] != "<pad>" || tokens[kUnk] != "<unk>") {
    throw ParseError("vocabulary must reserve id 0 for <pad> and id 1 for <unk>");
  }
  Vocabulary vocab;
  for (std::size_t i = 2; i < tokens.size(); ++i) vocab.add(tokens[i]);
  return vocab;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open vocabulary file: " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("vocabulary " + path.string() + ": " + e.what());
  }
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write vocabulary file: " + path.string());
  out << to_json().dump(2) << '\n';
}

std::uint64_t Vocabulary::hash() const {
  std::string joined;
  for (const std::string& t : tokens_) {
    joined += t;
    joined.push_back('\0');
  }
  return fnv1a64(joined);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace cys
