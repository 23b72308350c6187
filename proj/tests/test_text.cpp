#include <doctest.h>

#include <filesystem>

#include "cyscolor/text.hpp"

using namespace cys;

TEST_CASE("clean_text") {
  CHECK(clean_text("  Hello,   World!  ") == "hello world");
  CHECK(clean_text("\xe6\x9c\x8b\xe5\x85\x8b\xef\xbc\x81") == "\xe6\x9c\x8b\xe5\x85\x8b");  // 朋克！
  // NFD "e" + combining acute normalizes to the precomposed form.
  CHECK(clean_text("Cafe\xcc\x81") == "caf\xc3\xa9");
  CHECK(clean_text("!!!") == "");
}

TEST_CASE("character vocabulary") {
  const std::vector<std::vector<std::string>> lists = {{"ab"}, {"ba c"}};
  const Vocabulary v = Vocabulary::build(lists);
  CHECK(v.size() == 5);
  CHECK(v.token(Vocabulary::kPad) != v.token(Vocabulary::kUnk));
  const auto ids = v.encode("abc");
  CHECK(ids == std::vector<int>{2, 3, 4});
  CHECK(v.encode("az")[1] == Vocabulary::kUnk);
  CHECK(characters("\xe6\x9c\x8b \xe5\x85\x8b").size() == 2);

  const Vocabulary round = Vocabulary::from_json(v.to_json());
  CHECK(round.hash() == v.hash());
  CHECK(round.encode("cab") == v.encode("cab"));

  const auto path = std::filesystem::temp_directory_path() / "cys_vocab_test.json";
  v.save(path);
  CHECK(Vocabulary::load(path).hash() == v.hash());
  std::filesystem::remove(path);
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}
