#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cyscolor/checkpoint.hpp"
#include "support/toy_models.hpp"

using namespace cys;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("cys_ckpt_" + std::to_string(::getpid()) + "_" + std::to_string(rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

}  // namespace

TEST_CASE("palette model round trips bit-for-bit") {
  TempDir dir;
  auto model = toy::palette_model(20);
  const auto path = dir.path / "palette.ckpt";
  model.save(path);
  CHECK_FALSE(model.version.empty());
  const auto loaded = PaletteModel::load(path);
  CHECK(loaded.version == model.version);
  CHECK(loaded.vocab.hash() == model.vocab.hash());
  CHECK(loaded.categories.names() == model.categories.names());
  const ContextInput ctx = model.context("dark night", "metal", GrayImage::Constant(20, 20, 0.2));
  for (std::uint64_t s = 0; s < 5; ++s) CHECK(loaded.gan.sample_palette(ctx, s) == model.gan.sample_palette(ctx, s));
  CHECK_FALSE(fs::exists(path.string() + ".tmp"));
}

TEST_CASE("colorizer model round trips") {
  TempDir dir;
  auto model = toy::colorizer_model(2);
  const auto path = dir.path / "colorizer.ckpt";
  model.save(path);
  const auto loaded = ColorizerModel::load(path);
  const GrayImage g = GrayImage::Constant(16, 16, 0.4);
  const ContextInput ctx = model.context("bright day", "pop", g);
  const auto a = model.gan.colorize({g, toy::red_palette(), ctx}, 1);
  const auto b = loaded.gan.colorize({g, toy::red_palette(), ctx}, 1);
  for (int c = 0; c < 3; ++c) CHECK((a.rgb.channels[c] == b.rgb.channels[c]).all());
  CHECK_THROWS_AS(PaletteModel::load(path), CheckpointError);
}

TEST_CASE("loading refuses tampered or mismatched checkpoints") {
  TempDir dir;
  auto model = toy::palette_model(0);
  const auto path = dir.path / "p.ckpt";
  model.save(path);
  const std::string bytes = slurp(path);

  SUBCASE("bad magic") {
    std::string b = bytes;
    b[0] = 'X';
    spit(dir.path / "bad.ckpt", b);
    CHECK_THROWS_WITH_AS(PaletteModel::load(dir.path / "bad.ckpt"), doctest::Contains("magic"), CheckpointError);
  }
  SUBCASE("edited config") {
    std::string b = bytes;
    const auto pos = b.find("\"alpha\":0.5");
    REQUIRE(pos != std::string::npos);
    b.replace(pos, 11, "\"alpha\":0.6");
    spit(dir.path / "cfg.ckpt", b);
    CHECK_THROWS_WITH_AS(PaletteModel::load(dir.path / "cfg.ckpt"), doctest::Contains("config hash"), CheckpointError);
  }
  SUBCASE("flipped weight byte") {
    std::string b = bytes;
    b[b.size() - 3] ^= 0x5A;
    spit(dir.path / "w.ckpt", b);
    CHECK_THROWS_AS(PaletteModel::load(dir.path / "w.ckpt"), CheckpointError);
  }
  SUBCASE("truncated") {
    spit(dir.path / "t.ckpt", bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(PaletteModel::load(dir.path / "t.ckpt"), CheckpointError);
  }
  SUBCASE("expected config hash") {
    const Checkpoint ck = read_checkpoint(path);
    CHECK_NOTHROW(PaletteModel::load(path, ck.config_hash()));
    CHECK_THROWS_AS(PaletteModel::load(path, "0000000000000000"), CheckpointError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(PaletteModel::load(dir.path / "nope.ckpt"), CheckpointError); }
}

TEST_CASE("vocabulary size must agree with the encoder") {
  TempDir dir;
  auto model = toy::palette_model(0);
  model.vocab.add("z");
  CHECK_THROWS_AS(model.save(dir.path / "x.ckpt"), CheckpointError);
}

TEST_CASE("parameter import checks names and shapes") {
  auto model = toy::palette_model(0);
  const auto params = model.gan.named_parameters();
  auto tensors = export_parameters(params);
  CHECK_NOTHROW(import_parameters(tensors, params));
  auto wrong = tensors;
  wrong.begin()->second.resize(1, 1);
  CHECK_THROWS_AS(import_parameters(wrong, params), CheckpointError);
  auto missing = tensors;
  missing.erase(missing.begin());
  CHECK_THROWS_AS(import_parameters(missing, params), CheckpointError);
}
