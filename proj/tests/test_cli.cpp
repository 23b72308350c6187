#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cyscolor/cli.hpp"
#include "cyscolor/eval.hpp"
#include "cyscolor/image.hpp"
#include "cyscolor/service.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cys_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cys::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path temp_dir(const std::string& tag) {
  std::random_device rd;
  auto dir = fs::temp_directory_path() / ("cys-cli-" + tag + "-" + std::to_string(rd()));
  fs::create_directories(dir);
  return dir;
}

// Six horizontal bands in well separated colors, shifted darker or lighter.
void write_banded(const fs::path& path, bool bright, int variant) {
  const std::vector<cys::Color> dark = {cys::from_hex("#200010"), cys::from_hex("#402060"), cys::from_hex("#103040"),
                                        cys::from_hex("#602000"), cys::from_hex("#004020"), cys::from_hex("#505050")};
  const std::vector<cys::Color> light = {cys::from_hex("#FFE0A0"), cys::from_hex("#A0E0FF"), cys::from_hex("#FFA0C0"),
                                         cys::from_hex("#C0FFA0"), cys::from_hex("#F0F0F0"), cys::from_hex("#FFC040")};
  const auto& colors = bright ? light : dark;
  cys::RgbImage img(24, 24);
  for (int y = 0; y < 24; ++y) {
    const auto& c = colors[(y / 4 + variant) % 6];
    for (int x = 0; x < 24; ++x) img.set_pixel(y, x, c.channels());
  }
  cys::write_png(path, img);
}

nlohmann::json last_json_line(const std::string& s) {
  std::istringstream in(s);
  std::string line, last;
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  return nlohmann::json::parse(last);
}

}  // namespace

TEST_CASE("usage errors exit 2 with a structured message") {
  const auto none = cys_run({});
  CHECK(none.code == cys::kExitUsage);
  CHECK(last_json_line(none.err.substr(0, none.err.find('\n')))["error"]["kind"] == "usage");

  CHECK(cys_run({"frobnicate"}).code == cys::kExitUsage);
  CHECK(cys_run({"generate", "--bogus"}).code == cys::kExitUsage);
  CHECK(cys_run({"dataset-build", "--images", "/definitely/not/here", "--out", "x.jsonl"}).code == cys::kExitUsage);
  CHECK(cys_run({"evaluate"}).code == cys::kExitUsage);
  CHECK(cys_run({"dataset-stats", "--a", "x"}).code == cys::kExitUsage);

  const auto help = cys_run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("dataset-build") != std::string::npos);
  CHECK(help.out.find("serve") != std::string::npos);
}

TEST_CASE("empty image directory fails with exit 1") {
  const auto dir = temp_dir("empty");
  const auto r = cys_run({"dataset-build", "--images", dir.string(), "--out", (dir / "ds.jsonl").string()});
  CHECK(r.code == cys::kExitFailure);
  const auto j = nlohmann::json::parse(r.err.substr(0, r.err.find('\n')));
  CHECK(j["error"]["kind"] == "validation");
  CHECK(j["error"]["message"].get<std::string>().find("no images found") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "ds.jsonl"));
}

TEST_CASE("end-to-end pipeline through the command line") {
  const auto root = temp_dir("pipe");
  const auto images = root / "images";
  fs::create_directories(images / "metal");
  fs::create_directories(images / "pop");
  for (int i = 0; i < 4; ++i) {
    write_banded(images / "metal" / ("dark_night_" + std::to_string(i) + ".png"), false, i);
    write_banded(images / "pop" / ("bright_day_" + std::to_string(i) + ".png"), true, i);
  }
  // A sidecar overrides filename keywords; an unknown category is skipped with a warning.
  { std::ofstream(images / "pop" / "bright_day_0.txt") << "Sunny, Summer Sky\n"; }
  fs::create_directories(images / "polka");
  write_banded(images / "polka" / "odd.png", true, 0);

  const auto ds = root / "data" / "ds.jsonl";
  auto build = cys_run({"--seed", "3", "--json", "dataset-build", "--images", images.string(), "--out", ds.string(),
                        "--candidates-out", (root / "cand.json").string()});
  REQUIRE_MESSAGE(build.code == 0, build.err);
  const auto summary = last_json_line(build.out);
  CHECK(summary["records"] == 8);
  CHECK(summary["skipped"] == 1);
  CHECK(build.err.find("polka") != std::string::npos);
  {
    std::ifstream in(ds);
    std::vector<nlohmann::json> rows;
    for (std::string line; std::getline(in, line);) rows.push_back(nlohmann::json::parse(line));
    REQUIRE(rows.size() == 8);
    for (const auto& r : rows) {
      CHECK(r["palette"].size() == 5);
      CHECK(fs::exists(ds.parent_path() / r["image"].get<std::string>()));
    }
    bool saw_sidecar = false;
    for (const auto& r : rows) {
      if (r["keywords"] == nlohmann::json({"sunny", "summer sky"})) saw_sidecar = true;
    }
    CHECK(saw_sidecar);
  }
  std::ifstream cand_in(root / "cand.json");
  const auto cand = nlohmann::json::parse(cand_in);
  CHECK(cand.size() == 8);
  CHECK(cand["metal/dark_night_0.png"]["candidates"].size() == 10);

  // Same corpus on both sides: no difference.
  auto stats = cys_run({"--json", "dataset-stats", "--a", ds.string(), "--b", ds.string(), "--csv",
                        (root / "stats.csv").string()});
  REQUIRE_MESSAGE(stats.code == 0, stats.err);
  const auto report = last_json_line(stats.out);
  CHECK(report["n"]["a"] == 8);
  CHECK(report["tests"]["lightness_mean"]["t"] == doctest::Approx(0.0));
  CHECK(report["tests"]["lightness_mean"]["p"] == doctest::Approx(1.0));
  auto image_stats = cys_run({"--json", "dataset-stats", "--a", ds.string(), "--b", ds.string(), "--source", "image"});
  CHECK(image_stats.code == 0);
  CHECK(last_json_line(image_stats.out)["source"] == "image");

  const auto pal = root / "models" / "palette.ckpt";
  auto tp = cys_run({"--seed", "1", "--json", "train-palette", "--data", ds.string(), "--out", pal.string(),
                     "--steps", "40", "--dim", "8", "--hidden", "16", "--noise-dim", "4", "--image-resolution", "8",
                     "--batch-size", "4", "--log", (root / "train.jsonl").string()});
  REQUIRE_MESSAGE(tp.code == 0, tp.err);
  const auto tp_json = last_json_line(tp.out);
  CHECK(fs::exists(pal));
  CHECK(tp_json["steps"] == 40);
  CHECK_FALSE(tp_json["version"].get<std::string>().empty());
  {
    std::ifstream log(root / "train.jsonl");
    int lines = 0;
    for (std::string line; std::getline(log, line); ++lines) {
      const auto j = nlohmann::json::parse(line);
      CHECK(j.contains("L_D"));
      CHECK(j.contains("L_G"));
    }
    CHECK(lines == 40);
  }

  const auto probe = images / "metal" / "dark_night_1.png";
  const std::vector<std::string> gen = {"--seed", "5", "--json", "generate", "--model", pal.string(), "--text",
                                        "dark night", "--category", "metal", "--image", probe.string()};
  const auto g1 = cys_run(gen);
  const auto g2 = cys_run(gen);
  REQUIRE_MESSAGE(g1.code == 0, g1.err);
  CHECK(g1.out == g2.out);
  CHECK(last_json_line(g1.out)["palette"].size() == 5);
  auto plain = cys_run({"generate", "--model", pal.string(), "--text", "x", "--category", "pop", "--image",
                        probe.string()});
  CHECK(plain.code == 0);
  CHECK(std::count(plain.out.begin(), plain.out.end(), '\n') == 5);
  auto bad_category = cys_run({"generate", "--model", pal.string(), "--text", "x", "--category", "polka", "--image",
                               probe.string()});
  CHECK(bad_category.code == cys::kExitFailure);
  auto no_model = cys_run({"generate", "--text", "x", "--category", "pop", "--image", probe.string()});
  CHECK(no_model.code == cys::kExitUsage);

  // Model path from a service config.
  {
    std::ofstream cfg(root / "cys.json");
    cfg << nlohmann::json({{"palette_model", "models/palette.ckpt"}}).dump();
  }
  auto via_config = cys_run({"--seed", "5", "--json", "--config", (root / "cys.json").string(), "generate", "--text",
                             "dark night", "--category", "metal", "--image", probe.string()});
  CHECK(via_config.code == 0);
  CHECK(via_config.out == g1.out);

  const auto colz = root / "models" / "colorizer.ckpt";
  auto tc = cys_run({"--seed", "1", "--json", "train-colorizer", "--data", ds.string(), "--out", colz.string(),
                     "--steps", "4", "--dim", "8", "--hidden", "8", "--image-resolution", "8", "--resolution", "16",
                     "--batch-size", "2"});
  REQUIRE_MESSAGE(tc.code == 0, tc.err);

  const auto out_png = root / "out.png";
  auto col = cys_run({"--json", "colorize", "--model", colz.string(), "--image", probe.string(), "--palette",
                      "#FF0000,#00FF00,#0000FF,#FFFF00,#00FFFF", "--out", out_png.string()});
  REQUIRE_MESSAGE(col.code == 0, col.err);
  const auto col_json = last_json_line(col.out);
  CHECK(col_json["width"] == 24);
  CHECK(col_json["height"] == 24);
  const auto bytes = cys::read_file_bytes(out_png);
  REQUIRE(bytes.size() > 24);
  CHECK(bytes[24] == 16);
  const auto lin = cys::luminance(cys::read_image(probe));
  const auto lout = cys::luminance(cys::read_image(out_png));
  CHECK((lin - lout).abs().maxCoeff() < 2e-3);
  auto bad_palette = cys_run({"colorize", "--model", colz.string(), "--image", probe.string(), "--palette",
                              "#FF0000,#00FF00", "--out", out_png.string()});
  CHECK(bad_palette.code == cys::kExitFailure);

  // Wrong checkpoint kind is rejected.
  auto swapped = cys_run({"generate", "--model", colz.string(), "--text", "x", "--category", "pop", "--image",
                          probe.string()});
  CHECK(swapped.code == cys::kExitFailure);
  CHECK(swapped.err.find("checkpoint") != std::string::npos);

  auto div = cys_run({"--json", "evaluate", "diversity", "--model", pal.string(), "--varied", "text", "--text",
                      "dark night", "--category", "metal", "--image", probe.string(), "--variant", "dark night",
                      "--variant", "dark night"});
  REQUIRE_MESSAGE(div.code == 0, div.err);
  CHECK(last_json_line(div.out)["dispersion"] == 0.0);
  auto div_cat = cys_run({"--json", "evaluate", "diversity", "--model", pal.string(), "--varied", "category",
                          "--text", "dark night", "--category", "metal", "--image", probe.string(), "--variant",
                          "metal", "--variant", "pop", "--variant", "jazz"});
  REQUIRE(div_cat.code == 0);
  CHECK(last_json_line(div_cat.out)["rows"].size() == 3);

  // Preference study: build, vote for our side every time, tally.
  {
    std::ofstream ours(root / "ours.jsonl"), base(root / "base.jsonl");
    for (int i = 0; i < 6; ++i) {
      ours << nlohmann::json({{"keyword", "k" + std::to_string(i)},
                              {"palette", {"#FF0000", "#00FF00", "#0000FF", "#FFFF00", "#00FFFF"}}})
                  .dump()
           << '\n';
      base << nlohmann::json({{"keyword", "k" + std::to_string(i)},
                              {"palette", {"#111111", "#222222", "#333333", "#444444", "#555555"}}})
                  .dump()
           << '\n';
    }
  }
  const auto key = root / "private" / "key.json";
  auto study = cys_run({"--json", "evaluate", "study", "--ours", (root / "ours.jsonl").string(), "--baseline",
                        (root / "base.jsonl").string(), "--bundle", (root / "bundle").string(), "--key",
                        key.string()});
  REQUIRE_MESSAGE(study.code == 0, study.err);
  CHECK(last_json_line(study.out)["pairs"] == 6);
  CHECK(fs::exists(root / "bundle" / "manifest.json"));
  const auto answer = cys::AnswerKey::load(key);
  {
    std::ofstream votes(root / "votes.csv");
    votes << "pair_id,rater_id,choice\n";
    for (const auto& [pair, side] : answer.ours_side) {
      for (int r = 0; r < 2; ++r) votes << pair << ",r" << r << "," << side << '\n';
    }
  }
  auto tally = cys_run({"--json", "evaluate", "tally", "--key", key.string(), "--votes",
                        (root / "votes.csv").string()});
  REQUIRE_MESSAGE(tally.code == 0, tally.err);
  const auto t = last_json_line(tally.out);
  CHECK(t["votes"] == 12);
  CHECK(t["ours"] == 12);
  CHECK(t["fraction"] == 1.0);
  CHECK(t["p_value"].get<double>() == doctest::Approx(2.0 / 4096.0));
}
