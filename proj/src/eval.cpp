#include "cyscolor/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace cys {

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::Text: return "text";
    case Modality::Image: return "image";
    case Modality::Category: return "category";
  }
  return "?";
}

Modality parse_modality(std::string_view name) {
  if (name == "text") return Modality::Text;
  if (name == "image") return Modality::Image;
  if (name == "category") return Modality::Category;
  throw ValidationError("varied modality must be text, image or category, got \"" + std::string(name) + "\"");
}

std::size_t DiversityExperiment::variant_count() const {
  switch (varied) {
    case Modality::Text: return text_variants.size();
    case Modality::Image: return image_variants.size();
    case Modality::Category: return category_variants.size();
  }
  return 0;
}

DiversityResult run_diversity_grid(const DiversityExperiment& ex, const PaletteModel& model) {
  const std::size_t n = ex.variant_count();
  if (n == 0) throw ValidationError("diversity experiment has no variants");
  DiversityResult out;
  out.varied = ex.varied;
  out.baseline = model.gan.sample_palette(model.context(ex.text, ex.category, ex.image), ex.seed);
  for (std::size_t i = 0; i < n; ++i) {
    ContextInput ctx;
    switch (ex.varied) {
      case Modality::Text:
        ctx = model.context(ex.text_variants[i], ex.category, ex.image);
        out.labels.push_back(ex.text_variants[i]);
        break;
      case Modality::Image:
        ctx = model.context(ex.text, ex.category, ex.image_variants[i]);
        out.labels.push_back("image " + std::to_string(i));
        break;
      case Modality::Category:
        ctx = model.context(ex.text, ex.category_variants[i], ex.image);
        out.labels.push_back(ex.category_variants[i]);
        break;
    }
    out.palettes.push_back(model.gan.sample_palette(ctx, ex.seed));
    out.distance_to_baseline.push_back(palette_distance(out.palettes.back(), out.baseline));
  }
  if (n >= 2) {
    double sum = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j, ++pairs) sum += palette_distance(out.palettes[i], out.palettes[j]);
    }
    out.dispersion = sum / pairs;
  }
  return out;
}

nlohmann::json to_json(const DiversityResult& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < r.palettes.size(); ++i) {
    rows.push_back({{"label", r.labels[i]},
                    {"palette", r.palettes[i].to_hex()},
                    {"distance_to_baseline", r.distance_to_baseline[i]}});
  }
  return {{"varied", std::string(to_string(r.varied))},
          {"baseline", r.baseline.to_hex()},
          {"rows", rows},
          {"dispersion", r.dispersion ? nlohmann::json(*r.dispersion) : nlohmann::json(nullptr)}};
}

RgbImage render_swatch(const Palette& palette, int width, int height) {
  if (width < 5 || height < 1) throw ValidationError("swatch must be at least 5x1 pixels");
  const Palette rgb = palette.converted(ColorSpace::RGB);
  RgbImage img(height, width);
  for (int x = 0; x < width; ++x) {
    const Eigen::Vector3d c = rgb[static_cast<std::size_t>(x * 5 / width)].channels();
    for (int y = 0; y < height; ++y) img.set_pixel(y, x, c);
  }
  return img;
}

nlohmann::json AnswerKey::to_json() const { return {{"ours_side", ours_side}}; }

AnswerKey AnswerKey::from_json(const nlohmann::json& j) {
  AnswerKey key;
  key.ours_side = j.at("ours_side").get<std::map<std::string, std::string>>();
  for (const auto& [id, side] : key.ours_side) {
    if (side != "A" && side != "B") throw ParseError("answer key side for " + id + " must be A or B");
  }
  return key;
}

AnswerKey AnswerKey::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open answer key: " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("answer key " + path.string() + ": " + e.what());
  }
}

namespace {

nlohmann::json export_side(const StudyArtifact& art, const std::filesystem::path& dir, const std::string& stem) {
  nlohmann::json side = {{"keyword", art.keyword}};
  if (art.palette) {
    side["palette"] = art.palette->to_hex();
    write_png(dir / (stem + "_palette.png"), render_swatch(*art.palette));
    side["palette_png"] = stem + "_palette.png";
  }
  if (art.image) {
    write_png(dir / (stem + "_image.png"), *art.image);
    side["image_png"] = stem + "_image.png";
  }
  return side;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

AnswerKey build_preference_study(std::span<const StudyArtifact> ours, std::span<const StudyArtifact> baseline,
                                 const std::filesystem::path& bundle_dir,
                                 const std::filesystem::path& answer_key_path, std::uint64_t seed) {
  if (ours.size() != baseline.size()) {
    throw ValidationError("preference study needs equal list lengths, got " + std::to_string(ours.size()) + " and " +
                          std::to_string(baseline.size()));
  }
  for (std::size_t i = 0; i < ours.size(); ++i) {
    if (ours[i].keyword != baseline[i].keyword) {
      throw ValidationError("pair " + std::to_string(i) + " keywords differ: \"" + ours[i].keyword + "\" vs \"" +
                            baseline[i].keyword + "\"");
    }
    if (!ours[i].palette && !ours[i].image) throw ValidationError("artifact " + std::to_string(i) + " is empty");
  }
  std::filesystem::create_directories(bundle_dir);
  std::vector<std::size_t> order(ours.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::bernoulli_distribution coin(0.5);

  AnswerKey key;
  nlohmann::json pairs = nlohmann::json::array();
  for (std::size_t k = 0; k < order.size(); ++k) {
    char id[32];
    std::snprintf(id, sizeof id, "pair_%03zu", k);
    const bool ours_first = coin(rng);
    const StudyArtifact& a = ours_first ? ours[order[k]] : baseline[order[k]];
    const StudyArtifact& b = ours_first ? baseline[order[k]] : ours[order[k]];
    pairs.push_back({{"pair_id", id},
                     {"keyword", a.keyword},
                     {"A", export_side(a, bundle_dir, std::string(id) + "_A")},
                     {"B", export_side(b, bundle_dir, std::string(id) + "_B")}});
    key.ours_side[id] = ours_first ? "A" : "B";
  }
  write_json(bundle_dir / "manifest.json",
             {{"question", "Which side is more in the target cultural style?"}, {"pairs", pairs}});
  if (answer_key_path.has_parent_path()) std::filesystem::create_directories(answer_key_path.parent_path());
  write_json(answer_key_path, key.to_json());
  return key;
}

PreferenceTally tally_counts(int ours, int votes) {
  if (votes < 0 || ours < 0 || ours > votes) throw ValidationError("vote counts out of range");
  PreferenceTally t;
  t.votes = votes;
  t.ours = ours;
  t.fraction = votes == 0 ? 0.0 : static_cast<double>(ours) / votes;
  t.p_value = votes == 0 ? 1.0 : binomial_two_sided_p(ours, votes, 0.5);
  return t;
}

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

PreferenceTally tally_preferences(const AnswerKey& key, std::istream& csv) {
  std::string line;
  int line_no = 0, ours = 0, votes = 0;
  std::map<std::string, int> per_rater;
  while (std::getline(csv, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(trim(f));
    if (fields.size() != 3) throw ParseError("votes line " + std::to_string(line_no) + ": expected pair_id,rater_id,choice");
    if (line_no == 1 && fields[0] == "pair_id") continue;
    const auto it = key.ours_side.find(fields[0]);
    if (it == key.ours_side.end()) throw ValidationError("votes line " + std::to_string(line_no) + ": unknown pair " + fields[0]);
    std::string choice = fields[2];
    std::transform(choice.begin(), choice.end(), choice.begin(), [](unsigned char c) { return std::toupper(c); });
    if (choice != "A" && choice != "B") {
      throw ValidationError("votes line " + std::to_string(line_no) + ": choice must be A or B");
    }
    ++votes;
    ++per_rater[fields[1]];
    if (choice == it->second) ++ours;
  }
  PreferenceTally t = tally_counts(ours, votes);
  t.votes_per_rater = std::move(per_rater);
  return t;
}

nlohmann::json to_json(const PreferenceTally& t) {
  return {{"votes", t.votes},
          {"ours", t.ours},
          {"baseline", t.votes - t.ours},
          {"fraction", t.fraction},
          {"p_value", t.p_value},
          {"votes_per_rater", t.votes_per_rater}};
}

namespace {

const char* source_name(StatsSource s) { return s == StatsSource::Palette ? "palette" : "image"; }

nlohmann::json stats_json(const HslStats& s) {
  return {{"hue_std", s.hue_std}, {"lightness_mean", s.lightness_mean}, {"saturation_mean", s.saturation_mean}};
}

HslStats stats_from_json(const nlohmann::json& j) {
  HslStats s;
  s.hue_std = j.at("hue_std").get<std::vector<double>>();
  s.lightness_mean = j.at("lightness_mean").get<std::vector<double>>();
  s.saturation_mean = j.at("saturation_mean").get<std::vector<double>>();
  return s;
}

std::vector<DatasetRecord> subsample(const std::vector<DatasetRecord>& corpus, std::optional<std::size_t> n,
                                     std::mt19937_64& rng) {
  if (!n || corpus.size() <= *n) return corpus;
  std::vector<std::size_t> idx(corpus.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(*n);
  std::sort(idx.begin(), idx.end());
  std::vector<DatasetRecord> out;
  for (std::size_t i : idx) out.push_back(corpus[i]);
  return out;
}

}  // namespace

nlohmann::json CorpusReport::to_json() const {
  nlohmann::json tests_json = nlohmann::json::object();
  for (const auto& t : tests) tests_json[t.statistic] = {{"t", t.result.t}, {"df", t.result.df}, {"p", t.result.p}};
  return {{"source", source_name(source)},
          {"n", {{"a", n_a}, {"b", n_b}}},
          {"a", stats_json(a)},
          {"b", stats_json(b)},
          {"tests", tests_json}};
}

CorpusReport CorpusReport::from_json(const nlohmann::json& j) {
  CorpusReport r;
  const std::string source = j.at("source").get<std::string>();
  if (source != "palette" && source != "image") throw ParseError("report source must be palette or image");
  r.source = source == "palette" ? StatsSource::Palette : StatsSource::Image;
  r.n_a = j.at("n").at("a").get<std::size_t>();
  r.n_b = j.at("n").at("b").get<std::size_t>();
  r.a = stats_from_json(j.at("a"));
  r.b = stats_from_json(j.at("b"));
  for (const char* name : {"hue_std", "lightness_mean", "saturation_mean"}) {
    const auto& t = j.at("tests").at(name);
    r.tests.push_back({name, {t.at("t").get<double>(), t.at("df").get<double>(), t.at("p").get<double>()}});
  }
  return r;
}

void CorpusReport::write_csv(std::ostream& out) const {
  out << "corpus,index,hue_std,lightness_mean,saturation_mean\n";
  const auto rows = [&](const char* name, const HslStats& s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s,%zu,%.17g,%.17g,%.17g\n", name, i, s.hue_std[i], s.lightness_mean[i],
                    s.saturation_mean[i]);
      out << buf;
    }
  };
  rows("a", a);
  rows("b", b);
}

CorpusReport corpus_comparison_report(const std::vector<DatasetRecord>& corpus_a,
                                      const std::vector<DatasetRecord>& corpus_b, const CorpusReportOptions& options,
                                      const ImageLoader& loader) {
  if (corpus_a.empty() || corpus_b.empty()) throw ValidationError("corpus comparison needs two non-empty corpora");
  std::mt19937_64 rng(options.seed);
  const auto a = subsample(corpus_a, options.sample_size, rng);
  const auto b = subsample(corpus_b, options.sample_size, rng);
  CorpusReport r;
  r.source = options.source;
  r.n_a = a.size();
  r.n_b = b.size();
  r.a = compute_hsl_stats(a, options.source, loader);
  r.b = compute_hsl_stats(b, options.source, loader);
  r.tests.push_back({"hue_std", welch_t_test(r.a.hue_std, r.b.hue_std)});
  r.tests.push_back({"lightness_mean", welch_t_test(r.a.lightness_mean, r.b.lightness_mean)});
  r.tests.push_back({"saturation_mean", welch_t_test(r.a.saturation_mean, r.b.saturation_mean)});
  return r;
}

}  // namespace cys
