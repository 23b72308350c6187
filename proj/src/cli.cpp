#include "cyscolor/cli.hpp"

#include <algorithm>
#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "cyscolor/eval.hpp"
#include "cyscolor/models.hpp"
#include "cyscolor/service.hpp"

namespace cys {
namespace {

namespace fs = std::filesystem;

struct Globals {
  std::uint64_t seed = 0;
  bool json = false;
  std::string config;
  int verbosity = 0;
  std::string categories;
};

/// Raised for bad flag combinations found after parsing; maps to exit 2.
struct UsageError : Error {
  using Error::Error;
};

CategoryVocabulary categories_for(const Globals& g) {
  if (!g.categories.empty()) return CategoryVocabulary::load(g.categories);
  if (!g.config.empty()) return ServiceConfig::load(g.config).categories();
  return CategoryVocabulary::cys_default();
}

void print_palette(std::ostream& out, const Palette& p, bool json) {
  if (json) {
    out << nlohmann::json{{"palette", p.to_hex()}}.dump() << '\n';
  } else {
    for (const auto& h : p.to_hex()) out << h << '\n';
  }
}

Palette parse_palette_flag(const std::string& text) {
  std::vector<std::string> hex;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ',');) {
    part.erase(0, part.find_first_not_of(" \t"));
    part.erase(part.find_last_not_of(" \t") + 1);
    hex.push_back(part);
  }
  return Palette::from_hex(hex);
}

void write_json_file(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// dataset-build

struct BuildArgs {
  std::string images;
  std::string out;
  std::string category;
  std::string picks;
  std::string candidates_out;
  int k = 10;
  double dedup = 10.0;
  double beta = 0.01;
};

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<std::string> keywords_for(const fs::path& image) {
  fs::path sidecar = image;
  sidecar.replace_extension(".txt");
  std::vector<std::string> words;
  if (fs::exists(sidecar)) {
    std::ifstream in(sidecar);
    for (std::string line; std::getline(in, line);) {
      std::stringstream ss(line);
      for (std::string w; std::getline(ss, w, ',');) words.push_back(w);
    }
  } else {
    std::string stem = image.stem().string();
    std::replace(stem.begin(), stem.end(), '_', ' ');
    std::replace(stem.begin(), stem.end(), '-', ' ');
    words.push_back(stem);
  }
  return clean_keywords(words);
}

int cmd_dataset_build(const Globals& g, const BuildArgs& a, std::ostream& out, std::ostream& err) {
  const CategoryVocabulary categories = categories_for(g);
  const fs::path root = a.images;
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError("no images found in " + root.string());

  std::map<std::string, std::vector<int>> picks;
  if (!a.picks.empty()) {
    std::ifstream in(a.picks);
    if (!in) throw ValidationError("cannot open picks file: " + a.picks);
    picks = nlohmann::json::parse(in).get<std::map<std::string, std::vector<int>>>();
  }
  const fs::path out_path = a.out;
  const fs::path out_dir = out_path.has_parent_path() ? out_path.parent_path() : fs::path(".");

  std::vector<DatasetRecord> records;
  nlohmann::json candidates_json = nlohmann::json::object();
  int skipped = 0;
  for (const fs::path& file : files) {
    const std::string rel = fs::relative(file, root).generic_string();
    try {
      const std::string category = a.category.empty() ? file.parent_path().filename().string() : a.category;
      if (!categories.find(category)) {
        throw ValidationError("category \"" + category + "\" is not in the category vocabulary");
      }
      KMeansOptions km;
      km.k = a.k;
      km.seed = g.seed;
      const CandidateColors cand = extract_dominant_colors(read_image(file), km);
      CurationOptions cur;
      cur.dedup_threshold = a.dedup;
      cur.beta = a.beta;
      if (const auto it = picks.find(rel); it != picks.end()) cur.manual_pick = it->second;
      DatasetRecord rec;
      rec.image = fs::relative(fs::absolute(file), fs::absolute(out_dir)).generic_string();
      rec.palette = curate_palette(cand, cur);
      rec.keywords = keywords_for(file);
      rec.category = category;
      if (rec.keywords.empty()) throw ValidationError("no keywords after cleaning");
      if (!a.candidates_out.empty()) {
        nlohmann::json c = nlohmann::json::array();
        for (std::size_t i = 0; i < cand.colors.size(); ++i) {
          c.push_back({{"color", to_hex(cand.colors[i])}, {"proportion", cand.proportions[i]}});
        }
        candidates_json[rel] = {{"candidates", c}, {"deduplicated", [&] {
                                  nlohmann::json d = nlohmann::json::array();
                                  for (const auto& col : dedup_candidates(cand, a.dedup).colors) d.push_back(to_hex(col));
                                  return d;
                                }()}};
      }
      records.push_back(std::move(rec));
    } catch (const Error& e) {
      ++skipped;
      err << "warning: skipping " << rel << ": " << e.what() << '\n';
    }
  }
  if (records.empty()) throw ValidationError("no usable images in " + root.string());
  save_dataset(out_path, records);
  if (!a.candidates_out.empty()) write_json_file(a.candidates_out, candidates_json);
  if (g.json) {
    out << nlohmann::json{{"records", records.size()}, {"skipped", skipped}, {"out", a.out}}.dump() << '\n';
  } else {
    out << "wrote " << records.size() << " records to " << a.out << " (" << skipped << " skipped)\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// dataset-stats

struct StatsArgs {
  std::string a, b;
  std::string source = "palette";
  std::size_t sample = 0;
  std::string out;
  std::string csv;
};

ImageLoader dataset_loader(const fs::path& dataset) {
  const fs::path base = dataset.has_parent_path() ? dataset.parent_path() : fs::path(".");
  return [base](const std::string& ref) {
    const fs::path p = fs::path(ref).is_absolute() ? fs::path(ref) : base / ref;
    return read_image(p);
  };
}

std::vector<DatasetRecord> load_records(const fs::path& path, const CategoryVocabulary& categories,
                                        std::ostream& err) {
  LoadedDataset ds = load_dataset(path, categories, false);
  for (const auto& issue : ds.issues) {
    err << "warning: " << path.string() << " line " << issue.line << ": " << issue.message << '\n';
  }
  return std::move(ds.records);
}

int cmd_dataset_stats(const Globals& g, const StatsArgs& a, std::ostream& out, std::ostream& err) {
  const CategoryVocabulary categories = categories_for(g);
  CorpusReportOptions opt;
  opt.source = a.source == "image" ? StatsSource::Image : StatsSource::Palette;
  if (a.sample > 0) opt.sample_size = a.sample;
  opt.seed = g.seed;
  auto ra = load_records(a.a, categories, err);
  auto rb = load_records(a.b, categories, err);
  // Image references resolve against their own dataset file, so tag each with its corpus.
  for (auto& r : ra) r.image = "a:" + r.image;
  for (auto& r : rb) r.image = "b:" + r.image;
  const ImageLoader la = dataset_loader(a.a), lb = dataset_loader(a.b);
  const ImageLoader loader = [la, lb](const std::string& ref) {
    return ref[0] == 'a' ? la(ref.substr(2)) : lb(ref.substr(2));
  };
  const CorpusReport report = corpus_comparison_report(ra, rb, opt, loader);
  if (!a.out.empty()) write_json_file(a.out, report.to_json());
  if (!a.csv.empty()) {
    std::ofstream csv(a.csv);
    if (!csv) throw ValidationError("cannot write " + a.csv);
    report.write_csv(csv);
  }
  out << report.to_json().dump(g.json ? -1 : 2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// training

struct TrainArgs {
  std::string data;
  std::string out;
  std::string log;
  std::string model_config;
  long steps = 0;
  int batch = 0;
  int dim = 0;
  int noise_dim = 0;
  int hidden = 0;
  int image_resolution = 0;
  int resolution = 0;
  double lr_g = 0.0, lr_d = 0.0;
  double alpha = 0.0;
  double l1_weight = -1.0;
};

struct TrainingCorpus {
  std::vector<DatasetRecord> records;
  std::vector<RgbImage> images;
  Vocabulary vocab;
  CategoryVocabulary categories;
};

TrainingCorpus load_corpus(const Globals& g, const std::string& data, std::ostream& err) {
  TrainingCorpus c;
  c.categories = categories_for(g);
  c.records = load_records(data, c.categories, err);
  if (c.records.empty()) throw ValidationError("dataset " + data + " holds no valid records");
  const ImageLoader loader = dataset_loader(data);
  std::vector<std::vector<std::string>> keywords;
  for (const auto& r : c.records) {
    c.images.push_back(loader(r.image));
    keywords.push_back(r.keywords);
  }
  c.vocab = Vocabulary::build(keywords);
  return c;
}

std::ofstream open_log(const std::string& path) {
  std::ofstream log;
  if (!path.empty()) {
    log.open(path);
    if (!log) throw ValidationError("cannot write training log " + path);
  }
  return log;
}

template <typename Config>
Config read_model_config(const std::string& path) {
  if (path.empty()) return Config{};
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open model config " + path);
  return nlohmann::json::parse(in).get<Config>();
}

void apply_common(const TrainArgs& a, EncoderConfig& enc, nn::AdamOptions& g, nn::AdamOptions& d, double& alpha,
                  int& noise_dim) {
  if (a.dim > 0) enc.dim = a.dim;
  if (a.image_resolution > 0) enc.image_resolution = a.image_resolution;
  if (a.lr_g > 0.0) g.learning_rate = a.lr_g;
  if (a.lr_d > 0.0) d.learning_rate = a.lr_d;
  if (a.alpha > 0.0) alpha = a.alpha;
  if (a.noise_dim > 0) noise_dim = a.noise_dim;
}

int cmd_train_palette(const Globals& g, const TrainArgs& a, std::ostream& out, std::ostream& err) {
  TrainingCorpus corpus = load_corpus(g, a.data, err);
  GanConfig cfg = a.model_config.empty() ? GanConfig{} : read_model_config<GanConfig>(a.model_config);
  cfg.encoder.palette_mode = PaletteInputMode::Prefix;
  apply_common(a, cfg.encoder, cfg.generator_optimizer, cfg.discriminator_optimizer, cfg.alpha, cfg.noise_dim);
  if (a.hidden > 0) cfg.hidden = a.hidden;
  if (a.batch > 0) cfg.batch_size = a.batch;
  cfg.encoder.vocab_size = corpus.vocab.size();
  cfg.encoder.category_count = corpus.categories.size();
  cfg.seed = g.seed;
  const long steps = a.steps > 0 ? a.steps : 2000;

  std::vector<ContextInput> contexts;
  std::vector<Palette> palettes;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    contexts.push_back(record_context(corpus.records[i], corpus.vocab, corpus.categories, cfg.encoder.image_resolution,
                                      corpus.images[i]));
    palettes.push_back(corpus.records[i].palette);
  }
  const auto examples = expand_training_examples(contexts, palettes);
  PaletteModel model{PaletteGan(cfg), corpus.vocab, corpus.categories, {}};
  std::ofstream log = open_log(a.log);
  TrainOptions opt;
  opt.steps = steps;
  opt.batch_size = cfg.batch_size;
  opt.seed = g.seed;
  opt.on_step = [&](const TrainLogEntry& e) {
    if (log) log << nlohmann::json{{"step", e.step}, {"L_D", e.discriminator_loss}, {"L_G", e.generator_loss}}.dump() << '\n';
    if (g.verbosity > 0 && (e.step + 1) % 100 == 0) {
      err << "step " << e.step + 1 << " L_D " << e.discriminator_loss << " L_G " << e.generator_loss << '\n';
    }
  };
  const auto history = train_palette_gan(model.gan, examples, opt);
  model.save(a.out);
  const nlohmann::json summary = {{"model", a.out},
                                  {"version", model.version},
                                  {"steps", steps},
                                  {"records", corpus.records.size()},
                                  {"final_L_D", history.back().discriminator_loss},
                                  {"final_L_G", history.back().generator_loss}};
  out << (g.json ? summary.dump() : "saved " + model.version + " to " + a.out) << '\n';
  return kExitOk;
}

int cmd_train_colorizer(const Globals& g, const TrainArgs& a, std::ostream& out, std::ostream& err) {
  TrainingCorpus corpus = load_corpus(g, a.data, err);
  ColorizerConfig cfg;
  if (!a.model_config.empty()) {
    cfg = read_model_config<ColorizerConfig>(a.model_config);
  } else {
    cfg.encoder.palette_mode = PaletteInputMode::Full;
  }
  cfg.encoder.palette_mode = PaletteInputMode::Full;
  apply_common(a, cfg.encoder, cfg.generator_optimizer, cfg.discriminator_optimizer, cfg.alpha, cfg.noise_dim);
  if (a.hidden > 0) cfg.hidden = a.hidden;
  if (a.batch > 0) cfg.batch_size = a.batch;
  if (a.resolution > 0) cfg.resolution = a.resolution;
  if (a.l1_weight >= 0.0) cfg.l1_weight = a.l1_weight;
  cfg.encoder.vocab_size = corpus.vocab.size();
  cfg.encoder.category_count = corpus.categories.size();
  cfg.seed = g.seed;
  const long steps = a.steps > 0 ? a.steps : 500;

  std::vector<ColorizerExample> examples;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    ContextInput ctx = record_context(corpus.records[i], corpus.vocab, corpus.categories, cfg.encoder.image_resolution,
                                      corpus.images[i]);
    examples.push_back(make_colorizer_example(corpus.images[i], corpus.records[i].palette, std::move(ctx), cfg));
  }
  ColorizerModel model{ColorizerGan(cfg), corpus.vocab, corpus.categories, {}};
  std::ofstream log = open_log(a.log);
  ColorizerTrainOptions opt;
  opt.steps = steps;
  opt.batch_size = cfg.batch_size;
  opt.seed = g.seed;
  opt.on_step = [&](const TrainLogEntry& e) {
    if (log) log << nlohmann::json{{"step", e.step}, {"L_D", e.discriminator_loss}, {"L_G", e.generator_loss}}.dump() << '\n';
    if (g.verbosity > 0 && (e.step + 1) % 50 == 0) {
      err << "step " << e.step + 1 << " L_D " << e.discriminator_loss << " L_G " << e.generator_loss << '\n';
    }
  };
  const auto history = train_colorizer(model.gan, examples, opt);
  model.save(a.out);
  const nlohmann::json summary = {{"model", a.out},
                                  {"version", model.version},
                                  {"steps", steps},
                                  {"records", corpus.records.size()},
                                  {"final_L_D", history.back().discriminator_loss},
                                  {"final_L_G", history.back().generator_loss}};
  out << (g.json ? summary.dump() : "saved " + model.version + " to " + a.out) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// inference

struct InferArgs {
  std::string model;
  std::string text;
  std::string category;
  std::string image;
  std::string palette;
  std::string out;
};

std::string model_path(const Globals& g, const std::string& flag, bool palette) {
  if (!flag.empty()) return flag;
  if (!g.config.empty()) {
    ServiceConfig cfg = ServiceConfig::load(g.config);
    cfg.apply_environment();
    const fs::path p = palette ? cfg.palette_model : cfg.colorizer_model;
    if (!p.empty()) return p.string();
  }
  throw UsageError(std::string("--model is required (or name a ") + (palette ? "palette" : "colorizer") +
                   " model in --config)");
}

int cmd_generate(const Globals& g, const InferArgs& a, std::ostream& out) {
  const PaletteModel model = PaletteModel::load(model_path(g, a.model, true));
  const GrayImage gray = luminance(read_image(a.image));
  const Palette p = model.gan.sample_palette(model.context(a.text, a.category, gray), g.seed);
  print_palette(out, p, g.json);
  return kExitOk;
}

int cmd_colorize(const Globals& g, const InferArgs& a, std::ostream& out) {
  const ColorizerModel model = ColorizerModel::load(model_path(g, a.model, false));
  const GrayImage gray = luminance(read_image(a.image));
  const Palette palette = parse_palette_flag(a.palette);
  const std::string category = a.category.empty() ? model.categories.names().front() : a.category;
  const ColorizedImage img = model.gan.colorize_full(gray, palette, model.context(a.text, category, gray), g.seed);
  write_png(a.out, img.rgb, 16);
  const nlohmann::json summary = {{"out", a.out},
                                  {"width", img.width()},
                                  {"height", img.height()},
                                  {"gamut_mapped_pixels", img.gamut_mapped_pixels},
                                  {"palette_adherence", palette_adherence(img, palette)}};
  out << (g.json ? summary.dump() : "wrote " + a.out) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvalArgs {
  std::string model;
  std::string varied = "text";
  std::string text;
  std::string category;
  std::string image;
  std::vector<std::string> variants;
  std::string ours, baseline, bundle, key, votes, out;
};

std::vector<StudyArtifact> load_artifacts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::vector<StudyArtifact> out;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      StudyArtifact art;
      art.keyword = j.at("keyword").get<std::string>();
      if (j.contains("palette")) art.palette = Palette::from_hex(j.at("palette").get<std::vector<std::string>>());
      if (j.contains("image")) {
        const fs::path p = j.at("image").get<std::string>();
        art.image = read_image(p.is_absolute() ? p : fs::path(path).parent_path() / p);
      }
      out.push_back(std::move(art));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

int cmd_evaluate_diversity(const Globals& g, const EvalArgs& a, std::ostream& out) {
  const PaletteModel model = PaletteModel::load(model_path(g, a.model, true));
  DiversityExperiment ex;
  ex.varied = parse_modality(a.varied);
  ex.text = a.text;
  ex.category = a.category;
  ex.image = luminance(read_image(a.image));
  ex.seed = g.seed;
  switch (ex.varied) {
    case Modality::Text: ex.text_variants = a.variants; break;
    case Modality::Category: ex.category_variants = a.variants; break;
    case Modality::Image:
      for (const auto& v : a.variants) ex.image_variants.push_back(luminance(read_image(v)));
      break;
  }
  const nlohmann::json report = to_json(run_diversity_grid(ex, model));
  if (!a.out.empty()) write_json_file(a.out, report);
  out << report.dump(g.json ? -1 : 2) << '\n';
  return kExitOk;
}

int cmd_evaluate_study(const Globals& g, const EvalArgs& a, std::ostream& out) {
  const auto ours = load_artifacts(a.ours);
  const auto baseline = load_artifacts(a.baseline);
  const AnswerKey key = build_preference_study(ours, baseline, a.bundle, a.key, g.seed);
  const nlohmann::json summary = {{"pairs", key.ours_side.size()}, {"bundle", a.bundle}, {"answer_key", a.key}};
  out << (g.json ? summary.dump() : "wrote " + std::to_string(key.ours_side.size()) + " pairs to " + a.bundle) << '\n';
  return kExitOk;
}

int cmd_evaluate_tally(const Globals& g, const EvalArgs& a, std::ostream& out) {
  const AnswerKey key = AnswerKey::load(a.key);
  std::ifstream votes(a.votes);
  if (!votes) throw ValidationError("cannot open " + a.votes);
  const nlohmann::json report = to_json(tally_preferences(key, votes));
  if (!a.out.empty()) write_json_file(a.out, report);
  out << report.dump(g.json ? -1 : 2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// serve

Gateway* g_active_gateway = nullptr;

void handle_signal(int) {
  if (g_active_gateway) g_active_gateway->stop();
}

int cmd_serve(const Globals& g, int port, std::ostream& out) {
  ServiceConfig cfg = g.config.empty() ? ServiceConfig{} : ServiceConfig::load(g.config);
  cfg.apply_environment();
  if (port >= 0) cfg.port = port;
  if (!g.categories.empty()) cfg.categories_file = g.categories;
  Gateway gateway(cfg);
  gateway.load_models();
  g_active_gateway = &gateway;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  out << "listening on http://" << cfg.host << ":" << cfg.port << std::endl;
  const bool ok = gateway.listen();
  g_active_gateway = nullptr;
  if (!ok) throw Error("cannot listen on " + cfg.host + ":" + std::to_string(cfg.port));
  return kExitOk;
}

void structured_error(std::ostream& err, const std::string& kind, const std::string& message) {
  err << nlohmann::json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Culture-conditioned palette generation and colorization toolkit", "cys"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
  app.add_flag("--json", g.json, "Machine-readable output");
  app.add_option("--config", g.config, "Service configuration file")->check(CLI::ExistingFile);
  app.add_option("--categories", g.categories, "Category vocabulary (JSON array)")->check(CLI::ExistingFile);
  app.add_flag("-v,--verbose", g.verbosity, "More progress output");

  BuildArgs build;
  auto* c_build = app.add_subcommand("dataset-build", "Extract and curate palettes from an image directory");
  c_build->add_option("--images", build.images, "Image directory (one subdirectory per category)")
      ->required()
      ->check(CLI::ExistingDirectory);
  c_build->add_option("--out", build.out, "Output dataset (JSONL)")->required();
  c_build->add_option("--category", build.category, "Category for every image instead of the subdirectory name");
  c_build->add_option("--picks", build.picks, "JSON of image -> five candidate indices")->check(CLI::ExistingFile);
  c_build->add_option("--candidates-out", build.candidates_out, "Write extracted candidates for manual picking");
  c_build->add_option("-k", build.k, "Colors extracted per image")->capture_default_str();
  c_build->add_option("--dedup-threshold", build.dedup, "Merge colors closer than this ΔE76")->capture_default_str();
  c_build->add_option("--beta", build.beta, "Distinctiveness weight for automatic picks")->capture_default_str();

  StatsArgs stats;
  auto* c_stats = app.add_subcommand("dataset-stats", "Compare HSL statistics of two datasets");
  c_stats->add_option("--a", stats.a, "First dataset")->required()->check(CLI::ExistingFile);
  c_stats->add_option("--b", stats.b, "Second dataset")->required()->check(CLI::ExistingFile);
  c_stats->add_option("--source", stats.source, "palette or image")
      ->check(CLI::IsMember({"palette", "image"}))
      ->capture_default_str();
  c_stats->add_option("--sample", stats.sample, "Subsample each corpus to this size (e.g. 400)");
  c_stats->add_option("--out", stats.out, "Write the JSON report here");
  c_stats->add_option("--csv", stats.csv, "Write per-record statistics as CSV");

  TrainArgs tp, tc;
  auto add_train = [](CLI::App* c, TrainArgs& t) {
    c->add_option("--data", t.data, "Training dataset (JSONL)")->required()->check(CLI::ExistingFile);
    c->add_option("--out", t.out, "Checkpoint to write")->required();
    c->add_option("--log", t.log, "Training log (JSONL of step, L_D, L_G)");
    c->add_option("--model-config", t.model_config, "Model configuration JSON")->check(CLI::ExistingFile);
    c->add_option("--steps", t.steps, "Training steps");
    c->add_option("--batch-size", t.batch, "Minibatch size");
    c->add_option("--dim", t.dim, "Encoder dimension d");
    c->add_option("--noise-dim", t.noise_dim, "Noise dimension");
    c->add_option("--hidden", t.hidden, "Hidden width");
    c->add_option("--image-resolution", t.image_resolution, "Context image resolution");
    c->add_option("--lr-g", t.lr_g, "Generator learning rate");
    c->add_option("--lr-d", t.lr_d, "Discriminator learning rate");
    c->add_option("--alpha", t.alpha, "Loss balance");
  };
  auto* c_tp = app.add_subcommand("train-palette", "Train the palette generator");
  add_train(c_tp, tp);
  auto* c_tc = app.add_subcommand("train-colorizer", "Train the colorizer");
  add_train(c_tc, tc);
  c_tc->add_option("--resolution", tc.resolution, "Working resolution");
  c_tc->add_option("--l1-weight", tc.l1_weight, "Reconstruction weight (0 disables)");

  InferArgs gen, col;
  auto* c_gen = app.add_subcommand("generate", "Generate a palette");
  c_gen->add_option("--model", gen.model, "Palette checkpoint")->check(CLI::ExistingFile);
  c_gen->add_option("--text", gen.text, "Description")->required();
  c_gen->add_option("--category", gen.category, "Category")->required();
  c_gen->add_option("--image", gen.image, "Grayscale image")->required()->check(CLI::ExistingFile);
  auto* c_col = app.add_subcommand("colorize", "Colorize an image with a palette");
  c_col->add_option("--model", col.model, "Colorizer checkpoint")->check(CLI::ExistingFile);
  c_col->add_option("--image", col.image, "Grayscale image")->required()->check(CLI::ExistingFile);
  c_col->add_option("--palette", col.palette, "Five comma-separated #RRGGBB colors")->required();
  c_col->add_option("--text", col.text, "Description");
  c_col->add_option("--category", col.category, "Category");
  c_col->add_option("--out", col.out, "Output PNG")->required();

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "Evaluation harness");
  c_eval->require_subcommand(1);
  auto* c_div = c_eval->add_subcommand("diversity", "Vary one modality with the others fixed");
  c_div->add_option("--model", ev.model, "Palette checkpoint")->check(CLI::ExistingFile);
  c_div->add_option("--varied", ev.varied, "text, image or category")
      ->check(CLI::IsMember({"text", "image", "category"}))
      ->capture_default_str();
  c_div->add_option("--text", ev.text, "Fixed text")->required();
  c_div->add_option("--category", ev.category, "Fixed category")->required();
  c_div->add_option("--image", ev.image, "Fixed grayscale image")->required()->check(CLI::ExistingFile);
  c_div->add_option("--variant", ev.variants, "Value of the varied modality (repeatable)")->required();
  c_div->add_option("--out", ev.out, "Write the JSON report here");
  auto* c_study = c_eval->add_subcommand("study", "Build a blinded preference study");
  c_study->add_option("--ours", ev.ours, "JSONL artifacts from our model")->required()->check(CLI::ExistingFile);
  c_study->add_option("--baseline", ev.baseline, "JSONL baseline artifacts")->required()->check(CLI::ExistingFile);
  c_study->add_option("--bundle", ev.bundle, "Output directory shown to raters")->required();
  c_study->add_option("--key", ev.key, "Answer key path (keep away from raters)")->required();
  auto* c_tally = c_eval->add_subcommand("tally", "Tally rater votes");
  c_tally->add_option("--key", ev.key, "Answer key")->required()->check(CLI::ExistingFile);
  c_tally->add_option("--votes", ev.votes, "CSV pair_id,rater_id,choice")->required()->check(CLI::ExistingFile);
  c_tally->add_option("--out", ev.out, "Write the JSON report here");

  int serve_port = -1;
  auto* c_serve = app.add_subcommand("serve", "Run the HTTP gateway");
  c_serve->add_option("--port", serve_port, "Port (overrides config and CYS_PORT)");

  std::vector<std::string> argv_storage{"cys"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    structured_error(err, "usage", e.what());
    err << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (*c_build) return cmd_dataset_build(g, build, out, err);
    if (*c_stats) return cmd_dataset_stats(g, stats, out, err);
    if (*c_tp) return cmd_train_palette(g, tp, out, err);
    if (*c_tc) return cmd_train_colorizer(g, tc, out, err);
    if (*c_gen) return cmd_generate(g, gen, out);
    if (*c_col) return cmd_colorize(g, col, out);
    if (*c_div) return cmd_evaluate_diversity(g, ev, out);
    if (*c_study) return cmd_evaluate_study(g, ev, out);
    if (*c_tally) return cmd_evaluate_tally(g, ev, out);
    if (*c_serve) return cmd_serve(g, serve_port, out);
  } catch (const UsageError& e) {
    structured_error(err, "usage", e.what());
    return kExitUsage;
  } catch (const ValidationError& e) {
    structured_error(err, "validation", e.what());
    return kExitFailure;
  } catch (const CurationUnderflow& e) {
    structured_error(err, "curation_underflow", e.what());
    return kExitFailure;
  } catch (const DivergenceError& e) {
    structured_error(err, "divergence", e.what());
    return kExitFailure;
  } catch (const CheckpointError& e) {
    structured_error(err, "checkpoint", e.what());
    return kExitFailure;
  } catch (const std::exception& e) {
    structured_error(err, "error", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace cys
