#include "cyscolor/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <random>
#include <set>

#include "cyscolor/text.hpp"

namespace cys {

CategoryVocabulary::CategoryVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
  std::set<std::string> seen;
  for (const std::string& n : names_) {
    if (n.empty()) throw ValidationError("category names must be non-empty");
    if (!seen.insert(n).second) throw ValidationError("duplicate category \"" + n + "\"");
  }
}

CategoryVocabulary CategoryVocabulary::cys_default() {
  return CategoryVocabulary({"punk", "hiphop", "techno", "indie", "rock", "metal", "electronic", "folk", "jazz",
                             "pop", "rap", "anime", "streetwear", "vaporwave"});
}

CategoryVocabulary CategoryVocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open category file: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    return CategoryVocabulary(j.get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("category file " + path.string() + " must be a JSON array of strings: " + e.what());
  }
}

void CategoryVocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write category file: " + path.string());
  out << nlohmann::json(names_).dump(2) << '\n';
}

std::optional<int> CategoryVocabulary::find(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<int>(it - names_.begin());
}

int CategoryVocabulary::id(const std::string& name) const {
  if (auto i = find(name)) return *i;
  throw ValidationError("category: unknown category \"" + name + "\"");
}

const std::string& CategoryVocabulary::name(int id) const {
  if (id < 0 || id >= size()) throw ValidationError("category id " + std::to_string(id) + " out of range");
  return names_[id];
}

nlohmann::json record_to_json(const DatasetRecord& record) {
  return {{"image", record.image},
          {"palette", record.palette.to_hex()},
          {"keywords", record.keywords},
          {"category", record.category}};
}

namespace {

DatasetRecord parse_record(const nlohmann::json& j, const CategoryVocabulary& categories) {
  if (!j.is_object()) throw ValidationError("record must be a JSON object");
  for (const char* field : {"image", "palette", "keywords", "category"}) {
    if (!j.contains(field)) throw ValidationError(std::string("missing field \"") + field + "\"");
  }
  if (!j["image"].is_string()) throw ValidationError("image: expected a string");
  if (!j["palette"].is_array()) throw ValidationError("palette: expected an array of hex strings");
  if (!j["keywords"].is_array()) throw ValidationError("keywords: expected an array of strings");
  if (!j["category"].is_string()) throw ValidationError("category: expected a string");

  DatasetRecord r;
  r.image = j["image"].get<std::string>();
  const auto& pal = j["palette"];
  if (pal.size() != kPaletteSize) {
    throw ValidationError("palette length must be 5, got " + std::to_string(pal.size()));
  }
  std::vector<std::string> hex;
  for (const auto& h : pal) {
    if (!h.is_string()) throw ValidationError("palette: entries must be strings");
    hex.push_back(h.get<std::string>());
  }
  try {
    r.palette = Palette::from_hex(hex);
  } catch (const ParseError& e) {
    throw ValidationError(std::string("palette: ") + e.what());
  }
  std::vector<std::string> keywords;
  for (const auto& k : j["keywords"]) {
    if (!k.is_string()) throw ValidationError("keywords: entries must be strings");
    keywords.push_back(k.get<std::string>());
  }
  r.keywords = clean_keywords(keywords);
  if (r.keywords.empty()) throw ValidationError("keywords: empty after cleaning");
  r.category = j["category"].get<std::string>();
  categories.id(r.category);
  return r;
}

}  // namespace

LoadedDataset load_dataset(std::istream& in, const CategoryVocabulary& categories, bool strict) {
  LoadedDataset out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed JSON: ") + e.what());
      }
      out.records.push_back(parse_record(j, categories));
    } catch (const Error& e) {
      RecordIssue issue{line_no, e.what()};
      if (strict) throw ValidationError("line " + std::to_string(line_no) + ": " + issue.message);
      out.issues.push_back(std::move(issue));
    }
  }
  return out;
}

LoadedDataset load_dataset(const std::filesystem::path& path, const CategoryVocabulary& categories, bool strict) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset: " + path.string());
  return load_dataset(in, categories, strict);
}

void save_dataset(std::ostream& out, const std::vector<DatasetRecord>& records) {
  for (const DatasetRecord& r : records) out << record_to_json(r).dump() << '\n';
}

void save_dataset(const std::filesystem::path& path, const std::vector<DatasetRecord>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write dataset: " + path.string());
  save_dataset(out, records);
}

// ---------------------------------------------------------------------------

void CandidateColors::validate(std::size_t expected_size) const {
  if (colors.size() != expected_size || proportions.size() != expected_size) {
    throw ValidationError("expected " + std::to_string(expected_size) + " candidate colors");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < proportions.size(); ++i) {
    if (proportions[i] < 0.0) throw ValidationError("negative candidate proportion");
    if (i > 0 && proportions[i] > proportions[i - 1]) throw ValidationError("candidate proportions not sorted");
    sum += proportions[i];
  }
  if (std::abs(sum - 1.0) > 1e-6) throw ValidationError("candidate proportions do not sum to 1");
  for (const Color& c : colors) c.validate();
}

double kmeans_inertia(std::span<const Eigen::Vector3d> pixels, std::span<const Eigen::Vector3d> centers) {
  double total = 0.0;
  for (const auto& p : pixels) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : centers) best = std::min(best, (p - c).squaredNorm());
    total += best;
  }
  return total;
}

namespace {

int nearest_center(const Eigen::Vector3d& p, const std::vector<Eigen::Vector3d>& centers) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double d = (p - centers[c]).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

std::vector<Eigen::Vector3d> kmeans_plus_plus(const std::vector<Eigen::Vector3d>& points, int k, std::mt19937_64& rng) {
  std::vector<Eigen::Vector3d> centers;
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  centers.push_back(points[pick(rng)]);
  std::vector<double> d2(points.size(), std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      d2[i] = std::min(d2[i], (points[i] - centers.back()).squaredNorm());
      total += d2[i];
    }
    if (total <= 0.0) {
      centers.push_back(points[pick(rng)]);
      continue;
    }
    double target = std::uniform_real_distribution<double>(0.0, total)(rng);
    std::size_t chosen = points.size() - 1;
    for (std::size_t i = 0; i < points.size(); ++i) {
      target -= d2[i];
      if (target <= 0.0) {
        chosen = i;
        break;
      }
    }
    centers.push_back(points[chosen]);
  }
  return centers;
}

std::vector<Eigen::Vector3d> lloyd(const std::vector<Eigen::Vector3d>& points, std::vector<Eigen::Vector3d> centers,
                                   int max_iterations) {
  const int k = static_cast<int>(centers.size());
  std::vector<int> assignment(points.size(), -1);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const int c = nearest_center(points[i], centers);
      if (c != assignment[i]) {
        assignment[i] = c;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<Eigen::Vector3d> sums(k, Eigen::Vector3d::Zero());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      sums[assignment[i]] += points[i];
      ++counts[assignment[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centers[c] = sums[c] / static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: move it onto the point worst served by the others.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        const double d = (points[i] - centers[assignment[i]]).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      centers[c] = points[far];
      assignment[far] = c;
    }
  }
  return centers;
}

constexpr int kRestarts = 4;

}  // namespace

CandidateColors extract_dominant_colors(const RgbImage& image, const KMeansOptions& options) {
  if (image.empty()) throw ValidationError("extract_dominant_colors: empty image");
  if (options.k <= 0) throw ValidationError("extract_dominant_colors: k must be positive");
  const int k = options.k;

  std::vector<Eigen::Vector3d> lab;
  lab.reserve(image.pixel_count());
  for (Eigen::Index y = 0; y < image.height(); ++y) {
    for (Eigen::Index x = 0; x < image.width(); ++x) lab.push_back(srgb_to_lab<double>(image.pixel(y, x)));
  }

  std::mt19937_64 rng(options.seed);
  std::vector<Eigen::Vector3d> fit = lab;
  if (fit.size() > options.max_fit_pixels) {
    std::shuffle(fit.begin(), fit.end(), rng);
    fit.resize(options.max_fit_pixels);
  }

  const auto key = [](const Eigen::Vector3d& v) { return std::array<double, 3>{v[0], v[1], v[2]}; };
  std::set<std::array<double, 3>> distinct_keys;
  std::vector<Eigen::Vector3d> distinct;
  for (const auto& p : lab) {
    if (distinct_keys.insert(key(p)).second) distinct.push_back(p);
    if (static_cast<int>(distinct.size()) > k) break;
  }

  std::vector<Eigen::Vector3d> centers;
  if (static_cast<int>(distinct.size()) <= k) {
    centers = distinct;
  } else {
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < kRestarts; ++r) {
      auto candidate = lloyd(fit, kmeans_plus_plus(fit, k, rng), options.max_iterations);
      const double inertia = kmeans_inertia(fit, candidate);
      if (inertia < best) {
        best = inertia;
        centers = std::move(candidate);
      }
    }
  }

  std::vector<std::size_t> counts(centers.size(), 0);
  for (const auto& p : lab) ++counts[nearest_center(p, centers)];

  std::vector<std::size_t> order(centers.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });

  CandidateColors out;
  const double n = static_cast<double>(lab.size());
  for (std::size_t idx : order) {
    const Eigen::Vector3d rgb = lab_to_srgb_unclamped<double>(centers[idx]).cwiseMax(0.0).cwiseMin(1.0);
    out.colors.push_back(Color::rgb(rgb[0], rgb[1], rgb[2]));
    out.proportions.push_back(static_cast<double>(counts[idx]) / n);
  }
  while (static_cast<int>(out.colors.size()) < k) {
    out.colors.push_back(out.colors.front());
    out.proportions.push_back(0.0);
  }
  return out;
}

CandidateColors dedup_candidates(const CandidateColors& candidates, double threshold) {
  std::vector<std::size_t> order(candidates.colors.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return candidates.proportions[a] > candidates.proportions[b]; });
  CandidateColors kept;
  for (std::size_t i : order) {
    const Color& c = candidates.colors[i];
    bool merged = false;
    for (std::size_t s = 0; s < kept.colors.size(); ++s) {
      if (delta_e76(c, kept.colors[s]) < threshold) {
        kept.proportions[s] += candidates.proportions[i];
        merged = true;
        break;
      }
    }
    if (!merged) {
      kept.colors.push_back(c);
      kept.proportions.push_back(candidates.proportions[i]);
    }
  }
  std::vector<std::size_t> resort(kept.colors.size());
  std::iota(resort.begin(), resort.end(), 0);
  std::stable_sort(resort.begin(), resort.end(),
                   [&](std::size_t a, std::size_t b) { return kept.proportions[a] > kept.proportions[b]; });
  CandidateColors out;
  for (std::size_t i : resort) {
    out.colors.push_back(kept.colors[i]);
    out.proportions.push_back(kept.proportions[i]);
  }
  return out;
}

double curation_step_score(const CandidateColors& pool, std::span<const int> selected, int candidate, double beta) {
  double score = pool.proportions[candidate];
  if (!selected.empty()) {
    double sum = 0.0;
    for (int s : selected) sum += delta_e76(pool.colors[candidate], pool.colors[s]);
    score += beta * sum / static_cast<double>(selected.size());
  }
  return score;
}

Palette curate_palette(const CandidateColors& candidates, const CurationOptions& options) {
  if (candidates.colors.size() != candidates.proportions.size()) {
    throw ValidationError("candidate colors and proportions differ in length");
  }
  const CandidateColors pool = dedup_candidates(candidates, options.dedup_threshold);
  const int n = static_cast<int>(pool.colors.size());
  if (n < static_cast<int>(kPaletteSize)) {
    throw CurationUnderflow("only " + std::to_string(n) + " colors survive deduplication at ΔE " +
                            std::to_string(options.dedup_threshold) + "; lower the threshold");
  }

  std::vector<int> chosen;
  if (options.manual_pick) {
    const auto& pick = *options.manual_pick;
    if (pick.size() != kPaletteSize) throw ValidationError("manual_pick must hold exactly 5 indices");
    std::set<int> unique(pick.begin(), pick.end());
    if (unique.size() != kPaletteSize) throw ValidationError("manual_pick indices must be distinct");
    for (int i : pick) {
      if (i < 0 || i >= n) throw ValidationError("manual_pick index " + std::to_string(i) + " out of range");
    }
    chosen = pick;
  } else {
    std::vector<char> used(n, 0);
    while (chosen.size() < kPaletteSize) {
      int best = -1;
      double best_score = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        if (used[i]) continue;
        const double s = curation_step_score(pool, chosen, i, options.beta);
        if (s > best_score) {
          best_score = s;
          best = i;
        }
      }
      used[best] = 1;
      chosen.push_back(best);
    }
  }
  std::array<Color, kPaletteSize> colors;
  for (std::size_t i = 0; i < kPaletteSize; ++i) colors[i] = convert(pool.colors[chosen[i]], ColorSpace::RGB);
  return Palette(colors);
}

// ---------------------------------------------------------------------------

ColorSummary summarize_colors(std::span<const Eigen::Vector3d> rgb) {
  if (rgb.empty()) throw ValidationError("no colors to summarize");
  std::vector<double> hues;
  hues.reserve(rgb.size());
  double l = 0.0, s = 0.0;
  for (const auto& c : rgb) {
    const Eigen::Vector3d hsl = srgb_to_hsl<double>(c);
    hues.push_back(hsl[0]);
    s += hsl[1];
    l += hsl[2];
  }
  const double n = static_cast<double>(rgb.size());
  return {circular_std_deg(hues), l / n, s / n};
}

HslStats compute_hsl_stats(const std::vector<DatasetRecord>& records, StatsSource source, const ImageLoader& loader) {
  if (records.empty()) throw ValidationError("compute_hsl_stats: empty corpus");
  if (source == StatsSource::Image && !loader) throw ValidationError("compute_hsl_stats: image mode needs a loader");
  HslStats stats;
  for (const DatasetRecord& r : records) {
    std::vector<Eigen::Vector3d> colors;
    if (source == StatsSource::Palette) {
      for (const Color& c : r.palette.converted(ColorSpace::RGB).colors()) colors.push_back(c.channels());
    } else {
      const RgbImage img = loader(r.image);
      if (img.empty()) throw ValidationError("image " + r.image + " is empty");
      colors.reserve(img.pixel_count());
      for (Eigen::Index y = 0; y < img.height(); ++y) {
        for (Eigen::Index x = 0; x < img.width(); ++x) colors.push_back(img.pixel(y, x));
      }
    }
    const ColorSummary s = summarize_colors(colors);
    stats.hue_std.push_back(s.hue_std);
    stats.lightness_mean.push_back(s.lightness_mean);
    stats.saturation_mean.push_back(s.saturation_mean);
  }
  return stats;
}

}  // namespace cys
