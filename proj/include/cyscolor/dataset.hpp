#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cyscolor/color.hpp"
#include "cyscolor/image.hpp"
#include "cyscolor/stats.hpp"

namespace cys {

/// Ordered category names; a category id is an index into this list.
class CategoryVocabulary {
 public:
  CategoryVocabulary() = default;
  explicit CategoryVocabulary(std::vector<std::string> names);

  /// The fourteen-entry default used by the bundled configuration.
  static CategoryVocabulary cys_default();
  static CategoryVocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::optional<int> find(const std::string& name) const;
  /// Throws ValidationError naming the unknown category.
  int id(const std::string& name) const;
  const std::string& name(int id) const;
  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
};

struct DatasetRecord {
  std::string image;
  Palette palette;
  std::vector<std::string> keywords;
  std::string category;
};

nlohmann::json record_to_json(const DatasetRecord& record);

struct RecordIssue {
  std::size_t line = 0;
  std::string message;
};

struct LoadedDataset {
  std::vector<DatasetRecord> records;
  std::vector<RecordIssue> issues;
};

/// Parses one record per non-blank line. Keywords are cleaned on load.
/// With `strict`, the first invalid record throws ValidationError carrying its
/// line number; otherwise invalid records are skipped and listed in `issues`.
LoadedDataset load_dataset(std::istream& in, const CategoryVocabulary& categories, bool strict = false);
LoadedDataset load_dataset(const std::filesystem::path& path, const CategoryVocabulary& categories,
                           bool strict = false);
void save_dataset(std::ostream& out, const std::vector<DatasetRecord>& records);
void save_dataset(const std::filesystem::path& path, const std::vector<DatasetRecord>& records);

// ---------------------------------------------------------------------------
// Dominant colors and curation

/// Cluster centers (RGB) with membership fractions, sorted by descending proportion.
struct CandidateColors {
  std::vector<Color> colors;
  std::vector<double> proportions;

  /// Throws ValidationError if proportions are unsorted, negative or do not sum to 1.
  void validate(std::size_t expected_size) const;
};

struct KMeansOptions {
  int k = 10;
  std::uint64_t seed = 0;
  int max_iterations = 100;
  /// Pixels beyond this count are subsampled (seeded) for fitting; proportions
  /// always come from assigning every pixel.
  std::size_t max_fit_pixels = 20000;
};

/// k-means++ seeded Lloyd iterations in Lab space.
CandidateColors extract_dominant_colors(const RgbImage& image, const KMeansOptions& options = {});

/// Within-cluster sum of squared Lab distances of `pixels` to their nearest center.
double kmeans_inertia(std::span<const Eigen::Vector3d> pixels, std::span<const Eigen::Vector3d> centers);

struct CurationOptions {
  double dedup_threshold = 10.0;  ///< ΔE76
  double beta = 0.01;             ///< weight of mean ΔE to already-selected colors
  std::optional<std::vector<int>> manual_pick;
};

/// Merges candidate pairs closer than `threshold` (ΔE76), keeping the
/// higher-proportion color and folding the other's proportion into it.
CandidateColors dedup_candidates(const CandidateColors& candidates, double threshold);

/// Greedy step score: proportion + beta * mean ΔE to the already selected colors.
double curation_step_score(const CandidateColors& pool, std::span<const int> selected, int candidate, double beta);

/// Selects five colors. With a manual pick the indices refer to the
/// deduplicated list and their order is the rank; otherwise the greedy
/// proportion/distinctiveness score decides. Throws CurationUnderflow when
/// fewer than five colors survive deduplication.
Palette curate_palette(const CandidateColors& candidates, const CurationOptions& options = {});

// ---------------------------------------------------------------------------
// HSL statistics

enum class StatsSource { Palette, Image };

struct HslStats {
  std::vector<double> hue_std;          ///< circular, degrees
  std::vector<double> lightness_mean;   ///< [0, 1]
  std::vector<double> saturation_mean;  ///< [0, 1]
  std::size_t size() const { return hue_std.size(); }
};

struct ColorSummary {
  double hue_std = 0.0;
  double lightness_mean = 0.0;
  double saturation_mean = 0.0;
};

/// Statistics over a set of RGB colors.
ColorSummary summarize_colors(std::span<const Eigen::Vector3d> rgb);

using ImageLoader = std::function<RgbImage(const std::string& image_ref)>;

/// Per-record statistics over palette colors or, with StatsSource::Image,
/// over every pixel of the image returned by `loader`.
HslStats compute_hsl_stats(const std::vector<DatasetRecord>& records, StatsSource source,
                           const ImageLoader& loader = {});

}  // namespace cys
