#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cyscolor/dataset.hpp"
#include "cyscolor/models.hpp"
#include "cyscolor/stats.hpp"

namespace cys {

enum class Modality { Text, Image, Category };
std::string_view to_string(Modality m);
Modality parse_modality(std::string_view name);

/// Vary one modality while the other two stay at the fixed context.
struct DiversityExperiment {
  Modality varied = Modality::Text;
  std::string text;
  std::string category;
  GrayImage image;
  std::vector<std::string> text_variants;
  std::vector<std::string> category_variants;
  std::vector<GrayImage> image_variants;
  std::uint64_t seed = 0;

  std::size_t variant_count() const;
};

struct DiversityResult {
  Modality varied = Modality::Text;
  std::vector<std::string> labels;
  std::vector<Palette> palettes;
  Palette baseline;                   ///< palette of the fixed context itself
  std::optional<double> dispersion;   ///< mean pairwise palette_distance; empty below two variants
  std::vector<double> distance_to_baseline;
};

DiversityResult run_diversity_grid(const DiversityExperiment& experiment, const PaletteModel& model);
nlohmann::json to_json(const DiversityResult& result);

/// One side of a preference pair: a palette, an image, or both.
struct StudyArtifact {
  std::string keyword;
  std::optional<Palette> palette;
  std::optional<RgbImage> image;
};

/// Maps each pair id to the side ("A" or "B") holding our artifact.
struct AnswerKey {
  std::map<std::string, std::string> ours_side;

  nlohmann::json to_json() const;
  static AnswerKey from_json(const nlohmann::json& j);
  static AnswerKey load(const std::filesystem::path& path);
};

/// Writes a blinded bundle (manifest.json plus per-side PNG/JSON files) to
/// `bundle_dir` and the answer key to `answer_key_path`. Pairs are shuffled
/// and their sides randomised with `seed`.
AnswerKey build_preference_study(std::span<const StudyArtifact> ours, std::span<const StudyArtifact> baseline,
                                 const std::filesystem::path& bundle_dir,
                                 const std::filesystem::path& answer_key_path, std::uint64_t seed);

struct PreferenceTally {
  int votes = 0;
  int ours = 0;
  double fraction = 0.0;  ///< ours / votes
  double p_value = 1.0;   ///< exact two-sided binomial test against 0.5
  std::map<std::string, int> votes_per_rater;
};

PreferenceTally tally_counts(int ours, int votes);
/// Reads CSV rows `pair_id,rater_id,choice` (choice A or B, header optional).
PreferenceTally tally_preferences(const AnswerKey& key, std::istream& csv);
nlohmann::json to_json(const PreferenceTally& tally);

struct StatisticTest {
  std::string statistic;
  WelchResult result;
};

struct CorpusReport {
  StatsSource source = StatsSource::Palette;
  std::size_t n_a = 0, n_b = 0;
  HslStats a, b;
  std::vector<StatisticTest> tests;  ///< hue_std, lightness_mean, saturation_mean

  nlohmann::json to_json() const;
  static CorpusReport from_json(const nlohmann::json& j);
  /// Long format: corpus,index,hue_std,lightness_mean,saturation_mean.
  void write_csv(std::ostream& out) const;
};

struct CorpusReportOptions {
  StatsSource source = StatsSource::Palette;
  std::optional<std::size_t> sample_size;  ///< subsample each corpus without replacement
  std::uint64_t seed = 0;
};

CorpusReport corpus_comparison_report(const std::vector<DatasetRecord>& corpus_a,
                                      const std::vector<DatasetRecord>& corpus_b, const CorpusReportOptions& options,
                                      const ImageLoader& loader = {});

/// Five vertical color bars, `width` x `height` pixels.
RgbImage render_swatch(const Palette& palette, int width = 250, int height = 50);

}  // namespace cys
