#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cyscolor/autodiff.hpp"
#include "cyscolor/dataset.hpp"
#include "cyscolor/text.hpp"

namespace cys {

inline constexpr std::uint32_t kCheckpointFormat = 1;

/// Single-file model container: magic, format version, a JSON header
/// (kind, config, hashes, vocabularies, tensor index) and raw little-endian doubles.
struct Checkpoint {
  std::string kind;  ///< "palette" or "colorizer"
  nlohmann::json config;
  Vocabulary vocab;
  CategoryVocabulary categories;
  std::map<std::string, Eigen::MatrixXd> tensors;

  /// FNV-1a of the compact config dump.
  std::string config_hash() const;
  /// Digest over config, vocabulary and tensor bytes; identifies a trained model.
  std::string model_version() const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Verifies magic, format, config hash, vocabulary hash and model version.
/// With `expected_config_hash` set, also refuses checkpoints built from another config.
Checkpoint read_checkpoint(const std::filesystem::path& path, const std::string& expected_config_hash = {});

std::map<std::string, Eigen::MatrixXd> export_parameters(const std::vector<ad::NamedParameter>& params);
/// Copies tensors into parameters; every parameter must be present with a matching shape.
void import_parameters(const std::map<std::string, Eigen::MatrixXd>& tensors,
                       const std::vector<ad::NamedParameter>& params);

}  // namespace cys
