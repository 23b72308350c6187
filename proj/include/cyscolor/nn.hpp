#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "cyscolor/autodiff.hpp"

namespace cys {

/// All randomness in the library flows through seeded 64-bit Mersenne Twisters.
using Rng = std::mt19937_64;

/// Fills a rows x cols matrix with independent standard normal draws.
Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng);

namespace nn {

using ad::Matrix;
using ad::Parameter;
using ad::Tape;
using ad::Var;

/// Fully connected layer: y = x W + b, W is in x out.
struct Linear {
  Parameter weight;
  Parameter bias;

  Linear() = default;
  Linear(int in, int out, Rng& rng);
  Var operator()(Tape& tape, Var x) const;
  int in_features() const { return static_cast<int>(weight.value.rows()); }
  int out_features() const { return static_cast<int>(weight.value.cols()); }
  void collect(const std::string& prefix, std::vector<ad::NamedParameter>& out);
};

struct Conv2d {
  ad::ConvSpec spec;
  Parameter weight;
  Parameter bias;

  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding, Rng& rng);
  Var operator()(Tape& tape, Var x, const ad::Geometry& in) const;
  ad::Geometry output(const ad::Geometry& in) const { return spec.output(in); }
  void collect(const std::string& prefix, std::vector<ad::NamedParameter>& out);
};

struct Embedding {
  Parameter table;

  Embedding() = default;
  Embedding(int count, int dim, Rng& rng);
  int count() const { return static_cast<int>(table.value.rows()); }
  int dim() const { return static_cast<int>(table.value.cols()); }
  void collect(const std::string& prefix, std::vector<ad::NamedParameter>& out);
};

struct AdamOptions {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

void to_json(nlohmann::json& j, const AdamOptions& o);
void from_json(const nlohmann::json& j, AdamOptions& o);

/// Adam. Moment buffers are keyed by position in the parameter list, which
/// must be passed in the same order on every step.
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamOptions options) : options_(options) {}

  /// Applies one update from the accumulated gradients.
  void step(const std::vector<Parameter*>& params);
  long steps() const { return step_; }
  const AdamOptions& options() const { return options_; }

 private:
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  AdamOptions options_;
  long step_ = 0;
};

void zero_grad(const std::vector<ad::NamedParameter>& params);

std::vector<Parameter*> parameter_pointers(const std::vector<ad::NamedParameter>& named);
bool all_finite(const std::vector<ad::NamedParameter>& named);

}  // namespace nn
}  // namespace cys
