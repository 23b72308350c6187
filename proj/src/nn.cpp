#include "cyscolor/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace cys {

Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  // Row-major fill order so a 1 x n draw matches the first row of an m x n draw.
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal(rng);
  }
  return m;
}

namespace nn {

namespace {

Matrix uniform(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

}  // namespace

Linear::Linear(int in, int out, Rng& rng)
    : weight(uniform(in, out, std::sqrt(6.0 / (in + out)), rng)), bias(Matrix::Zero(1, out)) {}

Var Linear::operator()(Tape& tape, Var x) const { return ad::linear(x, tape.parameter(weight), tape.parameter(bias)); }

void Linear::collect(const std::string& prefix, std::vector<ad::NamedParameter>& out) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding, Rng& rng)
    : spec{kernel, stride, padding, out_channels},
      weight(uniform(static_cast<Eigen::Index>(in_channels) * kernel * kernel, out_channels,
                     std::sqrt(6.0 / ((in_channels + out_channels) * kernel * kernel)), rng)),
      bias(Matrix::Zero(1, out_channels)) {}

Var Conv2d::operator()(Tape& tape, Var x, const ad::Geometry& in) const {
  return ad::conv2d(x, in, spec, tape.parameter(weight), tape.parameter(bias));
}

void Conv2d::collect(const std::string& prefix, std::vector<ad::NamedParameter>& out) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

Embedding::Embedding(int count, int dim, Rng& rng) : table(standard_normal(count, dim, rng) * 0.5) {}

void Embedding::collect(const std::string& prefix, std::vector<ad::NamedParameter>& out) {
  out.push_back({prefix + ".table", &table});
}

void Adam::step(const std::vector<Parameter*>& params) {
  if (m_.empty()) {
    for (const Parameter* p : params) {
      m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (m_.size() != params.size()) throw std::logic_error("Adam: parameter list changed between steps");
  ++step_;
  if (options_.learning_rate == 0.0) return;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    m_[i] = options_.beta1 * m_[i] + (1.0 - options_.beta1) * p.grad;
    v_[i] = options_.beta2 * v_[i] + (1.0 - options_.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= options_.learning_rate * (m_[i].array() / bc1) /
                       ((v_[i].array() / bc2).sqrt() + options_.epsilon);
  }
}

void zero_grad(const std::vector<ad::NamedParameter>& params) {
  for (const auto& p : params) p.param->zero_grad();
}

std::vector<Parameter*> parameter_pointers(const std::vector<ad::NamedParameter>& named) {
  std::vector<Parameter*> out;
  out.reserve(named.size());
  for (const auto& n : named) out.push_back(n.param);
  return out;
}

bool all_finite(const std::vector<ad::NamedParameter>& named) {
  for (const auto& n : named) {
    if (!n.param->value.allFinite()) return false;
  }
  return true;
}

void to_json(nlohmann::json& j, const AdamOptions& o) {
  j = {{"learning_rate", o.learning_rate}, {"beta1", o.beta1}, {"beta2", o.beta2}, {"epsilon", o.epsilon}};
}

void from_json(const nlohmann::json& j, AdamOptions& o) {
  o = AdamOptions{};
  o.learning_rate = j.value("learning_rate", o.learning_rate);
  o.beta1 = j.value("beta1", o.beta1);
  o.beta2 = j.value("beta2", o.beta2);
  o.epsilon = j.value("epsilon", o.epsilon);
}

}  // namespace nn
}  // namespace cys
