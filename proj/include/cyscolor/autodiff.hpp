#pragma once

#include <Eigen/Dense>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace cys::ad {

using Matrix = Eigen::MatrixXd;

/// A trainable tensor with its accumulated gradient. The gradient is a side
/// buffer written by Tape::backward, so it stays writable through const access.
struct Parameter {
  Matrix value;
  mutable Matrix grad;

  Parameter() = default;
  explicit Parameter(Matrix v) : value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
  void zero_grad() const { grad.setZero(value.rows(), value.cols()); }
};

struct NamedParameter {
  std::string name;
  Parameter* param;
};

class Tape;

/// Handle to a node on a Tape. Values are row-per-sample matrices.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Records operations for one forward pass and replays them backwards.
/// Parameter leaves accumulate into Parameter::grad on backward(). A tape in
/// inference mode treats parameters as constants and records no gradients.
class Tape {
 public:
  enum class Mode { Training, Inference };

  explicit Tape(Mode mode = Mode::Training) : mode_(mode) {}

  /// Receives the gradient w.r.t. the node output and the output value itself.
  using Backward = std::function<void(Tape&, const Matrix& grad_out, const Matrix& out)>;

  Var constant(Matrix value);
  Var parameter(const Parameter& p);
  Mode mode() const { return mode_; }

  /// Seeds d(root)/d(root) = 1 for a 1x1 root and propagates to every leaf.
  void backward(Var root);

  const Matrix& value(int id) const { return nodes_[id].value; }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  /// Adds `g` into the gradient of node `id` (no-op for constants).
  void accumulate(int id, const Matrix& g);

  Var push(Matrix value, std::span<const Var> parents, Backward backward);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    const Parameter* param = nullptr;
    bool needs_grad = false;
  };
  std::deque<Node> nodes_;
  Mode mode_;
};

// Elementwise and linear-algebra ops. All operands must live on the same tape.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);                        ///< elementwise
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var add_row(Var x, Var row);                  ///< broadcast a 1xN row over all rows
Var linear(Var x, Var weight, Var bias);      ///< x * W + b
Var weighted_sum(std::span<const Var> terms, std::span<const double> weights);
Var square(Var a);
Var abs(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var leaky_relu(Var a, double slope = 0.2);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var mean(Var a);                              ///< 1x1
Var sum(Var a);                               ///< 1x1
Var mask_rows(Var a, const Eigen::VectorXd& mask);

/// Mean of embedding rows per segment; empty segments give zero rows.
Var segment_mean(Var table, const std::vector<std::vector<int>>& segments);
/// Gathers table rows by index.
Var gather_rows(Var table, std::span<const int> ids);

/// Spatial layout of a batch of images flattened as channel-major rows.
struct Geometry {
  int channels = 1;
  int height = 1;
  int width = 1;
  Eigen::Index size() const { return static_cast<Eigen::Index>(channels) * height * width; }
};

struct ConvSpec {
  int kernel = 3;
  int stride = 1;
  int padding = 1;
  int out_channels = 1;
  Geometry output(const Geometry& in) const;
};

/// 2-D convolution. Weight is (in_channels * k * k) x out_channels, bias 1 x out_channels.
Var conv2d(Var x, const Geometry& in, const ConvSpec& spec, Var weight, Var bias);
Var upsample_nearest2x(Var x, const Geometry& in);
/// Repeats a per-sample feature vector (B x C) over an H x W grid.
Var broadcast_spatial(Var v, int height, int width);

// Operator sugar so loss formulas read the same for doubles and Vars.
inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator-(Var a, double s) { return add_scalar(a, -s); }
inline Var operator+(Var a, double s) { return add_scalar(a, s); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator*(Var a, double s) { return scale(a, s); }

}  // namespace cys::ad
