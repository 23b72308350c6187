#include "cyscolor/autodiff.hpp"

#include <stdexcept>

#include "cyscolor/error.hpp"

namespace cys::ad {

const Matrix& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::parameter(const Parameter& p) {
  Node n;
  n.value = p.value;
  if (mode_ == Mode::Training) {
    n.param = &p;
    n.needs_grad = true;
  }
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::push(Matrix value, std::span<const Var> parents, Backward backward) {
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) {
    if (p.tape() != this) throw std::logic_error("autodiff: operands from different tapes");
    n.needs_grad = n.needs_grad || nodes_[p.id()].needs_grad;
  }
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

void Tape::accumulate(int id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var root) {
  if (root.tape() != this) throw std::logic_error("autodiff: root from another tape");
  if (root.rows() != 1 || root.cols() != 1) throw std::logic_error("autodiff: backward needs a scalar root");
  accumulate(root.id(), Matrix::Ones(1, 1));
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.param) {
      n.param->grad += n.grad;
    } else if (n.backward) {
      n.backward(*this, n.grad, n.value);
    }
    n.grad.resize(0, 0);
  }
}

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ValidationError(std::string("autodiff ") + op + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()));
  }
}

Var unary(Var a, Matrix out, std::function<Matrix(const Matrix& g, const Matrix& x, const Matrix& y)> dx) {
  const int ia = a.id();
  const Var parents[] = {a};
  return a.tape()->push(std::move(out), parents, [ia, dx = std::move(dx)](Tape& t, const Matrix& g, const Matrix& y) {
    t.accumulate(ia, dx(g, t.value(ia), y));
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw ValidationError("autodiff matmul: inner dimensions differ");
  const int ia = a.id(), ib = b.id();
  const Var parents[] = {a, b};
  return a.tape()->push(a.value() * b.value(), parents, [ia, ib](Tape& t, const Matrix& g, const Matrix&) {
    if (t.needs_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.needs_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  const int ia = a.id(), ib = b.id();
  const Var parents[] = {a, b};
  return a.tape()->push(a.value() + b.value(), parents, [ia, ib](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  const int ia = a.id(), ib = b.id();
  const Var parents[] = {a, b};
  return a.tape()->push(a.value() - b.value(), parents, [ia, ib](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(ia, g);
    if (t.needs_grad(ib)) t.accumulate(ib, -g);
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  const int ia = a.id(), ib = b.id();
  const Var parents[] = {a, b};
  return a.tape()->push(a.value().cwiseProduct(b.value()), parents,
                        [ia, ib](Tape& t, const Matrix& g, const Matrix&) {
                          if (t.needs_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
                          if (t.needs_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
                        });
}

Var scale(Var a, double s) {
  return unary(a, a.value() * s, [s](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g * s; });
}

Var add_scalar(Var a, double s) {
  return unary(a, (a.value().array() + s).matrix(),
               [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g; });
}

Var add_row(Var x, Var row) {
  if (row.rows() != 1 || row.cols() != x.cols()) throw ValidationError("autodiff add_row: bias shape mismatch");
  const int ix = x.id(), ir = row.id();
  const Var parents[] = {x, row};
  Matrix out = x.value();
  out.rowwise() += row.value().row(0);
  return x.tape()->push(std::move(out), parents, [ix, ir](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(ix, g);
    if (t.needs_grad(ir)) t.accumulate(ir, g.colwise().sum());
  });
}

Var linear(Var x, Var weight, Var bias) { return add_row(matmul(x, weight), bias); }

Var weighted_sum(std::span<const Var> terms, std::span<const double> weights) {
  if (terms.empty() || terms.size() != weights.size()) throw ValidationError("weighted_sum: arity mismatch");
  Matrix out = Matrix::Zero(terms[0].rows(), terms[0].cols());
  std::vector<int> ids;
  std::vector<double> w(weights.begin(), weights.end());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    require_same_shape(terms[0], terms[i], "weighted_sum");
    out += weights[i] * terms[i].value();
    ids.push_back(terms[i].id());
  }
  return terms[0].tape()->push(std::move(out), terms, [ids, w](Tape& t, const Matrix& g, const Matrix&) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (t.needs_grad(ids[i])) t.accumulate(ids[i], w[i] * g);
    }
  });
}

Var square(Var a) {
  return unary(a, a.value().array().square().matrix(), [](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix {
    return (2.0 * g.array() * x.array()).matrix();
  });
}

Var abs(Var a) {
  return unary(a, a.value().cwiseAbs(), [](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix {
    return (g.array() * x.array().sign()).matrix();
  });
}

Var tanh(Var a) {
  return unary(a, a.value().array().tanh().matrix(), [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix {
    return (g.array() * (1.0 - y.array().square())).matrix();
  });
}

Var sigmoid(Var a) {
  Matrix out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return unary(a, std::move(out), [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix {
    return (g.array() * y.array() * (1.0 - y.array())).matrix();
  });
}

Var leaky_relu(Var a, double slope) {
  Matrix out = a.value().unaryExpr([slope](double v) { return v > 0 ? v : slope * v; });
  return unary(a, std::move(out), [slope](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix {
    return g.binaryExpr(x, [slope](double gv, double xv) { return xv > 0 ? gv : slope * gv; });
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ValidationError("concat_cols: no operands");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ValidationError("concat_cols: row count mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> slots;
  Eigen::Index offset = 0;
  for (const Var& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    slots.emplace_back(p.id(), offset);
    offset += p.cols();
  }
  return parts[0].tape()->push(std::move(out), parts, [slots](Tape& t, const Matrix& g, const Matrix&) {
    for (const auto& [id, off] : slots) {
      if (t.needs_grad(id)) t.accumulate(id, g.middleCols(off, t.value(id).cols()));
    }
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ValidationError("slice_cols: out of range");
  const Eigen::Index total = a.cols();
  return unary(a, a.value().middleCols(start, count),
               [start, count, total](const Matrix& g, const Matrix&, const Matrix&) -> Matrix {
                 Matrix full = Matrix::Zero(g.rows(), total);
                 full.middleCols(start, count) = g;
                 return full;
               });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  Matrix out(1, 1);
  out(0, 0) = a.value().mean();
  return unary(a, std::move(out), [n](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix {
    return Matrix::Constant(x.rows(), x.cols(), g(0, 0) / n);
  });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return unary(a, std::move(out), [](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix {
    return Matrix::Constant(x.rows(), x.cols(), g(0, 0));
  });
}

Var mask_rows(Var a, const Eigen::VectorXd& mask) {
  if (mask.size() != a.rows()) throw ValidationError("mask_rows: mask length mismatch");
  return unary(a, mask.asDiagonal() * a.value(), [mask](const Matrix& g, const Matrix&, const Matrix&) -> Matrix {
    return mask.asDiagonal() * g;
  });
}

Var segment_mean(Var table, const std::vector<std::vector<int>>& segments) {
  const Matrix& tv = table.value();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(segments.size()), tv.cols());
  for (std::size_t s = 0; s < segments.size(); ++s) {
    for (int id : segments[s]) {
      if (id < 0 || id >= tv.rows()) throw ValidationError("segment_mean: index out of range");
      out.row(s) += tv.row(id);
    }
    if (!segments[s].empty()) out.row(s) /= static_cast<double>(segments[s].size());
  }
  return unary(table, std::move(out), [segments](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix {
    Matrix dt = Matrix::Zero(x.rows(), x.cols());
    for (std::size_t s = 0; s < segments.size(); ++s) {
      if (segments[s].empty()) continue;
      const double inv = 1.0 / static_cast<double>(segments[s].size());
      for (int id : segments[s]) dt.row(id) += inv * g.row(s);
    }
    return dt;
  });
}

Var gather_rows(Var table, std::span<const int> ids) {
  const Matrix& tv = table.value();
  Matrix out(static_cast<Eigen::Index>(ids.size()), tv.cols());
  std::vector<int> idx(ids.begin(), ids.end());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= tv.rows()) throw ValidationError("gather_rows: index out of range");
    out.row(i) = tv.row(idx[i]);
  }
  return unary(table, std::move(out), [idx](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix {
    Matrix dt = Matrix::Zero(x.rows(), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) dt.row(idx[i]) += g.row(i);
    return dt;
  });
}

// ---------------------------------------------------------------------------
// Convolution via per-sample im2col.

Geometry ConvSpec::output(const Geometry& in) const {
  return {out_channels, (in.height + 2 * padding - kernel) / stride + 1, (in.width + 2 * padding - kernel) / stride + 1};
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// cols(pos, (c * k + ky) * k + kx) = x(c, oy * s - p + ky, ox * s - p + kx), zero outside.
RowMatrix im2col(const Eigen::Ref<const Eigen::RowVectorXd>& x, const Geometry& in, const ConvSpec& spec,
                 const Geometry& out) {
  const int k = spec.kernel;
  RowMatrix cols = RowMatrix::Zero(static_cast<Eigen::Index>(out.height) * out.width,
                                   static_cast<Eigen::Index>(in.channels) * k * k);
  for (int c = 0; c < in.channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Eigen::Index col = (static_cast<Eigen::Index>(c) * k + ky) * k + kx;
        for (int oy = 0; oy < out.height; ++oy) {
          const int iy = oy * spec.stride - spec.padding + ky;
          if (iy < 0 || iy >= in.height) continue;
          for (int ox = 0; ox < out.width; ++ox) {
            const int ix = ox * spec.stride - spec.padding + kx;
            if (ix < 0 || ix >= in.width) continue;
            cols(static_cast<Eigen::Index>(oy) * out.width + ox, col) =
                x[(static_cast<Eigen::Index>(c) * in.height + iy) * in.width + ix];
          }
        }
      }
    }
  }
  return cols;
}

void col2im_add(const RowMatrix& dcols, const Geometry& in, const ConvSpec& spec, const Geometry& out,
                Eigen::Ref<Eigen::RowVectorXd> dx) {
  const int k = spec.kernel;
  for (int c = 0; c < in.channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Eigen::Index col = (static_cast<Eigen::Index>(c) * k + ky) * k + kx;
        for (int oy = 0; oy < out.height; ++oy) {
          const int iy = oy * spec.stride - spec.padding + ky;
          if (iy < 0 || iy >= in.height) continue;
          for (int ox = 0; ox < out.width; ++ox) {
            const int ix = ox * spec.stride - spec.padding + kx;
            if (ix < 0 || ix >= in.width) continue;
            dx[(static_cast<Eigen::Index>(c) * in.height + iy) * in.width + ix] +=
                dcols(static_cast<Eigen::Index>(oy) * out.width + ox, col);
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(Var x, const Geometry& in, const ConvSpec& spec, Var weight, Var bias) {
  if (x.cols() != in.size()) throw ValidationError("conv2d: input width does not match geometry");
  const Eigen::Index patch = static_cast<Eigen::Index>(in.channels) * spec.kernel * spec.kernel;
  if (weight.rows() != patch || weight.cols() != spec.out_channels) throw ValidationError("conv2d: weight shape");
  if (bias.rows() != 1 || bias.cols() != spec.out_channels) throw ValidationError("conv2d: bias shape");
  const Geometry out = spec.output(in);
  if (out.height <= 0 || out.width <= 0) throw ValidationError("conv2d: input smaller than kernel");
  const Eigen::Index positions = static_cast<Eigen::Index>(out.height) * out.width;

  const Matrix& xv = x.value();
  const Matrix& wv = weight.value();
  const Eigen::RowVectorXd bv = bias.value().row(0);
  Matrix result(xv.rows(), out.size());
  for (Eigen::Index b = 0; b < xv.rows(); ++b) {
    const RowMatrix cols = im2col(xv.row(b), in, spec, out);
    Eigen::MatrixXd y = cols * wv;  // positions x out_channels
    y.rowwise() += bv;
    // Channel-major flatten: column-major storage of y is exactly that order.
    result.row(b) = Eigen::Map<const Eigen::RowVectorXd>(y.data(), positions * spec.out_channels);
  }

  const int ix = x.id(), iw = weight.id(), ib = bias.id();
  const Var parents[] = {x, weight, bias};
  return x.tape()->push(std::move(result), parents,
                        [ix, iw, ib, in, spec, out, positions](Tape& t, const Matrix& g, const Matrix&) {
                          const Matrix& xv = t.value(ix);
                          const Matrix& wv = t.value(iw);
                          Matrix dw = Matrix::Zero(wv.rows(), wv.cols());
                          Matrix db = Matrix::Zero(1, wv.cols());
                          Matrix dx = Matrix::Zero(xv.rows(), xv.cols());
                          const bool want_x = t.needs_grad(ix);
                          for (Eigen::Index b = 0; b < xv.rows(); ++b) {
                            const Eigen::RowVectorXd grow = g.row(b);
                            const Eigen::Map<const Eigen::MatrixXd> gy(grow.data(), positions, spec.out_channels);
                            const RowMatrix cols = im2col(xv.row(b), in, spec, out);
                            dw.noalias() += cols.transpose() * gy;
                            db += gy.colwise().sum();
                            if (want_x) {
                              const RowMatrix dcols = gy * wv.transpose();
                              Eigen::RowVectorXd dxb = Eigen::RowVectorXd::Zero(xv.cols());
                              col2im_add(dcols, in, spec, out, dxb);
                              dx.row(b) = dxb;
                            }
                          }
                          if (want_x) t.accumulate(ix, dx);
                          if (t.needs_grad(iw)) t.accumulate(iw, dw);
                          if (t.needs_grad(ib)) t.accumulate(ib, db);
                        });
}

Var upsample_nearest2x(Var x, const Geometry& in) {
  if (x.cols() != in.size()) throw ValidationError("upsample: input width does not match geometry");
  const int oh = in.height * 2, ow = in.width * 2;
  const auto src_index = [in](int c, int y, int xx) {
    return (static_cast<Eigen::Index>(c) * in.height + y / 2) * in.width + xx / 2;
  };
  const Matrix& xv = x.value();
  Matrix out(xv.rows(), static_cast<Eigen::Index>(in.channels) * oh * ow);
  for (int c = 0; c < in.channels; ++c) {
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx) {
        out.col((static_cast<Eigen::Index>(c) * oh + y) * ow + xx) = xv.col(src_index(c, y, xx));
      }
    }
  }
  return unary(x, std::move(out), [in, oh, ow, src_index](const Matrix& g, const Matrix& xv, const Matrix&) -> Matrix {
    Matrix dx = Matrix::Zero(xv.rows(), xv.cols());
    for (int c = 0; c < in.channels; ++c) {
      for (int y = 0; y < oh; ++y) {
        for (int xx = 0; xx < ow; ++xx) {
          dx.col(src_index(c, y, xx)) += g.col((static_cast<Eigen::Index>(c) * oh + y) * ow + xx);
        }
      }
    }
    return dx;
  });
}

Var broadcast_spatial(Var v, int height, int width) {
  const Eigen::Index channels = v.cols();
  const Eigen::Index area = static_cast<Eigen::Index>(height) * width;
  Matrix out(v.rows(), channels * area);
  for (Eigen::Index c = 0; c < channels; ++c) {
    out.middleCols(c * area, area) = v.value().col(c).replicate(1, area);
  }
  return unary(v, std::move(out), [channels, area](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix {
    Matrix dv(x.rows(), channels);
    for (Eigen::Index c = 0; c < channels; ++c) dv.col(c) = g.middleCols(c * area, area).rowwise().sum();
    return dv;
  });
}

}  // namespace cys::ad
