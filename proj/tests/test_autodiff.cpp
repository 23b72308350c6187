#include <doctest.h>

#include <random>

#include "cyscolor/autodiff.hpp"
#include "cyscolor/error.hpp"
#include "support/gradcheck.hpp"

using namespace cys;
using namespace cys::ad;

namespace {

using Build = std::function<Var(Tape&, const std::vector<Var>&)>;

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng);
  return m;
}

// Projects the op output onto fixed random weights so every output entry
// contributes to the scalar loss.
double check_op(std::vector<Parameter>& params, const Build& build, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  Matrix proj;
  auto loss = [&](Tape& tape) {
    std::vector<Var> leaves;
    for (auto& p : params) leaves.push_back(tape.parameter(p));
    Var out = build(tape, leaves);
    if (proj.size() == 0) proj = random_matrix(out.rows(), out.cols(), rng);
    return sum(mul(out, tape.constant(proj)));
  };
  for (auto& p : params) p.zero_grad();
  Tape tape;
  tape.backward(loss(tape));
  std::vector<Matrix> analytic;
  std::vector<Parameter*> ptrs;
  for (auto& p : params) {
    analytic.push_back(p.grad);
    ptrs.push_back(&p);
  }
  const auto rep = gradcheck::compare(ptrs, [&] {
    Tape t(Tape::Mode::Inference);
    return loss(t).value()(0, 0);
  }, analytic);
  return rep.worst_relative;
}

std::vector<Parameter> make_params(std::initializer_list<std::pair<int, int>> shapes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Parameter> out;
  for (auto [r, c] : shapes) out.emplace_back(random_matrix(r, c, rng));
  return out;
}

// Direct convolution with channel-major rows, used as a forward oracle.
Matrix naive_conv(const Matrix& x, const Geometry& in, const ConvSpec& s, const Matrix& w, const Matrix& b) {
  const Geometry out = s.output(in);
  Matrix y(x.rows(), out.size());
  for (Eigen::Index n = 0; n < x.rows(); ++n) {
    for (int oc = 0; oc < s.out_channels; ++oc) {
      for (int oy = 0; oy < out.height; ++oy) {
        for (int ox = 0; ox < out.width; ++ox) {
          double acc = b(0, oc);
          for (int c = 0; c < in.channels; ++c) {
            for (int ky = 0; ky < s.kernel; ++ky) {
              for (int kx = 0; kx < s.kernel; ++kx) {
                const int iy = oy * s.stride - s.padding + ky, ix = ox * s.stride - s.padding + kx;
                if (iy < 0 || ix < 0 || iy >= in.height || ix >= in.width) continue;
                acc += x(n, (c * in.height + iy) * in.width + ix) * w((c * s.kernel + ky) * s.kernel + kx, oc);
              }
            }
          }
          y(n, (oc * out.height + oy) * out.width + ox) = acc;
        }
      }
    }
  }
  return y;
}

constexpr double kTol = 1e-6;

}  // namespace

TEST_CASE("elementwise and linear ops match finite differences") {
  auto p2 = make_params({{3, 4}, {3, 4}}, 1);
  CHECK(check_op(p2, [](Tape&, const std::vector<Var>& v) { return add(v[0], v[1]); }) < kTol);
  CHECK(check_op(p2, [](Tape&, const std::vector<Var>& v) { return sub(v[0], v[1]); }) < kTol);
  CHECK(check_op(p2, [](Tape&, const std::vector<Var>& v) { return mul(v[0], v[1]); }) < kTol);
  auto p1 = make_params({{3, 4}}, 2);
  CHECK(check_op(p1, [](Tape&, const std::vector<Var>& v) { return scale(v[0], -1.7); }) < kTol);
  CHECK(check_op(p1, [](Tape&, const std::vector<Var>& v) { return add_scalar(v[0], 0.3); }) < kTol);
  CHECK(check_op(p1, [](Tape&, const std::vector<Var>& v) { return square(v[0]); }) < kTol);
  CHECK(check_op(p1, [](Tape&, const std::vector<Var>& v) { return abs(v[0]); }) < kTol);
  CHECK(check_op(p1, [](Tape&, const std::vector<Var>& v) { return tanh(v[0]); }) < kTol);
  CHECK(check_op(p1, [](Tape&, const std::vector<Var>& v) { return sigmoid(v[0]); }) < kTol);
  CHECK(check_op(p1, [](Tape&, const std::vector<Var>& v) { return leaky_relu(v[0], 0.2); }) < kTol);
  CHECK(check_op(p1, [](Tape&, const std::vector<Var>& v) { return mean(v[0]); }) < kTol);
  CHECK(check_op(p1, [](Tape&, const std::vector<Var>& v) { return slice_cols(v[0], 1, 2); }) < kTol);
  CHECK(check_op(p1, [](Tape&, const std::vector<Var>& v) {
          return mask_rows(v[0], Eigen::Vector3d(1.0, 0.0, 1.0));
        }) < kTol);

  auto mm = make_params({{3, 4}, {4, 2}, {1, 2}}, 3);
  CHECK(check_op(mm, [](Tape&, const std::vector<Var>& v) { return matmul(v[0], v[1]); }) < kTol);
  CHECK(check_op(mm, [](Tape&, const std::vector<Var>& v) { return linear(v[0], v[1], v[2]); }) < kTol);

  auto cat = make_params({{2, 3}, {2, 1}, {2, 2}}, 4);
  CHECK(check_op(cat, [](Tape&, const std::vector<Var>& v) {
          const Var parts[] = {v[0], v[1], v[2]};
          return concat_cols(parts);
        }) < kTol);
  auto ws = make_params({{2, 3}, {2, 3}}, 5);
  CHECK(check_op(ws, [](Tape&, const std::vector<Var>& v) {
          const Var terms[] = {v[0], v[1]};
          const double w[] = {0.25, -2.0};
          return weighted_sum(terms, w);
        }) < kTol);
}

TEST_CASE("lookup ops match finite differences") {
  auto table = make_params({{6, 3}}, 6);
  CHECK(check_op(table, [](Tape&, const std::vector<Var>& v) {
          return segment_mean(v[0], {{1, 2, 2}, {}, {5}});
        }) < kTol);
  CHECK(check_op(table, [](Tape&, const std::vector<Var>& v) {
          const int ids[] = {0, 3, 3};
          return gather_rows(v[0], ids);
        }) < kTol);
}

TEST_CASE("convolution matches a direct loop and finite differences") {
  const Geometry in{2, 5, 6};
  for (int stride : {1, 2}) {
    ConvSpec spec;
    spec.kernel = 3;
    spec.stride = stride;
    spec.padding = 1;
    spec.out_channels = 3;
    auto p = make_params({{2, static_cast<int>(in.size())}, {18, 3}, {1, 3}}, 7 + stride);
    Tape tape(Tape::Mode::Inference);
    const Var y = conv2d(tape.parameter(p[0]), in, spec, tape.parameter(p[1]), tape.parameter(p[2]));
    const Matrix ref = naive_conv(p[0].value, in, spec, p[1].value, p[2].value);
    CHECK((y.value() - ref).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(y.cols() == spec.output(in).size());
    CHECK(check_op(p, [&](Tape&, const std::vector<Var>& v) { return conv2d(v[0], in, spec, v[1], v[2]); }) < kTol);
  }
}

TEST_CASE("spatial helpers") {
  const Geometry g{2, 2, 3};
  auto p = make_params({{2, static_cast<int>(g.size())}}, 9);
  CHECK(check_op(p, [&](Tape&, const std::vector<Var>& v) { return upsample_nearest2x(v[0], g); }) < kTol);
  Tape tape(Tape::Mode::Inference);
  const Var up = upsample_nearest2x(tape.parameter(p[0]), g);
  CHECK(up.cols() == 2 * 4 * 6);
  CHECK(up.value()(1, (1 * 4 + 3) * 6 + 5) == p[0].value(1, (1 * 2 + 1) * 3 + 2));

  auto q = make_params({{2, 3}}, 10);
  CHECK(check_op(q, [](Tape&, const std::vector<Var>& v) { return broadcast_spatial(v[0], 2, 2); }) < kTol);
}

TEST_CASE("inference tapes record no parameter gradients") {
  auto p = make_params({{2, 2}}, 11);
  p[0].zero_grad();
  Tape tape(Tape::Mode::Inference);
  const Var l = sum(square(tape.parameter(p[0])));
  tape.backward(l);
  CHECK(p[0].grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradients accumulate across backward passes") {
  auto p = make_params({{1, 3}}, 12);
  p[0].zero_grad();
  for (int i = 0; i < 2; ++i) {
    Tape tape;
    tape.backward(sum(tape.parameter(p[0])));
  }
  CHECK(p[0].grad.isApprox(Matrix::Constant(1, 3, 2.0)));
}

TEST_CASE("shape errors are reported") {
  auto p = make_params({{2, 3}, {2, 2}}, 13);
  Tape tape;
  CHECK_THROWS_AS(add(tape.parameter(p[0]), tape.parameter(p[1])), ValidationError);
  CHECK_THROWS_AS(matmul(tape.parameter(p[0]), tape.parameter(p[1])), ValidationError);
}
