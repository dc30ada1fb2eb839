#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "uavmpc/nn/adam.hpp"
#include "uavmpc/nn/gradcheck.hpp"
#include "uavmpc/nn/lstm.hpp"
#include "uavmpc/nn/mlp.hpp"
#include "uavmpc/nn/serialize.hpp"

using namespace uavmpc;
using namespace uavmpc::nn;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  Matrix m(r, c);
  fill_uniform(m, 1.0, rng);
  return m;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("uavmpc_" + name)).string();
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

TEST(Mlp, ZeroWeightsGiveZeroOutput) {
  Mlp net({4, {8, 8}, 3, Squash::Tanh});
  const Matrix y = net.forward(Matrix::Ones(4, 5));
  EXPECT_EQ(y, Matrix::Zero(3, 5));
}

TEST(Mlp, IdentityLayer) {
  Mlp net({1, {}, 1, Squash::None});
  net.params()[0](0, 0) = 1.0;
  EXPECT_EQ(net.forward(Matrix::Constant(1, 1, 3.0))(0, 0), 3.0);
}

TEST(Mlp, ShapeMismatchThrows) {
  Mlp net({3, {4}, 1, Squash::None});
  EXPECT_THROW(net.forward(Matrix::Zero(2, 1)), StructuralError);
}

TEST(Mlp, MatchesScalarOracle) {
  std::mt19937_64 rng(5);
  for (Squash sq : {Squash::None, Squash::Tanh}) {
    Mlp net({5, {7, 6}, 3, sq});
    net.init(rng);
    const Matrix x = random_matrix(5, 4, rng);
    const Matrix y = net.forward(x);
    std::vector<std::vector<double>> ws, bs;
    for (int l = 0; l < 3; ++l) {
      const Matrix& W = net.params()[2 * l];
      std::vector<double> wr;
      for (int o = 0; o < W.rows(); ++o)
        for (int i = 0; i < W.cols(); ++i) wr.push_back(W(o, i));
      ws.push_back(wr);
      const Matrix& b = net.params()[2 * l + 1];
      bs.emplace_back(b.data(), b.data() + b.size());
    }
    for (int c = 0; c < 4; ++c) {
      std::vector<double> xin(x.col(c).data(), x.col(c).data() + 5);
      const auto expect = oracle::mlp(ws, bs, {5, 7, 6, 3}, xin, sq == Squash::Tanh);
      for (int o = 0; o < 3; ++o) EXPECT_NEAR(y(o, c), expect[o], 1e-10);
    }
  }
}

TEST(Mlp, ForwardIsPure) {
  std::mt19937_64 rng(6);
  Mlp net({4, {16}, 2, Squash::Tanh});
  net.init(rng);
  const Matrix x = random_matrix(4, 3, rng);
  EXPECT_EQ(net.forward(x), net.forward(x));
}

TEST(GradCheck, MlpTwoByThirtyTwo) {
  std::mt19937_64 rng(7);
  Mlp net({6, {32, 32}, 2, Squash::Tanh});
  net.init(rng);
  const Matrix x = random_matrix(6, 5, rng);
  const Matrix target = random_matrix(2, 5, rng);
  ParamVector grads = net.params().zeros_like();
  Mlp::Tape tape;
  Matrix dy;
  mse(net.forward(x, tape), target, &dy);
  net.backward(tape, dy, grads);
  const ParamVector numeric = central_difference(net.params(), [&] { return mse(net.forward(x), target); });
  EXPECT_LT(max_relative_error(grads, numeric), 1e-4);
}

TEST(GradCheck, MlpInputGradient) {
  std::mt19937_64 rng(8);
  Mlp net({3, {8}, 1, Squash::None});
  net.init(rng);
  Matrix x = random_matrix(3, 1, rng);
  Mlp::Tape tape;
  net.forward(x, tape);
  ParamVector g = net.params().zeros_like();
  const Matrix dx = net.backward(tape, Matrix::Ones(1, 1), g);
  for (int i = 0; i < 3; ++i) {
    Matrix xp = x, xm = x;
    xp(i, 0) += 1e-6;
    xm(i, 0) -= 1e-6;
    const double fd = (net.forward(xp)(0, 0) - net.forward(xm)(0, 0)) / 2e-6;
    EXPECT_NEAR(dx(i, 0), fd, 1e-7);
  }
}

TEST(GradCheck, QuadraticClosedForm) {
  // loss = ||W x - y||^2  ->  dW = 2 (W x - y) x^T
  std::mt19937_64 rng(9);
  Mlp net({3, {}, 2, Squash::None});
  net.init(rng);
  net.params()[1].setZero();
  const Matrix x = random_matrix(3, 1, rng);
  const Matrix y = random_matrix(2, 1, rng);
  Mlp::Tape tape;
  const Matrix out = net.forward(x, tape);
  ParamVector g = net.params().zeros_like();
  net.backward(tape, 2.0 * (out - y), g);
  const Matrix expect = 2.0 * (net.params()[0] * x - y) * x.transpose();
  EXPECT_LT((g[0] - expect).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(GradCheck, UnusedParameterHasZeroGradient) {
  std::mt19937_64 rng(10);
  Mlp net({2, {4}, 2, Squash::None});
  net.init(rng);
  Mlp::Tape tape;
  net.forward(random_matrix(2, 3, rng), tape);
  ParamVector g = net.params().zeros_like();
  Matrix dy = Matrix::Zero(2, 3);
  dy.row(0).setOnes();  // loss ignores output 1
  net.backward(tape, dy, g);
  EXPECT_EQ(g[3](1, 0), 0.0);
  EXPECT_EQ(g[2].row(1).cwiseAbs().sum(), 0.0);
}

TEST(Lstm, ZeroParamsGiveZeroOutput) {
  Lstm net({3, 3, 5, 2});
  auto st = net.zero_state(2);
  const auto ys = net.forward_sequence({Matrix::Ones(3, 2), Matrix::Ones(3, 2)}, st);
  for (const auto& y : ys) EXPECT_EQ(y, Matrix::Zero(2, 2));
}

TEST(Lstm, SingleUnitHandComputation) {
  Lstm net({1, 1, 1, 1});
  auto& p = net.params();
  // w_x rows: i, f, g, o
  p[0] << 0.5, -0.3, 0.8, 0.2;
  p[1] << 0.1, 0.4, -0.6, 0.7;
  p[2] << 0.05, 1.0, -0.1, 0.0;
  p[3] << 1.5;
  p[4] << -0.2;
  auto st = net.zero_state(1);
  st.h[0](0, 0) = 0.3;
  st.c[0](0, 0) = -0.4;
  const double x = 0.9, h = 0.3, c = -0.4;
  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  const double i = sig(0.5 * x + 0.1 * h + 0.05);
  const double f = sig(-0.3 * x + 0.4 * h + 1.0);
  const double g = std::tanh(0.8 * x - 0.6 * h - 0.1);
  const double o = sig(0.2 * x + 0.7 * h);
  const double c2 = f * c + i * g;
  const double h2 = o * std::tanh(c2);
  const Matrix y = net.step(Matrix::Constant(1, 1, x), st);
  EXPECT_NEAR(st.c[0](0, 0), c2, 1e-12);
  EXPECT_NEAR(st.h[0](0, 0), h2, 1e-12);
  EXPECT_NEAR(y(0, 0), 1.5 * h2 - 0.2, 1e-12);
}

TEST(Lstm, SingleStepSequenceEqualsStep) {
  std::mt19937_64 rng(12);
  Lstm net({4, 2, 6, 3});
  net.init(rng);
  const Matrix x = random_matrix(4, 2, rng);
  auto a = net.zero_state(2), b = net.zero_state(2);
  EXPECT_EQ(net.forward_sequence({x}, a)[0], net.step(x, b));
}

TEST(GradCheck, LstmOneLayerEightUnits) {
  std::mt19937_64 rng(13);
  Lstm net({5, 1, 8, 3});
  net.init(rng);
  std::vector<Matrix> xs;
  std::vector<Matrix> targets;
  for (int t = 0; t < 4; ++t) {
    xs.push_back(random_matrix(5, 3, rng));
    targets.push_back(random_matrix(3, 3, rng));
  }
  auto loss = [&](std::vector<Matrix>* douts) {
    auto st = net.zero_state(3);
    const auto ys = net.forward_sequence(xs, st);
    double l = 0;
    for (int t = 0; t < 4; ++t) {
      if (t == 1) continue;  // no loss at step 1
      Matrix d;
      l += mse(ys[t], targets[t], &d);
      if (douts) (*douts)[t] = d;
    }
    return l;
  };
  std::vector<Matrix> douts(4);
  loss(&douts);
  auto st = net.zero_state(3);
  Lstm::Tape tape;
  net.forward_sequence(xs, st, &tape);
  ParamVector g = net.params().zeros_like();
  net.backward_sequence(tape, douts, g);
  const ParamVector numeric = central_difference(net.params(), [&] { return loss(nullptr); });
  EXPECT_LT(max_relative_error(g, numeric), 1e-4);
}

TEST(GradCheck, StackedLstm) {
  std::mt19937_64 rng(14);
  Lstm net({3, 2, 4, 2});
  net.init(rng);
  std::vector<Matrix> xs = {random_matrix(3, 2, rng), random_matrix(3, 2, rng), random_matrix(3, 2, rng)};
  const Matrix target = random_matrix(2, 2, rng);
  auto f = [&] {
    auto st = net.zero_state(2);
    return mse(net.forward_sequence(xs, st).back(), target);
  };
  auto st = net.zero_state(2);
  Lstm::Tape tape;
  const auto ys = net.forward_sequence(xs, st, &tape);
  std::vector<Matrix> douts(3);
  mse(ys.back(), target, &douts[2]);
  ParamVector g = net.params().zeros_like();
  net.backward_sequence(tape, douts, g);
  EXPECT_LT(max_relative_error(g, central_difference(net.params(), f)), 1e-4);
}

TEST(Adam, ZeroGradientLeavesParams) {
  ParamVector p;
  p.add("w", 2, 2);
  p[0] << 1, 2, 3, 4;
  const ParamVector before = p;
  Adam opt(p, {0.01});
  opt.step(p, p.zeros_like());
  EXPECT_EQ(p, before);
}

TEST(Adam, FirstStepIsSignScaled) {
  ParamVector p;
  p.add("w", 1, 1);
  p[0](0, 0) = 1.0;
  ParamVector g = p.zeros_like();
  g[0](0, 0) = 0.3;
  Adam opt(p, {0.01});
  opt.step(p, g);
  // m_hat = g, v_hat = g^2 -> delta = -lr * g / (|g| + eps)
  EXPECT_NEAR(p[0](0, 0), 1.0 - 0.01 * 0.3 / (0.3 + 1e-8), 1e-15);
}

TEST(Adam, RejectsNonPositiveLearningRate) { EXPECT_THROW((AdamConfig{0.0}.validate()), ConfigError); }

TEST(SoftUpdate, Extremes) {
  ParamVector t, o;
  t.add("w", 1, 3);
  o.add("w", 1, 3);
  t[0] << 1, 2, 3;
  o[0] << 4, 5, 6;
  ParamVector a = t;
  soft_update(a, o, 1.0);
  EXPECT_EQ(a, o);
  ParamVector b = t;
  soft_update(b, o, 0.0);
  EXPECT_EQ(b, t);
  ParamVector s;
  s.add("w", 1, 1);
  ParamVector on = s;
  on[0](0, 0) = 1.0;
  soft_update(s, on, 0.001);
  EXPECT_DOUBLE_EQ(s[0](0, 0), 0.001);
}

TEST(SoftUpdate, GeometricContraction) {
  std::mt19937_64 rng(15);
  Mlp online({13, {32, 32}, 1, Squash::None}), target({13, {32, 32}, 1, Squash::None});
  online.init(rng);
  target.init(rng);
  const double gap0 = target.params().distance(online.params());
  const double tau = 0.001;
  for (int n = 1; n <= 500; ++n) {
    soft_update(target.params(), online.params(), tau);
    if (n % 100 == 0) {
      EXPECT_NEAR(target.params().distance(online.params()), std::pow(1 - tau, n) * gap0, 1e-9);
    }
  }
}

TEST(Serialize, RoundTripIsBitwise) {
  std::mt19937_64 rng(16);
  Lstm net({15, 2, 8, 13});
  net.init(rng);
  const auto path = temp_path("roundtrip.params");
  save_params(path, net.params());
  Lstm other({15, 2, 8, 13});
  load_params(path, other.params());
  EXPECT_EQ(other.params(), net.params());
  std::filesystem::remove(path);
}

TEST(Serialize, WrongSpecThrows) {
  std::mt19937_64 rng(17);
  Mlp net({4, {8}, 2, Squash::None});
  net.init(rng);
  const auto path = temp_path("wrongspec.params");
  save_params(path, net.params());
  Mlp other({4, {9}, 2, Squash::None});
  EXPECT_THROW(load_params(path, other.params()), StructuralError);
  std::filesystem::remove(path);
}

TEST(Serialize, CorruptFileThrows) {
  std::istringstream junk("not a parameter file at all");
  EXPECT_THROW(read_params(junk), StructuralError);
  std::ostringstream os;
  ParamVector p;
  p.add("w", 3, 3);
  write_params(os, p);
  std::istringstream truncated(os.str().substr(0, os.str().size() - 5));
  EXPECT_THROW(read_params(truncated), StructuralError);
}

TEST(Serialize, BytesAreStable) {
  std::mt19937_64 rng(18);
  Mlp net({4, {8}, 2, Squash::None});
  net.init(rng);
  std::ostringstream a, b;
  write_params(a, net.params());
  write_params(b, net.params());
  EXPECT_EQ(fnv1a(a.str()), fnv1a(b.str()));
  std::istringstream in(a.str());
  ParamVector back = read_params(in);
  std::ostringstream c;
  write_params(c, back);
  EXPECT_EQ(c.str(), a.str());
}
