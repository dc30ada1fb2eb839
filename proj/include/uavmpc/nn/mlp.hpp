#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "uavmpc/nn/params.hpp"

namespace uavmpc::nn {

enum class Squash { None, Tanh };

struct MlpSpec {
  int input = 1;
  std::vector<int> hidden;
  int output = 1;
  Squash squash = Squash::None;

  void validate() const {
    if (input < 1 || output < 1) throw StructuralError("MLP widths must be >= 1");
    for (int h : hidden) {
      if (h < 1) throw StructuralError("MLP widths must be >= 1");
    }
  }
  int layer_count() const { return static_cast<int>(hidden.size()) + 1; }
  int in_width(int l) const { return l == 0 ? input : hidden[l - 1]; }
  int out_width(int l) const { return l == layer_count() - 1 ? output : hidden[l]; }
};

/// Fully connected network with ReLU hidden layers. Inputs are column batches.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(MlpSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    for (int l = 0; l < spec_.layer_count(); ++l) {
      params_.add("dense" + std::to_string(l) + ".w", spec_.out_width(l), spec_.in_width(l));
      params_.add("dense" + std::to_string(l) + ".b", spec_.out_width(l), 1);
    }
  }

  /// Uniform fan-in initialization, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  void init(std::mt19937_64& rng) {
    for (int l = 0; l < spec_.layer_count(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(spec_.in_width(l)));
      fill_uniform(params_[2 * l], bound, rng);
      fill_uniform(params_[2 * l + 1], bound, rng);
    }
  }

  const MlpSpec& spec() const { return spec_; }
  ParamVector& params() { return params_; }
  const ParamVector& params() const { return params_; }

  struct Tape {
    std::vector<Matrix> inputs;  // input to each layer
    std::vector<Matrix> pre;     // pre-activation of each layer
    Matrix output;
  };

  Matrix forward(const Matrix& x) const {
    check_input(x);
    Matrix a = x;
    for (int l = 0; l < spec_.layer_count(); ++l) {
      Matrix z = params_[2 * l] * a;
      z.colwise() += params_[2 * l + 1].col(0);
      a = activate(l, z);
    }
    return a;
  }

  Matrix forward(const Matrix& x, Tape& tape) const {
    check_input(x);
    tape.inputs.clear();
    tape.pre.clear();
    Matrix a = x;
    for (int l = 0; l < spec_.layer_count(); ++l) {
      tape.inputs.push_back(a);
      Matrix z = params_[2 * l] * a;
      z.colwise() += params_[2 * l + 1].col(0);
      a = activate(l, z);
      tape.pre.push_back(std::move(z));
    }
    tape.output = a;
    return a;
  }

  /// Adds d(sum(dout .* output))/dparams into `grads` and returns the gradient
  /// with respect to the input batch.
  Matrix backward(const Tape& tape, const Matrix& dout, ParamVector& grads) const {
    Matrix delta = dout;
    for (int l = spec_.layer_count() - 1; l >= 0; --l) {
      const Matrix& z = tape.pre[l];
      if (l == spec_.layer_count() - 1) {
        if (spec_.squash == Squash::Tanh) delta = delta.cwiseProduct((1.0 - tape.output.array().square()).matrix());
      } else {
        delta = delta.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
      }
      grads[2 * l].noalias() += delta * tape.inputs[l].transpose();
      grads[2 * l + 1] += delta.rowwise().sum();
      delta = params_[2 * l].transpose() * delta;
    }
    return delta;
  }

 private:
  void check_input(const Matrix& x) const {
    if (x.rows() != spec_.input) {
      throw StructuralError("MLP input width " + std::to_string(x.rows()) + " != " + std::to_string(spec_.input));
    }
  }

  Matrix activate(int l, const Matrix& z) const {
    if (l == spec_.layer_count() - 1) {
      return spec_.squash == Squash::Tanh ? Matrix(z.array().tanh()) : z;
    }
    return z.cwiseMax(0.0);
  }

  MlpSpec spec_;
  ParamVector params_;
};

}  // namespace uavmpc::nn
