#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "uavmpc/nn/params.hpp"

namespace uavmpc::nn {

struct LstmSpec {
  int input = 1;
  int layers = 3;
  int hidden = 200;
  int output = 1;

  void validate() const {
    if (input < 1 || layers < 1 || hidden < 1 || output < 1) throw StructuralError("LSTM widths must be >= 1");
  }
};

/// Stacked LSTM with a linear read-out on the top layer's hidden state.
///
/// Gate rows are ordered [input, forget, cell, output]:
///   i = sig(z_i), f = sig(z_f), g = tanh(z_g), o = sig(z_o)
///   c' = f*c + i*g,  h' = o*tanh(c')
/// with z = W_x x + W_h h + b per layer.
class Lstm {
 public:
  struct State {
    std::vector<Matrix> h;  // per layer, hidden x batch
    std::vector<Matrix> c;
  };

  struct LayerStep {
    Matrix x, h_prev, c_prev, i, f, g, o, tanh_c;
  };

  struct Tape {
    std::vector<std::vector<LayerStep>> steps;  // [time][layer]
  };

  Lstm() = default;
  explicit Lstm(LstmSpec spec) : spec_(spec) {
    spec_.validate();
    const int H = spec_.hidden;
    for (int l = 0; l < spec_.layers; ++l) {
      const std::string p = "lstm" + std::to_string(l);
      params_.add(p + ".w_x", 4 * H, l == 0 ? spec_.input : H);
      params_.add(p + ".w_h", 4 * H, H);
      params_.add(p + ".b", 4 * H, 1);
    }
    params_.add("head.w", spec_.output, H);
    params_.add("head.b", spec_.output, 1);
  }

  /// Uniform U(-1/sqrt(H), 1/sqrt(H)) for all weights; forget-gate bias starts at 1.
  void init(std::mt19937_64& rng) {
    const int H = spec_.hidden;
    const double bound = 1.0 / std::sqrt(static_cast<double>(H));
    for (std::size_t i = 0; i < params_.size(); ++i) fill_uniform(params_[i], bound, rng);
    for (int l = 0; l < spec_.layers; ++l) params_[bias(l)].block(H, 0, H, 1).setOnes();
  }

  const LstmSpec& spec() const { return spec_; }
  ParamVector& params() { return params_; }
  const ParamVector& params() const { return params_; }

  State zero_state(Eigen::Index batch) const {
    State s;
    for (int l = 0; l < spec_.layers; ++l) {
      s.h.push_back(Matrix::Zero(spec_.hidden, batch));
      s.c.push_back(Matrix::Zero(spec_.hidden, batch));
    }
    return s;
  }

  /// Repeats a batch-1 state across `batch` columns.
  static State broadcast(const State& s, Eigen::Index batch) {
    State out;
    for (std::size_t l = 0; l < s.h.size(); ++l) {
      out.h.push_back(s.h[l].col(0).replicate(1, batch));
      out.c.push_back(s.c[l].col(0).replicate(1, batch));
    }
    return out;
  }

  /// Advances one time step in place and returns the read-out (output x batch).
  Matrix step(const Matrix& x, State& st, std::vector<LayerStep>* record = nullptr) const {
    if (x.rows() != spec_.input) throw StructuralError("LSTM input width mismatch");
    const int H = spec_.hidden;
    const Eigen::Index B = x.cols();
    if (st.h.size() != static_cast<std::size_t>(spec_.layers) || st.h[0].cols() != B) {
      throw StructuralError("LSTM state does not match batch");
    }
    Matrix in = x;
    for (int l = 0; l < spec_.layers; ++l) {
      Matrix z = params_[wx(l)] * in;
      z.noalias() += params_[wh(l)] * st.h[l];
      z.colwise() += params_[bias(l)].col(0);
      Matrix i = sigmoid(z.topRows(H));
      Matrix f = sigmoid(z.middleRows(H, H));
      Matrix g = z.middleRows(2 * H, H).array().tanh().matrix();
      Matrix o = sigmoid(z.bottomRows(H));
      Matrix c = f.cwiseProduct(st.c[l]) + i.cwiseProduct(g);
      Matrix tc = c.array().tanh().matrix();
      Matrix h = o.cwiseProduct(tc);
      if (record) {
        record->push_back({in, st.h[l], st.c[l], i, f, g, o, tc});
      }
      st.c[l] = std::move(c);
      st.h[l] = std::move(h);
      in = st.h[l];
    }
    Matrix y = params_[head_w()] * in;
    y.colwise() += params_[head_b()].col(0);
    return y;
  }

  std::vector<Matrix> forward_sequence(const std::vector<Matrix>& xs, State& st, Tape* tape = nullptr) const {
    if (xs.empty()) throw StructuralError("LSTM sequence must be nonempty");
    std::vector<Matrix> ys;
    ys.reserve(xs.size());
    if (tape) tape->steps.clear();
    for (const auto& x : xs) {
      if (tape) {
        tape->steps.emplace_back();
        ys.push_back(step(x, st, &tape->steps.back()));
      } else {
        ys.push_back(step(x, st));
      }
    }
    return ys;
  }

  /// Backpropagation through time. `douts[t]` is dLoss/dy_t; an empty matrix
  /// means no loss at step t. Gradients are added into `grads`; returns dLoss/dx_t.
  std::vector<Matrix> backward_sequence(const Tape& tape, const std::vector<Matrix>& douts,
                                        ParamVector& grads) const {
    const int H = spec_.hidden;
    const int L = spec_.layers;
    const std::size_t T = tape.steps.size();
    const Eigen::Index B = tape.steps.front().front().x.cols();
    std::vector<Matrix> dh_next(L, Matrix::Zero(H, B));
    std::vector<Matrix> dc_next(L, Matrix::Zero(H, B));
    std::vector<Matrix> dxs(T);
    for (std::size_t tt = T; tt-- > 0;) {
      const auto& rec = tape.steps[tt];
      Matrix dh_above = Matrix::Zero(H, B);
      if (douts[tt].size() > 0) {
        const Matrix& top_h = rec[L - 1].tanh_c.cwiseProduct(rec[L - 1].o);
        grads[head_w()].noalias() += douts[tt] * top_h.transpose();
        grads[head_b()] += douts[tt].rowwise().sum();
        dh_above.noalias() = params_[head_w()].transpose() * douts[tt];
      }
      for (int l = L - 1; l >= 0; --l) {
        const LayerStep& s = rec[l];
        Matrix dh = dh_above + dh_next[l];
        Matrix dc = dc_next[l] + dh.cwiseProduct(s.o).cwiseProduct((1.0 - s.tanh_c.array().square()).matrix());
        Matrix dz(4 * H, B);
        dz.topRows(H) = dc.cwiseProduct(s.g).cwiseProduct(sig_grad(s.i));
        dz.middleRows(H, H) = dc.cwiseProduct(s.c_prev).cwiseProduct(sig_grad(s.f));
        dz.middleRows(2 * H, H) = dc.cwiseProduct(s.i).cwiseProduct((1.0 - s.g.array().square()).matrix());
        dz.bottomRows(H) = dh.cwiseProduct(s.tanh_c).cwiseProduct(sig_grad(s.o));
        dc_next[l] = dc.cwiseProduct(s.f);
        grads[wx(l)].noalias() += dz * s.x.transpose();
        grads[wh(l)].noalias() += dz * s.h_prev.transpose();
        grads[bias(l)] += dz.rowwise().sum();
        dh_next[l].noalias() = params_[wh(l)].transpose() * dz;
        dh_above.noalias() = params_[wx(l)].transpose() * dz;
      }
      dxs[tt] = std::move(dh_above);
    }
    return dxs;
  }

 private:
  static Matrix sigmoid(const Matrix& z) { return (1.0 / (1.0 + (-z.array()).exp())).matrix(); }
  static Matrix sig_grad(const Matrix& s) { return (s.array() * (1.0 - s.array())).matrix(); }

  std::size_t wx(int l) const { return 3 * static_cast<std::size_t>(l); }
  std::size_t wh(int l) const { return 3 * static_cast<std::size_t>(l) + 1; }
  std::size_t bias(int l) const { return 3 * static_cast<std::size_t>(l) + 2; }
  std::size_t head_w() const { return 3 * static_cast<std::size_t>(spec_.layers); }
  std::size_t head_b() const { return head_w() + 1; }

  LstmSpec spec_;
  ParamVector params_;
};

}  // namespace uavmpc::nn
