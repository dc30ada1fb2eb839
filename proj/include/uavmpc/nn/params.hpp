#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "uavmpc/errors.hpp"

namespace uavmpc::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Tensor {
  std::string name;
  Matrix value;
};

/// Ordered collection of named tensors. Shapes are fixed once added.
class ParamVector {
 public:
  std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols) {
    tensors_.push_back({std::move(name), Matrix::Zero(rows, cols)});
    return tensors_.size() - 1;
  }

  std::size_t size() const { return tensors_.size(); }
  Matrix& operator[](std::size_t i) { return tensors_[i].value; }
  const Matrix& operator[](std::size_t i) const { return tensors_[i].value; }
  const Tensor& tensor(std::size_t i) const { return tensors_[i]; }
  const std::vector<Tensor>& tensors() const { return tensors_; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += static_cast<std::size_t>(t.value.size());
    return n;
  }

  ParamVector zeros_like() const {
    ParamVector z;
    for (const auto& t : tensors_) z.add(t.name, t.value.rows(), t.value.cols());
    return z;
  }

  void set_zero() {
    for (auto& t : tensors_) t.value.setZero();
  }

  bool same_shape(const ParamVector& o) const {
    if (o.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (tensors_[i].name != o.tensors_[i].name || tensors_[i].value.rows() != o[i].rows() ||
          tensors_[i].value.cols() != o[i].cols()) {
        return false;
      }
    }
    return true;
  }

  void require_same_shape(const ParamVector& o) const {
    if (!same_shape(o)) throw StructuralError("parameter shape mismatch");
  }

  /// Overwrites values from `o`, keeping this container's shapes.
  void assign(const ParamVector& o) {
    require_same_shape(o);
    for (std::size_t i = 0; i < size(); ++i) tensors_[i].value = o[i];
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& t : tensors_) s += t.value.squaredNorm();
    return s;
  }

  double distance(const ParamVector& o) const {
    require_same_shape(o);
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s += (tensors_[i].value - o[i]).squaredNorm();
    return std::sqrt(s);
  }

  void scale(double a) {
    for (auto& t : tensors_) t.value *= a;
  }

  bool all_finite() const {
    for (const auto& t : tensors_) {
      if (!t.value.allFinite()) return false;
    }
    return true;
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(scalar_count());
    for (const auto& t : tensors_) out.insert(out.end(), t.value.data(), t.value.data() + t.value.size());
    return out;
  }

  void unflatten(std::span<const double> flat) {
    if (flat.size() != scalar_count()) throw StructuralError("flat parameter length mismatch");
    std::size_t k = 0;
    for (auto& t : tensors_) {
      std::copy_n(flat.data() + k, t.value.size(), t.value.data());
      k += static_cast<std::size_t>(t.value.size());
    }
  }

  bool operator==(const ParamVector& o) const {
    if (!same_shape(o)) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (tensors_[i].value != o[i]) return false;
    }
    return true;
  }

 private:
  std::vector<Tensor> tensors_;
};

/// target <- tau * online + (1 - tau) * target, elementwise.
inline void soft_update(ParamVector& target, const ParamVector& online, double tau) {
  target.require_same_shape(online);
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = tau * online[i] + (1.0 - tau) * target[i];
}

inline void fill_uniform(Matrix& m, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
  }
}

/// Mean squared error over all entries and its gradient w.r.t. `pred`.
inline double mse(const Matrix& pred, const Matrix& target, Matrix* grad = nullptr) {
  const Matrix diff = pred - target;
  const double n = static_cast<double>(diff.size());
  if (grad) *grad = (2.0 / n) * diff;
  return diff.squaredNorm() / n;
}

}  // namespace uavmpc::nn
