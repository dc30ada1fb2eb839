#pragma once

#include <cmath>

#include "uavmpc/nn/params.hpp"

namespace uavmpc::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 0.0;  // global gradient-norm clip; 0 disables

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must be in [0,1)");
  }
};

/// Adaptive moment estimation with bias correction.
class Adam {
 public:
  Adam() = default;
  Adam(const ParamVector& like, AdamConfig cfg) : cfg_(cfg), m_(like.zeros_like()), v_(like.zeros_like()) {
    cfg_.validate();
  }

  AdamConfig& config() { return cfg_; }
  const AdamConfig& config() const { return cfg_; }
  long steps() const { return t_; }

  void step(ParamVector& params, const ParamVector& grads) {
    params.require_same_shape(m_);
    grads.require_same_shape(m_);
    ++t_;
    double scale = 1.0;
    if (cfg_.clip_norm > 0.0) {
      const double n = std::sqrt(grads.squared_norm());
      if (n > cfg_.clip_norm) scale = cfg_.clip_norm / n;
    }
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * scale * grads[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * (scale * grads[i]).cwiseAbs2();
      params[i].array() -= cfg_.learning_rate * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + cfg_.epsilon);
    }
  }

 private:
  AdamConfig cfg_;
  ParamVector m_;
  ParamVector v_;
  long t_ = 0;
};

}  // namespace uavmpc::nn
