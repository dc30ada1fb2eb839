#pragma once

#include <algorithm>
#include <cmath>

#include "uavmpc/nn/params.hpp"

namespace uavmpc::nn {

/// Central finite differences of a scalar loss w.r.t. every entry of `params`.
/// `loss()` must read the current contents of `params`; entries are restored.
template <class LossFn>
ParamVector central_difference(ParamVector& params, LossFn&& loss, double step = 1e-5) {
  ParamVector g = params.zeros_like();
  for (std::size_t t = 0; t < params.size(); ++t) {
    Matrix& m = params[t];
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      const double saved = m.data()[k];
      m.data()[k] = saved + step;
      const double up = loss();
      m.data()[k] = saved - step;
      const double down = loss();
      m.data()[k] = saved;
      g[t].data()[k] = (up - down) / (2.0 * step);
    }
  }
  return g;
}

/// max |a - n| / max(|a|, |n|, floor) over all entries.
inline double max_relative_error(const ParamVector& analytic, const ParamVector& numeric, double floor = 1e-6) {
  analytic.require_same_shape(numeric);
  double worst = 0.0;
  for (std::size_t t = 0; t < analytic.size(); ++t) {
    for (Eigen::Index k = 0; k < analytic[t].size(); ++k) {
      const double a = analytic[t].data()[k];
      const double n = numeric[t].data()[k];
      worst = std::max(worst, std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor}));
    }
  }
  return worst;
}

}  // namespace uavmpc::nn
