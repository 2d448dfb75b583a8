#include "ols/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace ols {

void AdamState::init(const std::vector<Tensor>& params) {
  m.clear();
  v.clear();
  for (const Tensor& p : params) {
    m.push_back(Tensor::zeros(p.shape));
    v.push_back(Tensor::zeros(p.shape));
  }
  step = 0;
}

bool adam_step(AdamState& state, std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
  if (!state.initialized()) state.init(params);
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: params/grads/state arity mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k].same_shape(grads[k]))
      throw std::invalid_argument("adam_step: gradient shape mismatch at slot " +
                                  std::to_string(k));
    if (!grads[k].all_finite()) return false;  // step rejected
  }
  state.step += 1;
  const double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k];
    const Tensor& g = grads[k];
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      m.data[i] = b1 * m.data[i] + (1.0 - b1) * g.data[i];
      v.data[i] = b2 * v.data[i] + (1.0 - b2) * g.data[i] * g.data[i];
      const double mhat = m.data[i] / c1;
      const double vhat = v.data[i] / c2;
      p.data[i] -= state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.eps);
    }
  }
  return true;
}

}  // namespace ols
