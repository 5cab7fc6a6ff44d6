#include <algorithm>
#include <cmath>

#include "cxr/error.hpp"
#include "cxr/nn/optimizer.hpp"

namespace cxr::nn {

OptimizerState make_optimizer(const NetworkSpec& net, const Parameters& params,
                              const AdamConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) fail_usage("learning rate must be > 0");
  OptimizerState s;
  s.config = cfg;
  s.learning_rate = cfg.learning_rate;
  s.first.resize(params.size());
  s.second.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!is_trainable(net, params[i])) continue;
    s.first[i] = Tensor(params[i].value.shape());
    s.second[i] = Tensor(params[i].value.shape());
  }
  return s;
}

void adam_step(OptimizerState& state, Parameters& params, const std::vector<Tensor>& grads) {
  if (grads.size() != params.size() || state.first.size() != params.size()) {
    fail_usage("gradients are not aligned with parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.first[i].empty()) {
      if (!grads[i].empty()) fail_usage("gradient supplied for frozen parameter " + params[i].name);
      continue;
    }
    if (grads[i].shape() != params[i].value.shape()) {
      fail_usage("gradient shape mismatch for " + params[i].name);
    }
  }

  ++state.step;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step);
  const double corr1 = 1.0 - std::pow(c.beta1, t);
  const double corr2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.first[i].empty()) continue;
    auto p = params[i].value.values();
    auto g = grads[i].values();
    auto m = state.first[i].values();
    auto v = state.second[i].values();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      const double m_hat = m[k] / corr1;
      const double v_hat = v[k] / corr2;
      p[k] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

void PlateauSchedule::validate() const {
  if (!(factor > 0.0 && factor < 1.0)) fail_usage("schedule.factor must lie in (0,1)");
  if (patience < 1) fail_usage("schedule.patience must be >= 1");
  if (!(min_lr >= 0.0)) fail_usage("schedule.min_lr must be >= 0");
}

bool PlateauSchedule::update(double val_loss, OptimizerState& state) {
  if (val_loss < best) {
    best = val_loss;
    bad_epochs = 0;
    return false;
  }
  if (++bad_epochs < patience) return false;
  bad_epochs = 0;
  state.learning_rate = std::max(min_lr, state.learning_rate * factor);
  return true;
}

}  // namespace cxr::nn
