#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "cxr/nn/network.hpp"

namespace cxr::nn {

struct AdamConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam moments for the trainable parameters. Entries for frozen parameters
/// stay empty, and adam_step leaves those parameters alone.
struct OptimizerState {
  AdamConfig config;
  double learning_rate = 1e-5;
  std::uint64_t step = 0;
  std::vector<Tensor> first;
  std::vector<Tensor> second;
};

OptimizerState make_optimizer(const NetworkSpec& net, const Parameters& params,
                              const AdamConfig& cfg = {});

/// One bias-corrected Adam update. `grads` is aligned with `params`.
void adam_step(OptimizerState& state, Parameters& params, const std::vector<Tensor>& grads);

/// Reduce-on-plateau over validation loss. An epoch improves only if its loss
/// is strictly below the best seen so far; after `patience` consecutive
/// non-improving epochs the rate is multiplied by `factor` (floored at
/// min_lr) and the count restarts.
struct PlateauSchedule {
  int patience = 5;
  double factor = 0.8;
  double min_lr = 1e-8;
  double best = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;

  void validate() const;
  /// Returns true when the learning rate was reduced.
  bool update(double val_loss, OptimizerState& state);
};

}  // namespace cxr::nn
