#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cxr/augment.hpp"
#include "cxr/nn/network.hpp"
#include "cxr/nn/optimizer.hpp"

namespace cxr::nn {

/// One labelled network input of shape [C][H][W].
struct Example {
  Tensor input;
  int label = 0;
};

struct TrainConfig {
  std::size_t batch_size = 4;
  std::size_t max_epochs = 200;
  AdamConfig adam;
  PlateauSchedule schedule;
  bool augment = true;
  AugmentConfig augment_cfg;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  ///< 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;  ///< rate used during the epoch
};

struct TrainResult {
  Parameters best;  ///< checkpoint of the epoch with the highest validation accuracy
  std::size_t best_epoch = 0;
  Parameters last;
  std::vector<EpochRecord> history;
};

/// Mini-batch Adam with per-epoch seeded shuffling, augmentation of training
/// batches only, and plateau scheduling on validation loss. Training loss and
/// accuracy are averaged over the (augmented) batches of the epoch. The best
/// epoch is the one with the highest validation accuracy, earliest on ties.
TrainResult train(const NetworkSpec& net, Parameters params, std::span<const Example> train_set,
                  std::span<const Example> val_set, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

Evaluation evaluate(const NetworkSpec& net, const Parameters& params,
                    std::span<const Example> examples, std::size_t batch_size = 32);

struct Prediction {
  int label = 0;
  std::vector<double> probs;
};

/// Index of the largest value; ties go to the lowest index.
int argmax(std::span<const double> values);

std::vector<Prediction> predict(const NetworkSpec& net, const Parameters& params,
                                std::span<const Tensor> inputs, std::size_t batch_size = 32);

/// Stacks [C][H][W] inputs into one [B][C][H][W] batch.
Tensor stack(std::span<const Tensor* const> inputs);

/// "epoch,train_loss,train_acc,val_loss,val_acc,lr" with round-trip precision.
std::string history_csv(std::span<const EpochRecord> history);
void write_history_csv(const std::filesystem::path& path, std::span<const EpochRecord> history);

}  // namespace cxr::nn
