#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "cxr/error.hpp"
#include "cxr/nn/trainer.hpp"
#include "cxr/random.hpp"

namespace cxr::nn {

Tensor stack(std::span<const Tensor* const> inputs) {
  if (inputs.empty()) fail_usage("cannot stack an empty batch");
  const auto& shape = inputs.front()->shape();
  std::vector<std::size_t> out_shape = {inputs.size()};
  out_shape.insert(out_shape.end(), shape.begin(), shape.end());
  Tensor out(out_shape);
  const std::size_t n = inputs.front()->size();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i]->shape() != shape) fail_usage("inputs in a batch must share a shape");
    std::copy(inputs[i]->values().begin(), inputs[i]->values().end(), out.data() + i * n);
  }
  return out;
}

int argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return static_cast<int>(best);
}

namespace {

Tensor augmented(const Tensor& input, const AffineParams& params) {
  const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  std::vector<GrayImage> planes;
  planes.reserve(C);
  for (std::size_t c = 0; c < C; ++c) {
    std::vector<double> px(input.values().begin() + static_cast<std::ptrdiff_t>(c * H * W),
                           input.values().begin() + static_cast<std::ptrdiff_t>((c + 1) * H * W));
    for (double& v : px) v = std::clamp(v, 0.0, 1.0);
    planes.emplace_back(static_cast<int>(W), static_cast<int>(H), std::move(px));
  }
  apply_affine(planes, params);
  Tensor out(input.shape());
  for (std::size_t c = 0; c < C; ++c) {
    std::copy(planes[c].pixels().begin(), planes[c].pixels().end(), out.data() + c * H * W);
  }
  return out;
}

std::size_t correct_count(const Tensor& probs, std::span<const int> labels) {
  const std::size_t K = probs.dim(1);
  std::size_t correct = 0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    if (argmax(probs.values().subspan(b * K, K)) == labels[b]) ++correct;
  }
  return correct;
}

}  // namespace

Evaluation evaluate(const NetworkSpec& net, const Parameters& params,
                    std::span<const Example> examples, std::size_t batch_size) {
  if (examples.empty()) fail_usage("cannot evaluate an empty set");
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const std::size_t end = std::min(examples.size(), start + batch_size);
    std::vector<const Tensor*> inputs;
    std::vector<int> labels;
    for (std::size_t i = start; i < end; ++i) {
      inputs.push_back(&examples[i].input);
      labels.push_back(examples[i].label);
    }
    const Tensor batch = stack(inputs);
    const ForwardResult f = forward(net, params, batch);
    const std::size_t K = f.probs.dim(1);
    for (std::size_t b = 0; b < labels.size(); ++b) {
      if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= K) fail_usage("invalid label");
      loss_sum -= std::log(std::max(f.probs[b * K + labels[b]], 1e-300));
    }
    correct += correct_count(f.probs, labels);
  }
  const double n = static_cast<double>(examples.size());
  return {loss_sum / n, static_cast<double>(correct) / n};
}

std::vector<Prediction> predict(const NetworkSpec& net, const Parameters& params,
                                std::span<const Tensor> inputs, std::size_t batch_size) {
  std::vector<Prediction> out;
  out.reserve(inputs.size());
  for (std::size_t start = 0; start < inputs.size(); start += batch_size) {
    const std::size_t end = std::min(inputs.size(), start + batch_size);
    std::vector<const Tensor*> ptrs;
    for (std::size_t i = start; i < end; ++i) ptrs.push_back(&inputs[i]);
    const ForwardResult f = forward(net, params, stack(ptrs));
    const std::size_t K = f.probs.dim(1);
    for (std::size_t b = 0; b < ptrs.size(); ++b) {
      const auto row = f.probs.values().subspan(b * K, K);
      out.push_back({argmax(row), std::vector<double>(row.begin(), row.end())});
    }
  }
  return out;
}

TrainResult train(const NetworkSpec& net, Parameters params, std::span<const Example> train_set,
                  std::span<const Example> val_set, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  if (train_set.empty() || val_set.empty()) fail_data("training and validation sets must be nonempty");
  if (cfg.batch_size == 0) fail_usage("batch size must be >= 1");
  cfg.schedule.validate();
  if (cfg.augment) cfg.augment_cfg.validate();

  OptimizerState opt = make_optimizer(net, params, cfg.adam);
  PlateauSchedule schedule = cfg.schedule;
  TrainResult result;
  double best_acc = -1.0;

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffler = Rng::stream(cfg.seed, 0x100000000ULL + epoch);
    shuffle(order, shuffler);
    const std::uint64_t aug_seed = mix_seed(cfg.augment_cfg.seed ^ (epoch * 0x9e3779b97f4a7c15ULL));

    const double lr_used = opt.learning_rate;
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<Tensor> owned;
      owned.reserve(end - start);
      std::vector<int> labels;
      for (std::size_t i = start; i < end; ++i) {
        const Example& ex = train_set[order[i]];
        if (cfg.augment) {
          Rng rng = Rng::stream(aug_seed, order[i]);
          owned.push_back(augmented(ex.input, draw_affine(cfg.augment_cfg, rng)));
        } else {
          owned.push_back(ex.input);
        }
        labels.push_back(ex.label);
      }
      std::vector<const Tensor*> ptrs;
      for (const Tensor& t : owned) ptrs.push_back(&t);
      const LossAndGrad lg = loss_and_grad(net, params, stack(ptrs), labels);
      adam_step(opt, params, lg.grads);
      loss_sum += lg.loss * static_cast<double>(labels.size());
      correct += correct_count(lg.probs, labels);
    }

    const Evaluation val = evaluate(net, params, val_set);
    if (!std::isfinite(val.loss)) fail_numerical("non-finite validation loss");
    const double n = static_cast<double>(train_set.size());
    const EpochRecord rec{epoch, loss_sum / n, static_cast<double>(correct) / n, val.loss,
                          val.accuracy, lr_used};
    result.history.push_back(rec);
    if (val.accuracy > best_acc) {
      best_acc = val.accuracy;
      result.best = params;
      result.best_epoch = epoch;
    }
    schedule.update(val.loss, opt);
    if (on_epoch) on_epoch(rec);
  }
  if (result.best.empty()) result.best = params;
  result.last = std::move(params);
  return result;
}

std::string history_csv(std::span<const EpochRecord> history) {
  std::string out = "epoch,train_loss,train_acc,val_loss,val_acc,lr\n";
  char line[256];
  for (const EpochRecord& r : history) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.train_loss,
                  r.train_acc, r.val_loss, r.val_acc, r.lr);
    out += line;
  }
  return out;
}

void write_history_csv(const std::filesystem::path& path, std::span<const EpochRecord> history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_data("cannot write " + path.string());
  out << history_csv(history);
}

}  // namespace cxr::nn
