#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cxr/nn/tensor.hpp"

namespace cxr::nn {

enum class LayerKind { conv3x3, maxpool2x2, flatten, dense, relu, softmax };

/// conv3x3 is stride 1 with same padding; maxpool2x2 has stride 2.
/// `in`/`out` are channel counts for conv and node counts for dense.
struct LayerSpec {
  LayerKind kind;
  std::size_t in = 0;
  std::size_t out = 0;
  int block = 0;
  std::string name;
};

struct InputShape {
  std::size_t channels = 3;
  std::size_t height = 224;
  std::size_t width = 224;
};

/// `convs` 3x3 convolutions of `width` channels followed by a 2x2 max pool.
struct ConvBlock {
  std::size_t convs = 1;
  std::size_t width = 8;
};

/// Layer graph. Blocks are numbered from 1; every layer with
/// block <= freeze_below_block is frozen.
struct NetworkSpec {
  InputShape input;
  std::vector<LayerSpec> layers;
  int freeze_below_block = 0;

  /// VGG-style conv blocks, then flatten -> dense(h) + relu for each head
  /// width -> dense(classes) -> softmax. The head is one block after the last
  /// conv block.
  static NetworkSpec vgg_style(InputShape input, std::span<const ConvBlock> blocks,
                               std::span<const std::size_t> head_widths,
                               std::size_t classes = 3, int freeze_below_block = 0);

  /// Original VGG16 with its 4096/4096/1000 classifier (for parameter counting).
  static NetworkSpec vgg16_imagenet();

  /// VGG16 convolutional base with the 256/128/3 transfer head.
  static NetworkSpec vgg16_transfer(int freeze_below_block = 5);

  /// Throws Error(usage) on inconsistent channel/node counts, pooling of odd
  /// sizes, a missing or duplicated flatten, or a non-softmax last layer.
  void validate() const;

  /// Per-sample shape of each layer's output, in layer order.
  std::vector<std::vector<std::size_t>> output_shapes() const;

  bool frozen(std::size_t layer) const { return layers.at(layer).block <= freeze_below_block; }
  /// Block id of the last layer, i.e. the head (one past the last conv block).
  int last_block() const;
  std::size_t num_classes() const;
};

struct ParamCount {
  std::uint64_t total = 0;
  std::uint64_t trainable = 0;
};

/// Weights plus biases of every conv/dense layer; trainable excludes frozen blocks.
ParamCount param_count(const NetworkSpec& net);

struct Parameter {
  std::string name;   ///< "<layer>.weight" or "<layer>.bias"
  std::size_t layer;  ///< index into NetworkSpec::layers
  Tensor value;
};

/// Weight and bias tensors in layer order. Conv weights are [out][in][3][3],
/// dense weights [out][in].
using Parameters = std::vector<Parameter>;

/// He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
Parameters init_parameters(const NetworkSpec& net, std::uint64_t seed);
Parameters zero_parameters(const NetworkSpec& net);

bool is_trainable(const NetworkSpec& net, const Parameter& p);

/// Layer inputs retained for backpropagation.
struct ForwardCache {
  std::vector<Tensor> inputs;  ///< inputs[i] feeds layer i (batch-major)
};

struct ForwardResult {
  Tensor probs;  ///< [B][classes]
  ForwardCache cache;
};

/// `batch` is [B][C][H][W] matching net.input.
ForwardResult forward(const NetworkSpec& net, const Parameters& params, const Tensor& batch);

/// Row-wise softmax of [B][K] logits.
Tensor softmax_rows(const Tensor& logits);

struct LossAndGrad {
  double loss = 0.0;
  /// Aligned with `params`; frozen entries are empty tensors.
  std::vector<Tensor> grads;
  Tensor probs;
};

/// Mean cross-entropy over the batch and its gradient with respect to the
/// trainable parameters. Backpropagation stops at the freeze boundary.
LossAndGrad loss_and_grad(const NetworkSpec& net, const Parameters& params, const Tensor& batch,
                          std::span<const int> labels);

/// Loss only (no gradient), used by finite-difference checks and evaluation.
double loss_only(const NetworkSpec& net, const Parameters& params, const Tensor& batch,
                 std::span<const int> labels);

}  // namespace cxr::nn
