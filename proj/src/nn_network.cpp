#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "cxr/error.hpp"
#include "cxr/nn/network.hpp"
#include "cxr/random.hpp"

namespace cxr::nn {

// ---- specification -----------------------------------------------------------

NetworkSpec NetworkSpec::vgg_style(InputShape input, std::span<const ConvBlock> blocks,
                                   std::span<const std::size_t> head_widths, std::size_t classes,
                                   int freeze_below_block) {
  NetworkSpec net;
  net.input = input;
  net.freeze_below_block = freeze_below_block;
  std::size_t channels = input.channels;
  std::size_t h = input.height;
  std::size_t w = input.width;
  int block = 0;
  for (const ConvBlock& b : blocks) {
    ++block;
    const std::string prefix = "block" + std::to_string(block);
    for (std::size_t k = 0; k < b.convs; ++k) {
      net.layers.push_back({LayerKind::conv3x3, channels, b.width, block,
                            prefix + "_conv" + std::to_string(k + 1)});
      net.layers.push_back({LayerKind::relu, 0, 0, block, prefix + "_relu" + std::to_string(k + 1)});
      channels = b.width;
    }
    net.layers.push_back({LayerKind::maxpool2x2, 0, 0, block, prefix + "_pool"});
    h /= 2;
    w /= 2;
  }
  const int head = block + 1;
  std::size_t nodes = channels * h * w;
  net.layers.push_back({LayerKind::flatten, 0, 0, head, "flatten"});
  for (std::size_t i = 0; i < head_widths.size(); ++i) {
    net.layers.push_back({LayerKind::dense, nodes, head_widths[i], head, "dense_" + std::to_string(i + 1)});
    net.layers.push_back({LayerKind::relu, 0, 0, head, "dense_relu_" + std::to_string(i + 1)});
    nodes = head_widths[i];
  }
  net.layers.push_back({LayerKind::dense, nodes, classes, head, "predictions"});
  net.layers.push_back({LayerKind::softmax, 0, 0, head, "softmax"});
  net.validate();
  return net;
}

namespace {
constexpr std::array<ConvBlock, 5> kVgg16Blocks = {
    ConvBlock{2, 64}, ConvBlock{2, 128}, ConvBlock{3, 256}, ConvBlock{3, 512}, ConvBlock{3, 512}};
}

NetworkSpec NetworkSpec::vgg16_imagenet() {
  const std::array<std::size_t, 2> head = {4096, 4096};
  return vgg_style({3, 224, 224}, kVgg16Blocks, head, 1000, 0);
}

NetworkSpec NetworkSpec::vgg16_transfer(int freeze_below_block) {
  const std::array<std::size_t, 2> head = {256, 128};
  return vgg_style({3, 224, 224}, kVgg16Blocks, head, 3, freeze_below_block);
}

std::vector<std::vector<std::size_t>> NetworkSpec::output_shapes() const {
  std::vector<std::vector<std::size_t>> shapes;
  std::vector<std::size_t> cur = {input.channels, input.height, input.width};
  if (input.channels == 0 || input.height == 0 || input.width == 0) fail_usage("empty network input");
  int prev_block = 0;
  std::size_t flattens = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    if (l.block < prev_block) fail_usage("layer blocks must be non-decreasing");
    prev_block = l.block;
    switch (l.kind) {
      case LayerKind::conv3x3:
        if (cur.size() != 3 || cur[0] != l.in || l.out == 0) {
          fail_usage("layer " + l.name + ": conv input channels mismatch");
        }
        cur = {l.out, cur[1], cur[2]};
        break;
      case LayerKind::maxpool2x2:
        if (cur.size() != 3 || cur[1] % 2 != 0 || cur[2] % 2 != 0 || cur[1] == 0) {
          fail_usage("layer " + l.name + ": pooling needs even spatial size");
        }
        cur = {cur[0], cur[1] / 2, cur[2] / 2};
        break;
      case LayerKind::flatten:
        ++flattens;
        cur = {shape_product(cur)};
        break;
      case LayerKind::dense:
        if (cur.size() != 1 || cur[0] != l.in || l.out == 0) {
          fail_usage("layer " + l.name + ": dense input size mismatch");
        }
        cur = {l.out};
        break;
      case LayerKind::relu:
        break;
      case LayerKind::softmax:
        if (cur.size() != 1 || i + 1 != layers.size()) fail_usage("softmax must be the last layer");
        break;
    }
    shapes.push_back(cur);
  }
  if (flattens != 1) fail_usage("network needs exactly one flatten layer");
  if (layers.empty() || layers.back().kind != LayerKind::softmax) fail_usage("network must end in softmax");
  return shapes;
}

void NetworkSpec::validate() const { (void)output_shapes(); }

int NetworkSpec::last_block() const { return layers.empty() ? 0 : layers.back().block; }

std::size_t NetworkSpec::num_classes() const { return output_shapes().back().at(0); }

namespace {

std::uint64_t layer_weights(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::conv3x3: return static_cast<std::uint64_t>(l.in) * l.out * 9;
    case LayerKind::dense: return static_cast<std::uint64_t>(l.in) * l.out;
    default: return 0;
  }
}

bool has_params(const LayerSpec& l) {
  return l.kind == LayerKind::conv3x3 || l.kind == LayerKind::dense;
}

}  // namespace

ParamCount param_count(const NetworkSpec& net) {
  net.validate();
  ParamCount c;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    if (!has_params(l)) continue;
    const std::uint64_t n = layer_weights(l) + l.out;
    c.total += n;
    if (!net.frozen(i)) c.trainable += n;
  }
  return c;
}

Parameters zero_parameters(const NetworkSpec& net) {
  net.validate();
  Parameters p;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    if (l.kind == LayerKind::conv3x3) {
      p.push_back({l.name + ".weight", i, Tensor({l.out, l.in, 3, 3})});
    } else if (l.kind == LayerKind::dense) {
      p.push_back({l.name + ".weight", i, Tensor({l.out, l.in})});
    } else {
      continue;
    }
    p.push_back({l.name + ".bias", i, Tensor({l.out})});
  }
  return p;
}

Parameters init_parameters(const NetworkSpec& net, std::uint64_t seed) {
  Parameters p = zero_parameters(net);
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k].name.ends_with(".bias")) continue;
    const LayerSpec& l = net.layers[p[k].layer];
    const double fan_in = static_cast<double>(l.kind == LayerKind::conv3x3 ? l.in * 9 : l.in);
    const double limit = std::sqrt(6.0 / fan_in);
    Rng rng = Rng::stream(seed, k);
    for (double& v : p[k].value.values()) v = rng.uniform(-limit, limit);
  }
  return p;
}

bool is_trainable(const NetworkSpec& net, const Parameter& p) { return !net.frozen(p.layer); }

// ---- kernels -------------------------------------------------------------------

namespace {

struct LayerParams {
  const Tensor* weight = nullptr;
  const Tensor* bias = nullptr;
  std::size_t weight_index = 0;
};

std::vector<LayerParams> bind_params(const NetworkSpec& net, const Parameters& params) {
  std::vector<LayerParams> bound(net.layers.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Parameter& p = params[k];
    if (p.layer >= net.layers.size()) fail_usage("parameter " + p.name + " refers to a missing layer");
    if (p.name.ends_with(".weight")) {
      bound[p.layer].weight = &p.value;
      bound[p.layer].weight_index = k;
    } else {
      bound[p.layer].bias = &p.value;
    }
  }
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    if (!has_params(l)) continue;
    const LayerParams& b = bound[i];
    const std::size_t expect = static_cast<std::size_t>(layer_weights(l));
    if (b.weight == nullptr || b.bias == nullptr || b.weight->size() != expect || b.bias->size() != l.out) {
      fail_usage("parameters do not match layer " + l.name);
    }
  }
  return bound;
}

// i + d for an offset the caller has already bounds-checked.
inline std::size_t shift(std::size_t i, int d) {
  return static_cast<std::size_t>(static_cast<std::ptrdiff_t>(i) + d);
}

void conv_forward(const Tensor& in, const Tensor& w, const Tensor& bias, Tensor& out) {
  const std::size_t B = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  const std::size_t K = w.dim(0);
  out = Tensor({B, K, H, W});
  const std::size_t plane = H * W;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t k = 0; k < K; ++k) {
      double* o = out.data() + (b * K + k) * plane;
      std::fill(o, o + plane, bias[k]);
      for (std::size_t c = 0; c < C; ++c) {
        const double* src = in.data() + (b * C + c) * plane;
        const double* ker = w.data() + (k * C + c) * 9;
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const double wv = ker[ky * 3 + kx];
            const int dy = ky - 1;
            const int dx = kx - 1;
            const std::size_t y0 = dy < 0 ? 1 : 0;
            const std::size_t y1 = dy > 0 ? H - 1 : H;
            const std::size_t x0 = dx < 0 ? 1 : 0;
            const std::size_t x1 = dx > 0 ? W - 1 : W;
            const std::size_t n = x1 - x0;
            for (std::size_t y = y0; y < y1; ++y) {
              double* orow = o + y * W + x0;
              const double* irow = src + shift(y, dy) * W + shift(x0, dx);
              for (std::size_t x = 0; x < n; ++x) orow[x] += wv * irow[x];
            }
          }
        }
      }
    }
  }
}

// Accumulates dW, db and (when din != nullptr) dIn.
void conv_backward(const Tensor& in, const Tensor& w, const Tensor& dout, Tensor& dw, Tensor& db,
                   Tensor* din) {
  const std::size_t B = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  const std::size_t K = w.dim(0);
  const std::size_t plane = H * W;
  dw = Tensor(w.shape());
  db = Tensor({K});
  if (din != nullptr) *din = Tensor(in.shape());
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t k = 0; k < K; ++k) {
      const double* g = dout.data() + (b * K + k) * plane;
      double s = 0.0;
      for (std::size_t i = 0; i < plane; ++i) s += g[i];
      db[k] += s;
      for (std::size_t c = 0; c < C; ++c) {
        const double* src = in.data() + (b * C + c) * plane;
        const double* ker = w.data() + (k * C + c) * 9;
        double* gker = dw.data() + (k * C + c) * 9;
        double* dsrc = din != nullptr ? din->data() + (b * C + c) * plane : nullptr;
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const int dy = ky - 1;
            const int dx = kx - 1;
            const std::size_t y0 = dy < 0 ? 1 : 0;
            const std::size_t y1 = dy > 0 ? H - 1 : H;
            const std::size_t x0 = dx < 0 ? 1 : 0;
            const std::size_t x1 = dx > 0 ? W - 1 : W;
            const double wv = ker[ky * 3 + kx];
            const std::size_t n = x1 - x0;
            double acc = 0.0;
            for (std::size_t y = y0; y < y1; ++y) {
              const double* grow = g + y * W + x0;
              const std::size_t off = shift(y, dy) * W + shift(x0, dx);
              const double* irow = src + off;
              for (std::size_t x = 0; x < n; ++x) acc += grow[x] * irow[x];
              if (dsrc != nullptr) {
                double* drow = dsrc + off;
                for (std::size_t x = 0; x < n; ++x) drow[x] += wv * grow[x];
              }
            }
            gker[ky * 3 + kx] += acc;
          }
        }
      }
    }
  }
}

void pool_forward(const Tensor& in, Tensor& out) {
  const std::size_t B = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  const std::size_t OH = H / 2, OW = W / 2;
  out = Tensor({B, C, OH, OW});
  for (std::size_t p = 0; p < B * C; ++p) {
    const double* src = in.data() + p * H * W;
    double* dst = out.data() + p * OH * OW;
    for (std::size_t y = 0; y < OH; ++y) {
      for (std::size_t x = 0; x < OW; ++x) {
        const double* s = src + 2 * y * W + 2 * x;
        dst[y * OW + x] = std::max(std::max(s[0], s[1]), std::max(s[W], s[W + 1]));
      }
    }
  }
}

// Routes each gradient to the first maximal element of its window.
void pool_backward(const Tensor& in, const Tensor& dout, Tensor& din) {
  const std::size_t B = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  const std::size_t OH = H / 2, OW = W / 2;
  din = Tensor(in.shape());
  for (std::size_t p = 0; p < B * C; ++p) {
    const double* src = in.data() + p * H * W;
    const double* g = dout.data() + p * OH * OW;
    double* d = din.data() + p * H * W;
    for (std::size_t y = 0; y < OH; ++y) {
      for (std::size_t x = 0; x < OW; ++x) {
        const std::size_t base = 2 * y * W + 2 * x;
        const std::array<std::size_t, 4> idx = {base, base + 1, base + W, base + W + 1};
        std::size_t best = idx[0];
        for (std::size_t j = 1; j < 4; ++j) {
          if (src[idx[j]] > src[best]) best = idx[j];
        }
        d[best] += g[y * OW + x];
      }
    }
  }
}

void dense_forward(const Tensor& in, const Tensor& w, const Tensor& bias, Tensor& out) {
  const std::size_t B = in.dim(0);
  const std::size_t N = w.dim(1), M = w.dim(0);
  out = Tensor({B, M});
  for (std::size_t b = 0; b < B; ++b) {
    const double* x = in.data() + b * N;
    for (std::size_t m = 0; m < M; ++m) {
      const double* row = w.data() + m * N;
      double acc = bias[m];
      for (std::size_t n = 0; n < N; ++n) acc += row[n] * x[n];
      out[b * M + m] = acc;
    }
  }
}

void dense_backward(const Tensor& in, const Tensor& w, const Tensor& dout, Tensor& dw, Tensor& db,
                    Tensor* din) {
  const std::size_t B = in.dim(0);
  const std::size_t N = w.dim(1), M = w.dim(0);
  dw = Tensor(w.shape());
  db = Tensor({M});
  if (din != nullptr) *din = Tensor(in.shape());
  for (std::size_t b = 0; b < B; ++b) {
    const double* x = in.data() + b * N;
    for (std::size_t m = 0; m < M; ++m) {
      const double g = dout[b * M + m];
      if (g == 0.0) continue;
      db[m] += g;
      double* gw = dw.data() + m * N;
      for (std::size_t n = 0; n < N; ++n) gw[n] += g * x[n];
      if (din != nullptr) {
        const double* row = w.data() + m * N;
        double* dx = din->data() + b * N;
        for (std::size_t n = 0; n < N; ++n) dx[n] += g * row[n];
      }
    }
  }
}

Tensor check_batch(const NetworkSpec& net, const Tensor& batch) {
  if (batch.rank() != 4 || batch.dim(0) == 0 || batch.dim(1) != net.input.channels ||
      batch.dim(2) != net.input.height || batch.dim(3) != net.input.width) {
    fail_usage("batch shape does not match the network input");
  }
  return batch;
}

}  // namespace

Tensor softmax_rows(const Tensor& logits) {
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  Tensor probs(logits.shape());
  for (std::size_t b = 0; b < B; ++b) {
    const double* z = logits.data() + b * K;
    const double zmax = *std::max_element(z, z + K);
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) sum += (probs[b * K + k] = std::exp(z[k] - zmax));
    for (std::size_t k = 0; k < K; ++k) probs[b * K + k] /= sum;
  }
  return probs;
}

ForwardResult forward(const NetworkSpec& net, const Parameters& params, const Tensor& batch) {
  net.validate();
  const auto bound = bind_params(net, params);
  ForwardResult r;
  r.cache.inputs.reserve(net.layers.size());
  Tensor cur = check_batch(net, batch);
  const std::size_t B = batch.dim(0);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    Tensor next;
    switch (l.kind) {
      case LayerKind::conv3x3: conv_forward(cur, *bound[i].weight, *bound[i].bias, next); break;
      case LayerKind::maxpool2x2: pool_forward(cur, next); break;
      case LayerKind::flatten: next = cur.reshaped({B, cur.size() / B}); break;
      case LayerKind::dense: dense_forward(cur, *bound[i].weight, *bound[i].bias, next); break;
      case LayerKind::relu:
        next = cur;
        for (double& v : next.values()) v = v > 0.0 ? v : 0.0;
        break;
      case LayerKind::softmax: next = softmax_rows(cur); break;
    }
    r.cache.inputs.push_back(std::move(cur));
    cur = std::move(next);
  }
  r.probs = std::move(cur);
  return r;
}

namespace {

double cross_entropy(const Tensor& logits, std::span<const int> labels, std::size_t classes) {
  const std::size_t B = logits.dim(0);
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const double* z = logits.data() + b * classes;
    const double zmax = *std::max_element(z, z + classes);
    double sum = 0.0;
    for (std::size_t k = 0; k < classes; ++k) sum += std::exp(z[k] - zmax);
    total += zmax + std::log(sum) - z[labels[b]];
  }
  return total / static_cast<double>(B);
}

void check_labels(std::span<const int> labels, std::size_t batch, std::size_t classes) {
  if (labels.size() != batch) fail_usage("label count does not match batch size");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) fail_usage("invalid label " + std::to_string(y));
  }
}

}  // namespace

double loss_only(const NetworkSpec& net, const Parameters& params, const Tensor& batch,
                 std::span<const int> labels) {
  const std::size_t classes = net.num_classes();
  check_labels(labels, batch.rank() > 0 ? batch.dim(0) : 0, classes);
  const ForwardResult f = forward(net, params, batch);
  return cross_entropy(f.cache.inputs.back(), labels, classes);
}

LossAndGrad loss_and_grad(const NetworkSpec& net, const Parameters& params, const Tensor& batch,
                          std::span<const int> labels) {
  const std::size_t classes = net.num_classes();
  check_labels(labels, batch.rank() > 0 ? batch.dim(0) : 0, classes);
  ForwardResult f = forward(net, params, batch);
  const auto bound = bind_params(net, params);
  const std::size_t B = batch.dim(0);

  LossAndGrad out;
  const Tensor& logits = f.cache.inputs.back();
  out.loss = cross_entropy(logits, labels, classes);
  out.grads.resize(params.size());

  // d loss / d logits = (probs - onehot) / B
  Tensor grad = f.probs;
  for (std::size_t b = 0; b < B; ++b) grad[b * classes + labels[b]] -= 1.0;
  for (double& v : grad.values()) v /= static_cast<double>(B);

  const std::size_t n_layers = net.layers.size();
  std::size_t first_trainable = n_layers;
  for (std::size_t i = 0; i < n_layers; ++i) {
    if (!net.frozen(i)) {
      first_trainable = i;
      break;
    }
  }

  // The softmax layer (last) is folded into the logit gradient above.
  for (std::size_t i = n_layers - 1; i-- > first_trainable;) {
    const LayerSpec& l = net.layers[i];
    const Tensor& in = f.cache.inputs[i];
    const bool need_input_grad = i > first_trainable;
    Tensor din;
    switch (l.kind) {
      case LayerKind::conv3x3: {
        const std::size_t wi = bound[i].weight_index;
        conv_backward(in, *bound[i].weight, grad, out.grads[wi], out.grads[wi + 1],
                      need_input_grad ? &din : nullptr);
        break;
      }
      case LayerKind::dense: {
        const std::size_t wi = bound[i].weight_index;
        dense_backward(in, *bound[i].weight, grad, out.grads[wi], out.grads[wi + 1],
                       need_input_grad ? &din : nullptr);
        break;
      }
      case LayerKind::maxpool2x2:
        if (need_input_grad) pool_backward(in, grad, din);
        break;
      case LayerKind::flatten:
        if (need_input_grad) din = grad.reshaped(in.shape());
        break;
      case LayerKind::relu:
        if (need_input_grad) {
          din = std::move(grad);
          for (std::size_t k = 0; k < din.size(); ++k) {
            if (!(in[k] > 0.0)) din[k] = 0.0;
          }
        }
        break;
      case LayerKind::softmax:
        fail_usage("softmax must be the last layer");
    }
    grad = std::move(din);
  }
  if (!std::isfinite(out.loss)) fail_numerical("non-finite loss");
  out.probs = std::move(f.probs);
  return out;
}

}  // namespace cxr::nn
