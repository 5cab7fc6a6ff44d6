#pragma once

// Shared by the nn unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cxr/nn/network.hpp"
#include "cxr/random.hpp"

namespace oracle {

// ReLU on/off states and max-pool winners for one forward pass. Two points
// with equal patterns lie on the same smooth piece of the loss.
inline std::vector<std::uint32_t> activation_pattern(const cxr::nn::NetworkSpec& net,
                                                     const cxr::nn::Parameters& params,
                                                     const cxr::nn::Tensor& batch) {
  const auto fwd = cxr::nn::forward(net, params, batch);
  const auto shapes = net.output_shapes();
  std::vector<std::uint32_t> pattern;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& in = fwd.cache.inputs[l];
    if (net.layers[l].kind == cxr::nn::LayerKind::relu) {
      for (double v : in.values()) pattern.push_back(v > 0.0 ? 1u : 0u);
    } else if (net.layers[l].kind == cxr::nn::LayerKind::maxpool2x2) {
      const std::size_t b = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
      for (std::size_t n = 0; n < b * c; ++n) {
        const double* plane = in.data() + n * h * w;
        for (std::size_t y = 0; y + 1 < h; y += 2) {
          for (std::size_t x = 0; x + 1 < w; x += 2) {
            const double v[4] = {plane[y * w + x], plane[y * w + x + 1], plane[(y + 1) * w + x],
                                 plane[(y + 1) * w + x + 1]};
            std::uint32_t best = 0;
            for (std::uint32_t k = 1; k < 4; ++k)
              if (v[k] > v[best]) best = k;
            pattern.push_back(best);
          }
        }
      }
    }
  }
  return pattern;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t failures = 0;
  std::size_t kink_rechecks = 0;  ///< entries whose +-step straddled a kink
};

inline double rel_error(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

// Central differences on every trainable parameter entry. When the +-step
// evaluations change the activation pattern the difference quotient spans a
// kink, so the step is shrunk (by 100x, at most twice) until both sides sit on
// the same piece as the base point; the tolerance is unchanged.
inline GradCheck finite_difference_check(const cxr::nn::NetworkSpec& net, cxr::nn::Parameters params,
                                         const cxr::nn::Tensor& batch, const std::vector<int>& labels,
                                         double step = 1e-4, double tol = 1e-4) {
  const auto lg = cxr::nn::loss_and_grad(net, params, batch, labels);
  const auto base = activation_pattern(net, params, batch);
  GradCheck out;
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!cxr::nn::is_trainable(net, params[p])) continue;
    auto values = params[p].value.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double keep = values[i];
      double numeric = 0.0;
      double h = step;
      for (int attempt = 0; attempt < 3; ++attempt, h *= 1e-2) {
        values[i] = keep + h;
        const double up = cxr::nn::loss_only(net, params, batch, labels);
        const bool same_up = activation_pattern(net, params, batch) == base;
        values[i] = keep - h;
        const double down = cxr::nn::loss_only(net, params, batch, labels);
        const bool same_down = activation_pattern(net, params, batch) == base;
        values[i] = keep;
        numeric = (up - down) / (2 * h);
        if (same_up && same_down) break;
        if (attempt == 0) ++out.kink_rechecks;
      }
      const double e = rel_error(lg.grads[p][i], numeric);
      out.max_rel_error = std::max(out.max_rel_error, e);
      ++out.checked;
      if (!(e < tol)) ++out.failures;
    }
  }
  return out;
}

// Micro-net with two conv blocks on a 1x8x8 input and a random-width head.
inline cxr::nn::NetworkSpec random_micro_net(cxr::Rng& rng) {
  const std::array<cxr::nn::ConvBlock, 2> blocks = {
      cxr::nn::ConvBlock{1 + rng.index(2), 2 + rng.index(3)},
      cxr::nn::ConvBlock{1 + rng.index(2), 2 + rng.index(3)}};
  const std::vector<std::size_t> head = {4 + rng.index(5), 3 + rng.index(4)};
  return cxr::nn::NetworkSpec::vgg_style({1, 8, 8}, blocks, head);
}

// He-uniform weights plus small random biases, so no pre-activation sits
// exactly on a ReLU kink.
inline cxr::nn::Parameters random_params(const cxr::nn::NetworkSpec& net, cxr::Rng& rng) {
  cxr::nn::Parameters params = cxr::nn::init_parameters(net, rng.next_u64());
  for (auto& p : params)
    if (p.name.ends_with(".bias"))
      for (double& v : p.value.values()) v = rng.uniform(-0.1, 0.1);
  return params;
}

inline cxr::nn::Tensor random_batch(const cxr::nn::NetworkSpec& net, std::size_t b, cxr::Rng& rng) {
  cxr::nn::Tensor t({b, net.input.channels, net.input.height, net.input.width});
  for (double& v : t.values()) v = rng.uniform();
  return t;
}

}  // namespace oracle
