#include "cxr/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cxr/error.hpp"

namespace cxr {

void AugmentConfig::validate() const {
  if (shear_max < 0 || rotation_max < 0 || shift_max < 0) {
    fail_usage("augmentation magnitudes must be >= 0");
  }
  if (!(zoom_min > 0.0) || zoom_max < zoom_min) fail_usage("zoom range must be positive and ordered");
  if (!(hflip_prob >= 0.0 && hflip_prob <= 1.0)) fail_usage("hflip_prob must lie in [0,1]");
}

AffineParams draw_affine(const AugmentConfig& cfg, Rng& rng) {
  AffineParams p;
  p.flip = rng.bernoulli(cfg.hflip_prob);
  p.angle_deg = rng.uniform(-cfg.rotation_max, cfg.rotation_max);
  p.shear = rng.uniform(-cfg.shear_max, cfg.shear_max);
  p.zoom = rng.uniform(cfg.zoom_min, cfg.zoom_max);
  p.dx = rng.uniform(-cfg.shift_max, cfg.shift_max);
  p.dy = rng.uniform(-cfg.shift_max, cfg.shift_max);
  return p;
}

void apply_affine(std::span<GrayImage> planes, const AffineParams& p) {
  if (planes.empty()) return;
  const int w = planes[0].width();
  const int h = planes[0].height();
  for (const auto& pl : planes) {
    if (pl.width() != w || pl.height() != h) fail_data("augmented planes must share a shape");
  }

  // Forward map on centred coordinates: q = Z * S * R * F * u + t.
  const double th = p.angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(th);
  const double s = std::sin(th);
  const double f = p.flip ? -1.0 : 1.0;
  const double k = std::tan(p.shear);
  // R * F
  double a00 = c * f, a01 = -s, a10 = s * f, a11 = c;
  // S * (R F), S = [[1, k], [0, 1]]
  a00 += k * a10;
  a01 += k * a11;
  // Z
  a00 *= p.zoom; a01 *= p.zoom; a10 *= p.zoom; a11 *= p.zoom;
  const double tx = p.dx * w;
  const double ty = p.dy * h;

  const double det = a00 * a11 - a01 * a10;
  if (!(std::abs(det) > 1e-12)) fail_usage("degenerate augmentation transform");
  const double i00 = a11 / det, i01 = -a01 / det, i10 = -a10 / det, i11 = a00 / det;
  const double cx = (w - 1) / 2.0;
  const double cy = (h - 1) / 2.0;

  for (auto& plane : planes) {
    std::vector<double> out(plane.size(), 0.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double qx = x - cx - tx;
        const double qy = y - cy - ty;
        const double sx = i00 * qx + i01 * qy + cx;
        const double sy = i10 * qx + i11 * qy + cy;
        const double fx0 = std::floor(sx);
        const double fy0 = std::floor(sy);
        const int x0 = static_cast<int>(fx0);
        const int y0 = static_cast<int>(fy0);
        const double wx = sx - fx0;
        const double wy = sy - fy0;
        auto sample = [&](int xx, int yy) {
          return (xx >= 0 && yy >= 0 && xx < w && yy < h) ? plane.at(xx, yy) : 0.0;
        };
        double v = 0.0;
        // Zero-weight taps are skipped so integer coordinates copy exactly.
        if (wx < 1.0 && wy < 1.0) v += (1.0 - wx) * (1.0 - wy) * sample(x0, y0);
        if (wx > 0.0 && wy < 1.0) v += wx * (1.0 - wy) * sample(x0 + 1, y0);
        if (wx < 1.0 && wy > 0.0) v += (1.0 - wx) * wy * sample(x0, y0 + 1);
        if (wx > 0.0 && wy > 0.0) v += wx * wy * sample(x0 + 1, y0 + 1);
        out[static_cast<std::size_t>(y) * w + x] = std::clamp(v, 0.0, 1.0);
      }
    }
    plane = GrayImage(w, h, std::move(out), plane.source_depth());
  }
}

MultiChannelSample augment(const MultiChannelSample& sample, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  sample.validate();
  MultiChannelSample out = sample;
  apply_affine(out.channels, draw_affine(cfg, rng));
  return out;
}

}  // namespace cxr
