#pragma once

#include <cstdint>
#include <span>

#include "cxr/image.hpp"
#include "cxr/random.hpp"

namespace cxr {

struct AugmentConfig {
  double shear_max = 0.1;  ///< radians
  double zoom_min = 0.9;
  double zoom_max = 1.1;
  double rotation_max = 10.0;  ///< degrees
  double shift_max = 0.1;      ///< fraction of the side length
  double hflip_prob = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One draw of the affine parameters.
struct AffineParams {
  bool flip = false;
  double angle_deg = 0.0;
  double shear = 0.0;
  double zoom = 1.0;
  double dx = 0.0;  ///< fraction of width
  double dy = 0.0;  ///< fraction of height
};

/// Draws (flip, angle, shear, zoom, dx, dy) in that fixed order.
AffineParams draw_affine(const AugmentConfig& cfg, Rng& rng);

/// Applies flip -> rotate about the centre -> shear -> zoom -> shift with
/// bilinear sampling and zero fill outside the source. Planes must share a shape.
void apply_affine(std::span<GrayImage> planes, const AffineParams& p);

/// Draws one parameter set and applies it to all three channels.
MultiChannelSample augment(const MultiChannelSample& sample, const AugmentConfig& cfg, Rng& rng);

}  // namespace cxr
