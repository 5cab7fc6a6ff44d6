#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cxr/augment.hpp"
#include "cxr/error.hpp"
#include "test_util.hpp"

using namespace cxr;

namespace {

MultiChannelSample random_sample(std::uint64_t seed) {
  Rng rng(seed);
  MultiChannelSample s;
  for (auto& c : s.channels) c = testutil::random_image(kSampleSide, kSampleSide, rng);
  s.label = ClassLabel::pneumonia;
  return s;
}

AugmentConfig no_op() {
  AugmentConfig c;
  c.shear_max = 0;
  c.zoom_min = c.zoom_max = 1.0;
  c.rotation_max = 0;
  c.shift_max = 0;
  c.hflip_prob = 0;
  return c;
}

}  // namespace

TEST_CASE("defaults") {
  AugmentConfig c;
  CHECK(c.shear_max == 0.1);
  CHECK(c.zoom_min == 0.9);
  CHECK(c.zoom_max == 1.1);
  CHECK(c.rotation_max == 10.0);
  CHECK(c.shift_max == 0.1);
  CHECK(c.hflip_prob == 0.5);
  CHECK_NOTHROW(c.validate());
  c.hflip_prob = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
  c = AugmentConfig{};
  c.zoom_min = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("zero magnitudes are the identity") {
  const MultiChannelSample s = random_sample(1);
  Rng rng(2);
  const MultiChannelSample out = augment(s, no_op(), rng);
  for (std::size_t c = 0; c < 3; ++c) CHECK(out.channels[c] == s.channels[c]);
  CHECK(out.label == s.label);
}

TEST_CASE("flip is an involution") {
  const MultiChannelSample s = random_sample(3);
  std::array<GrayImage, 3> planes = s.channels;
  AffineParams flip;
  flip.flip = true;
  apply_affine(planes, flip);
  CHECK(planes[0].at(0, 5) == s.channels[0].at(kSampleSide - 1, 5));
  CHECK(planes[0] != s.channels[0]);
  apply_affine(planes, flip);
  for (std::size_t c = 0; c < 3; ++c) CHECK(planes[c] == s.channels[c]);
}

TEST_CASE("integer shift moves pixels and fills with zero") {
  Rng rng(4);
  std::array<GrayImage, 1> planes{testutil::random_image(10, 10, rng)};
  const GrayImage orig = planes[0];
  AffineParams p;
  p.dx = 0.2;  // 2 px right
  p.dy = -0.1;  // 1 px up
  apply_affine(planes, p);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) {
      const int sx = x - 2, sy = y + 1;
      const double expect = (sx >= 0 && sy < 10) ? orig.at(sx, sy) : 0.0;
      CHECK(planes[0].at(x, y) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("quarter turn about the centre") {
  GrayImage img(5, 5, 0.0);
  img.at(3, 2) = 1.0;  // one right of centre
  std::array<GrayImage, 1> planes{img};
  AffineParams p;
  p.angle_deg = 90;
  apply_affine(planes, p);
  CHECK(planes[0].at(2, 3) == doctest::Approx(1.0));
  CHECK(planes[0].at(3, 2) == doctest::Approx(0.0));
}

TEST_CASE("zoom 2 about the centre") {
  GrayImage img(9, 9, 0.0);
  img.at(5, 4) = 1.0;
  std::array<GrayImage, 1> planes{img};
  AffineParams p;
  p.zoom = 2.0;
  apply_affine(planes, p);
  CHECK(planes[0].at(6, 4) == doctest::Approx(1.0));
  CHECK(planes[0].at(5, 4) == doctest::Approx(0.5));
}

TEST_CASE("same transform on every channel, values stay in range") {
  MultiChannelSample s = random_sample(5);
  s.channels[1] = s.channels[0];
  AugmentConfig cfg;
  for (std::uint64_t k = 0; k < 8; ++k) {
    Rng rng = Rng::stream(cfg.seed, k);
    const MultiChannelSample out = augment(s, cfg, rng);
    CHECK(out.channels[0] == out.channels[1]);
    for (const auto& c : out.channels) {
      for (double v : c.pixels()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }
}

TEST_CASE("deterministic for a fixed stream") {
  const MultiChannelSample s = random_sample(6);
  AugmentConfig cfg;
  cfg.seed = 77;
  Rng a = Rng::stream(cfg.seed, 3), b = Rng::stream(cfg.seed, 3), c = Rng::stream(cfg.seed, 4);
  const auto oa = augment(s, cfg, a);
  const auto ob = augment(s, cfg, b);
  const auto oc = augment(s, cfg, c);
  for (std::size_t k = 0; k < 3; ++k) CHECK(oa.channels[k] == ob.channels[k]);
  CHECK(oa.channels[0] != oc.channels[0]);
}

TEST_CASE("draw order and ranges") {
  AugmentConfig cfg;
  Rng a(9), b(9);
  const AffineParams p = draw_affine(cfg, a);
  CHECK(p.flip == (b.uniform() < 0.5));
  CHECK(p.angle_deg == b.uniform(-10.0, 10.0));
  CHECK(p.shear == b.uniform(-0.1, 0.1));
  CHECK(p.zoom == b.uniform(0.9, 1.1));
  CHECK(p.dx == b.uniform(-0.1, 0.1));
  CHECK(p.dy == b.uniform(-0.1, 0.1));
  for (int i = 0; i < 1000; ++i) {
    const AffineParams q = draw_affine(cfg, a);
    CHECK(std::abs(q.angle_deg) <= 10.0);
    CHECK(std::abs(q.shear) <= 0.1);
    CHECK(q.zoom >= 0.9);
    CHECK(q.zoom <= 1.1);
  }
}
