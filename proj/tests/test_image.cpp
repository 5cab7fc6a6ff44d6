#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cxr/error.hpp"
#include "cxr/image.hpp"
#include "test_util.hpp"

using namespace cxr;
using testutil::TempDir;

namespace {

std::vector<std::uint8_t> pgm8(int w, int h, std::vector<std::uint8_t> px) {
  std::string hdr = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> out(hdr.begin(), hdr.end());
  out.insert(out.end(), px.begin(), px.end());
  return out;
}

}  // namespace

TEST_CASE("GrayImage validates its invariants") {
  CHECK_THROWS_AS(GrayImage(0, 4), Error);
  CHECK_THROWS_AS(GrayImage(2, 2, std::vector<double>{0.1, 0.2, 0.3}), Error);
  CHECK_THROWS_AS(GrayImage(1, 1, std::vector<double>{1.5}), Error);
  CHECK_THROWS_AS(GrayImage(1, 1, std::vector<double>{-0.1}), Error);
  GrayImage img(3, 2, 0.25);
  CHECK(img.size() == 6);
  CHECK(img.at(2, 1) == 0.25);
}

TEST_CASE("load 8-bit PGM normalizes by 255") {
  TempDir dir("img");
  testutil::write_bytes(dir / "a.pgm", pgm8(2, 2, {0, 128, 255, 64}));
  const GrayImage img = load_image(dir / "a.pgm");
  REQUIRE(img.width() == 2);
  CHECK(img.at(0, 0) == 0.0);
  CHECK(img.at(1, 0) == doctest::Approx(0.50196).epsilon(1e-5));
  CHECK(img.at(0, 1) == 1.0);
  CHECK(img.at(1, 1) == doctest::Approx(0.25098).epsilon(1e-5));
  CHECK(img.source_depth() == 8);
}

TEST_CASE("load 16-bit PGM, big-endian samples") {
  TempDir dir("img");
  std::string hdr = "P5\n# comment\n1 1\n65535\n";
  std::vector<std::uint8_t> b(hdr.begin(), hdr.end());
  b.push_back(0xFF);
  b.push_back(0xFF);
  testutil::write_bytes(dir / "b.pgm", b);
  const GrayImage img = load_image(dir / "b.pgm");
  CHECK(img.at(0, 0) == 1.0);
  CHECK(img.source_depth() == 16);

  b.back() = 0x00;  // 0xFF00
  testutil::write_bytes(dir / "c.pgm", b);
  CHECK(load_image(dir / "c.pgm").at(0, 0) == doctest::Approx(65280.0 / 65535.0));
}

TEST_CASE("malformed inputs are data errors") {
  TempDir dir("img");
  auto b = pgm8(2, 2, {1, 2, 3, 4});
  b.pop_back();
  testutil::write_bytes(dir / "trunc.pgm", b);
  CHECK_THROWS_AS(load_image(dir / "trunc.pgm"), Error);
  testutil::write_bytes(dir / "zero.pgm", pgm8(0, 2, {}));
  CHECK_THROWS_AS(load_image(dir / "zero.pgm"), Error);
  testutil::write_bytes(dir / "junk.bin", {'h', 'e', 'l', 'l', 'o'});
  CHECK_THROWS_AS(load_image(dir / "junk.bin"), Error);
  CHECK_THROWS_AS(load_image(dir / "missing.pgm"), Error);
  try {
    load_image(dir / "trunc.pgm");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::data);
  }
}

TEST_CASE("save/load round trip within one quantization step") {
  TempDir dir("img");
  Rng rng(11);
  const GrayImage img = testutil::random_image(7, 5, rng);
  for (int depth : {8, 16}) {
    for (const char* name : {"r.pgm", "r.png"}) {
      save_image(img, dir / name, depth);
      const GrayImage back = load_image(dir / name);
      REQUIRE(back.same_shape(img));
      CHECK(back.source_depth() == depth);
      const double step = 1.0 / ((1 << depth) - 1);
      for (std::size_t i = 0; i < img.size(); ++i) CHECK(std::abs(back.pixels()[i] - img.pixels()[i]) <= step);
    }
  }
}

TEST_CASE("constant 0.5 stores byte 128") {
  const auto bytes = encode_pgm(GrayImage(2, 2, 0.5));
  const std::string hdr = "P5\n2 2\n255\n";
  REQUIRE(bytes.size() == hdr.size() + 4);
  CHECK(std::string(bytes.begin(), bytes.begin() + static_cast<long>(hdr.size())) == hdr);
  for (std::size_t i = hdr.size(); i < bytes.size(); ++i) CHECK(bytes[i] == 128);
}

TEST_CASE("saving to an unwritable location fails") {
  CHECK_THROWS_AS(save_image(GrayImage(2, 2, 0.5), "/nonexistent_dir/x/y.pgm"), Error);
}

TEST_CASE("resize_bilinear") {
  SUBCASE("constants are preserved") {
    const GrayImage out = resize_bilinear(GrayImage(5, 3, 0.7), 11, 8);
    CHECK(out.width() == 11);
    CHECK(out.height() == 8);
    for (double v : out.pixels()) CHECK(v == doctest::Approx(0.7).epsilon(1e-15));
  }
  SUBCASE("2x2 ramp to 4x4") {
    const GrayImage in(2, 2, std::vector<double>{0, 1, 0, 1});
    const GrayImage out = resize_bilinear(in, 4, 4);
    // half-pixel centres: x_src = (x + 0.5)/2 - 0.5 -> -0.25, 0.25, 0.75, 1.25 (clamped)
    const double expect[4] = {0.0, 0.25, 0.75, 1.0};
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) CHECK(out.at(x, y) == doctest::Approx(expect[x]));
  }
  SUBCASE("same size is the identity") {
    Rng rng(3);
    const GrayImage in = testutil::random_image(6, 4, rng);
    CHECK(resize_bilinear(in, 6, 4) == in);
  }
  SUBCASE("range never grows") {
    Rng rng(4);
    for (int t = 0; t < 10; ++t) {
      const GrayImage in = testutil::random_image(5 + t, 7, rng);
      const auto [lo, hi] = intensity_range(in);
      const auto [lo2, hi2] = intensity_range(resize_bilinear(in, 13, 3 + t));
      CHECK(lo2 >= lo - 1e-15);
      CHECK(hi2 <= hi + 1e-15);
    }
  }
}

TEST_CASE("resize_area averages blocks") {
  const GrayImage in(4, 2, std::vector<double>{0, 1, 0.5, 0.5, 1, 0, 0.2, 0.4});
  const GrayImage out = resize_area(in, 2, 1);
  CHECK(out.at(0, 0) == doctest::Approx(0.5));
  CHECK(out.at(1, 0) == doctest::Approx(0.4));
}

TEST_CASE("intensity_range") {
  CHECK(intensity_range(GrayImage(3, 1, std::vector<double>{0.1, 0.5, 0.9})) == std::pair{0.1, 0.9});
  CHECK(intensity_range(GrayImage(2, 2, 0.3)) == std::pair{0.3, 0.3});
  CHECK(intensity_range(GrayImage(1, 1, 1.0)) == std::pair{1.0, 1.0});
  CHECK_THROWS_AS(intensity_range(GrayImage()), Error);
}

TEST_CASE("MultiChannelSample requires 224x224 planes") {
  MultiChannelSample s{{GrayImage(224, 224), GrayImage(224, 224), GrayImage(224, 224)}, std::nullopt};
  CHECK_NOTHROW(s.validate());
  s.channels[2] = GrayImage(10, 10);
  CHECK_THROWS_AS(s.validate(), Error);
}
