#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <set>

#include "cxr/dataset.hpp"
#include "cxr/error.hpp"
#include "test_util.hpp"

using namespace cxr;
using testutil::TempDir;

namespace {

Manifest sized_manifest(std::size_t n_normal, std::size_t n_pneu, std::size_t n_covid) {
  Manifest m;
  const std::size_t n[3] = {n_normal, n_pneu, n_covid};
  for (ClassLabel c : kAllClasses)
    for (std::size_t i = 0; i < n[class_index(c)]; ++i)
      m.records.push_back({std::string(class_name(c)) + "_" + std::to_string(i) + ".png", c});
  return m;
}

std::size_t count_of(const std::vector<ManifestRecord>& rs, ClassLabel c) {
  return static_cast<std::size_t>(std::count_if(rs.begin(), rs.end(), [&](auto& r) { return r.label == c; }));
}

double lung_variance(const GrayImage& img) {
  const auto regions = phantom_regions(img.width());
  double sum = 0, sq = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (!regions.lungs[i]) continue;
    sum += img.pixels()[i];
    sq += img.pixels()[i] * img.pixels()[i];
    ++n;
  }
  const double mean = sum / static_cast<double>(n);
  return sq / static_cast<double>(n) - mean * mean;
}

}  // namespace

TEST_CASE("labels") {
  CHECK(class_index(ClassLabel::normal) == 0);
  CHECK(class_index(ClassLabel::pneumonia) == 1);
  CHECK(class_index(ClassLabel::covid19) == 2);
  CHECK(parse_class("covid19") == ClassLabel::covid19);
  CHECK_FALSE(parse_class("flu").has_value());
  CHECK_THROWS_AS(class_from_index(3), Error);
}

TEST_CASE("parse_manifest") {
  const Manifest m = parse_manifest("path,label\na.png,normal\nb.png,covid19\n");
  REQUIRE(m.records.size() == 2);
  CHECK(m.records[1] == ManifestRecord{"b.png", ClassLabel::covid19});
  CHECK(parse_manifest("path,label\r\na.png,pneumonia\r\n").records.size() == 1);
  CHECK_THROWS_WITH_AS(parse_manifest("path,label\nc.png,flu\n"), doctest::Contains("unknown label"), Error);
  CHECK_THROWS_AS(parse_manifest("path,label\na.png,normal\na.png,covid19\n"), Error);
  CHECK_THROWS_AS(parse_manifest(""), Error);
  CHECK_THROWS_AS(parse_manifest("file,class\na.png,normal\n"), Error);
}

TEST_CASE("manifest file round trip and path resolution") {
  TempDir dir("ds");
  Manifest m = sized_manifest(2, 1, 1);
  save_manifest(m, dir / "m.csv");
  const Manifest back = load_manifest(dir / "m.csv");
  CHECK(back.records == m.records);
  CHECK(back.base_dir == dir.path());
  CHECK(back.resolve(back.records[0]) == dir.path() / "normal_0.png");
  CHECK(back.class_counts() == std::array<std::size_t, 3>{2, 1, 1});
  CHECK_THROWS_AS(load_manifest(dir / "missing.csv"), Error);
}

TEST_CASE("round_half_up") {
  CHECK(round_half_up(41.5) == 42);
  CHECK(round_half_up(0.1 * 415) == 42);
  CHECK(round_half_up(287.99999) == 288);
  CHECK(round_half_up(517.9) == 518);
  CHECK(round_half_up(0.49) == 0);
}

TEST_CASE("stratified split counts") {
  const Manifest m = sized_manifest(2880, 5179, 415);
  const SplitResult s = stratified_split(m, 0.10, 0.10, 1);
  CHECK(count_of(s.test, ClassLabel::covid19) == 42);
  CHECK(count_of(s.test, ClassLabel::normal) == 288);
  CHECK(count_of(s.test, ClassLabel::pneumonia) == 518);
  CHECK(count_of(s.validation, ClassLabel::covid19) == round_half_up(0.1 * (415 - 42)));
  CHECK(count_of(s.validation, ClassLabel::normal) == round_half_up(0.1 * (2880 - 288)));
  CHECK(s.train.size() + s.validation.size() + s.test.size() == m.records.size());

  const Manifest ten = sized_manifest(10, 10, 10);
  CHECK(count_of(stratified_split(ten, 0.10, 0.10, 0).test, ClassLabel::normal) == 1);
}

TEST_CASE("split is disjoint, exhaustive and seeded") {
  const Manifest m = sized_manifest(30, 40, 20);
  const SplitResult a = stratified_split(m, 0.1, 0.1, 5);
  const SplitResult b = stratified_split(m, 0.1, 0.1, 5);
  const SplitResult c = stratified_split(m, 0.1, 0.1, 6);
  CHECK(a.test == b.test);
  CHECK(a.train == b.train);
  CHECK(a.test != c.test);
  std::multiset<std::string> all;
  for (const auto* part : {&a.train, &a.validation, &a.test})
    for (const auto& r : *part) all.insert(r.path);
  CHECK(all.size() == m.records.size());
  CHECK(std::set<std::string>(all.begin(), all.end()).size() == m.records.size());
}

TEST_CASE("degenerate splits are rejected") {
  CHECK_THROWS_AS(stratified_split(sized_manifest(1, 10, 10), 0.1, 0.1, 0), Error);
  CHECK_THROWS_AS(stratified_split(sized_manifest(0, 10, 10), 0.1, 0.1, 0), Error);
  CHECK_THROWS_AS(stratified_split(sized_manifest(10, 10, 10), 0.0, 0.1, 0), Error);
  CHECK_THROWS_AS(stratified_split(sized_manifest(10, 10, 10), 0.1, 1.0, 0), Error);
}

TEST_CASE("phantom generator") {
  for (ClassLabel c : kAllClasses) {
    const GrayImage img = generate_phantom(c, 3, 64);
    CHECK(img == generate_phantom(c, 3, 64));
    CHECK(img != generate_phantom(c, 4, 64));
    const auto [lo, hi] = intensity_range(img);
    double bottom_max = 0;
    for (int y = 48; y < 64; ++y)
      for (int x = 0; x < 64; ++x) bottom_max = std::max(bottom_max, img.at(x, y));
    CHECK(bottom_max == hi);
    // band at or above 90% of the range
    const auto regions = phantom_regions(64);
    for (std::size_t i = 0; i < img.size(); ++i)
      if (regions.band[i]) CHECK(img.pixels()[i] >= lo + 0.9 * (hi - lo));
  }
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CHECK(lung_variance(generate_phantom(ClassLabel::normal, seed, 64)) <
          lung_variance(generate_phantom(ClassLabel::covid19, seed, 64)));
    CHECK(lung_variance(generate_phantom(ClassLabel::normal, seed, 64)) <
          lung_variance(generate_phantom(ClassLabel::pneumonia, seed, 64)));
  }
  CHECK_THROWS_AS(generate_phantom(ClassLabel::normal, 0, 16), Error);
}
