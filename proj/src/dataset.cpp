#include "cxr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cxr/error.hpp"
#include "cxr/random.hpp"

namespace cxr {

std::filesystem::path Manifest::resolve(const ManifestRecord& r) const {
  std::filesystem::path p(r.path);
  return p.is_absolute() ? p : base_dir / p;
}

std::array<std::size_t, kNumClasses> Manifest::class_counts() const {
  std::array<std::size_t, kNumClasses> n{};
  for (const auto& r : records) ++n[class_index(r.label)];
  return n;
}

Manifest parse_manifest(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  Manifest m;
  std::set<std::string> seen;
  bool header = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (header) {
      if (line != "path,label") fail_data("manifest must start with header \"path,label\"");
      header = false;
      continue;
    }
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos || comma == 0) {
      fail_data("manifest line " + std::to_string(lineno) + ": expected \"path,label\"");
    }
    std::string path = line.substr(0, comma);
    const std::string label = line.substr(comma + 1);
    const auto cls = parse_class(label);
    if (!cls) fail_data("manifest line " + std::to_string(lineno) + ": unknown label \"" + label + "\"");
    if (!seen.insert(path).second) {
      fail_data("manifest line " + std::to_string(lineno) + ": duplicate path \"" + path + "\"");
    }
    m.records.push_back({std::move(path), *cls});
  }
  if (m.records.empty()) fail_data("manifest is empty");
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_data("cannot open manifest " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  Manifest m = parse_manifest(buf.str());
  m.base_dir = path.parent_path();
  return m;
}

void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_data("cannot write " + path.string());
  out << "path,label\n";
  for (const auto& r : m.records) out << r.path << ',' << class_name(r.label) << '\n';
  if (!out) fail_data("cannot write " + path.string());
}

std::size_t round_half_up(double x) {
  return static_cast<std::size_t>(std::floor(x + 0.5 + 1e-9));
}

SplitResult stratified_split(const Manifest& m, double test_frac, double val_frac,
                             std::uint64_t seed) {
  if (!(test_frac > 0.0 && test_frac < 1.0) || !(val_frac > 0.0 && val_frac < 1.0)) {
    fail_usage("split fractions must lie in (0,1)");
  }
  SplitResult out;
  out.seed = seed;
  for (ClassLabel cls : kAllClasses) {
    std::vector<ManifestRecord> members;
    for (const auto& r : m.records) {
      if (r.label == cls) members.push_back(r);
    }
    const std::size_t n = members.size();
    const std::size_t n_test = round_half_up(test_frac * static_cast<double>(n));
    const std::size_t n_val = round_half_up(val_frac * static_cast<double>(n - std::min(n, n_test)));
    if (n < 2 || n_test == 0 || n_val == 0 || n_test + n_val >= n) {
      fail_data("class " + std::string(class_name(cls)) + " has " + std::to_string(n) +
                " records, too few to populate train/validation/test");
    }
    Rng rng = Rng::stream(seed, class_index(cls));
    shuffle(members, rng);
    auto it = members.begin();
    out.test.insert(out.test.end(), it, it + static_cast<std::ptrdiff_t>(n_test));
    it += static_cast<std::ptrdiff_t>(n_test);
    out.validation.insert(out.validation.end(), it, it + static_cast<std::ptrdiff_t>(n_val));
    it += static_cast<std::ptrdiff_t>(n_val);
    out.train.insert(out.train.end(), it, members.end());
  }
  return out;
}

// ---- phantoms ----------------------------------------------------------------

namespace {

struct Geometry {
  double lung_cx[2];
  double lung_cy;
  double lung_rx;
  double lung_ry;
  int band_top;
};

Geometry geometry(int size) {
  const double s = size;
  return {{0.30 * s, 0.70 * s}, 0.42 * s, 0.15 * s, 0.24 * s,
          static_cast<int>(std::floor(0.8 * s))};
}

// Normalized elliptical radius to the nearer lung centre (<1 inside a lung).
double lung_radius(const Geometry& g, double x, double y) {
  double best = 1e9;
  for (double cx : g.lung_cx) {
    const double u = (x - cx) / g.lung_rx;
    const double v = (y - g.lung_cy) / g.lung_ry;
    best = std::min(best, std::sqrt(u * u + v * v));
  }
  return best;
}

// Uniform point inside lung `which`, restricted to normalized radius [r_lo, r_hi].
std::pair<double, double> lung_point(const Geometry& g, Rng& rng, double r_lo, double r_hi) {
  const int which = rng.bernoulli(0.5) ? 1 : 0;
  const double r = std::sqrt(rng.uniform(r_lo * r_lo, r_hi * r_hi));
  const double t = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  return {g.lung_cx[which] + r * g.lung_rx * std::cos(t), g.lung_cy + r * g.lung_ry * std::sin(t)};
}

struct Spot {
  double x, y, sigma, amp;
};

}  // namespace

PhantomRegions phantom_regions(int size) {
  if (size < 32) fail_usage("phantom size must be >= 32");
  const Geometry g = geometry(size);
  PhantomRegions r{BinaryMask(size, size), BinaryMask(size, size)};
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      r.band.set(x, y, y >= g.band_top);
      r.lungs.set(x, y, y < g.band_top && lung_radius(g, x, y) < 1.0);
    }
  }
  return r;
}

GrayImage generate_phantom(ClassLabel cls, std::uint64_t seed, int size) {
  if (size < 32) fail_usage("phantom size must be >= 32");
  const Geometry g = geometry(size);
  Rng rng = Rng::stream(seed, 0x5eed0000ULL + class_index(cls));

  const double body = 0.50 + rng.uniform(-0.03, 0.03);
  const double lung = 0.22 + rng.uniform(-0.02, 0.02);
  const double band = 0.95 + rng.uniform(-0.01, 0.01);

  std::vector<Spot> spots;
  const double s = size;
  switch (cls) {
    case ClassLabel::normal:
      break;
    case ClassLabel::pneumonia: {
      const int n = 3 + static_cast<int>(rng.index(3));
      for (int i = 0; i < n; ++i) {
        const auto [x, y] = lung_point(g, rng, 0.0, 0.7);
        spots.push_back({x, y, s * rng.uniform(0.045, 0.06), rng.uniform(0.25, 0.35)});
      }
      break;
    }
    case ClassLabel::covid19: {
      const int n = static_cast<int>(std::lround(s * s / 300.0)) + static_cast<int>(rng.index(10));
      for (int i = 0; i < n; ++i) {
        const auto [x, y] = lung_point(g, rng, 0.6, 1.0);
        spots.push_back({x, y, s * rng.uniform(0.008, 0.014), rng.uniform(0.25, 0.4)});
      }
      break;
    }
  }

  std::vector<double> data(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double noise = 0.008 * rng.normal();
      double v;
      if (y >= g.band_top) {
        // Brightest near the bottom edge; always above 0.93.
        v = band + 0.04 * (y - g.band_top) / std::max(1.0, s - 1 - g.band_top) + 0.25 * noise;
      } else {
        v = body + 0.05 * (y / s - 0.5) + noise;
        const double r = lung_radius(g, x, y);
        if (r < 1.0) {
          double tex = lung + 0.015 * std::sin(6.0 * x / s) * std::cos(5.0 * y / s);
          for (const Spot& sp : spots) {
            const double dx = x - sp.x;
            const double dy = y - sp.y;
            const double d2 = dx * dx + dy * dy;
            if (d2 < 16.0 * sp.sigma * sp.sigma) tex += sp.amp * std::exp(-d2 / (2.0 * sp.sigma * sp.sigma));
          }
          v = std::min(tex, 0.8) + noise;
        }
        v = std::min(v, 0.85);
      }
      data[static_cast<std::size_t>(y) * size + x] = std::clamp(v, 0.0, 1.0);
    }
  }
  return GrayImage(size, size, std::move(data));
}

}  // namespace cxr
