#include "cxr/preprocess.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <fstream>
#include <iterator>
#include <string>

#include "cxr/error.hpp"

namespace cxr {

void PreprocessConfig::validate() const {
  if (!(threshold_fraction > 0.0 && threshold_fraction < 1.0)) {
    fail_usage("preprocess.threshold_fraction must lie in (0,1)");
  }
  if (morph_radius < 1) fail_usage("preprocess.morph_radius must be >= 1");
  if (connectivity != 4 && connectivity != 8) fail_usage("preprocess.connectivity must be 4 or 8");
  if (bilateral_radius < 1) fail_usage("preprocess.bilateral_radius must be >= 1");
  if (!(sigma_space > 0.0) || !(sigma_range > 0.0)) fail_usage("bilateral sigmas must be > 0");
  if (equalize_bins < 2) fail_usage("preprocess.equalize_bins must be >= 2");
  if (!(max_blob_fraction > 0.0 && max_blob_fraction <= 1.0)) {
    fail_usage("preprocess.max_blob_fraction must lie in (0,1]");
  }
}

std::string_view mode_name(PreprocessMode m) {
  switch (m) {
    case PreprocessMode::simple: return "simple";
    case PreprocessMode::filter_base: return "filter-base";
    case PreprocessMode::full: return "full";
  }
  return "?";
}

std::optional<PreprocessMode> parse_mode(std::string_view name) {
  for (auto m : {PreprocessMode::simple, PreprocessMode::filter_base, PreprocessMode::full}) {
    if (mode_name(m) == name) return m;
  }
  return std::nullopt;
}

BinaryMask threshold_segment(const GrayImage& img, double fraction) {
  const auto [v_min, v_max] = intensity_range(img);
  const double t = v_min + fraction * (v_max - v_min);
  BinaryMask mask(img.width(), img.height());
  const auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) mask.set(i, px[i] >= t);
  return mask;
}

namespace {

// Separable square-window min (erode) or max (dilate). Out-of-bounds pixels
// are background, so they force erosion to 0 and never contribute to dilation.
BinaryMask square_filter(const BinaryMask& in, int r, bool is_erode) {
  const int w = in.width();
  const int h = in.height();
  BinaryMask rows(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool v = is_erode;
      for (int dx = -r; dx <= r; ++dx) {
        const int xx = x + dx;
        const bool s = xx >= 0 && xx < w && in.at(xx, y);
        v = is_erode ? (v && s) : (v || s);
      }
      rows.set(x, y, v);
    }
  }
  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool v = is_erode;
      for (int dy = -r; dy <= r; ++dy) {
        const int yy = y + dy;
        const bool s = yy >= 0 && yy < h && rows.at(x, yy);
        v = is_erode ? (v && s) : (v || s);
      }
      out.set(x, y, v);
    }
  }
  return out;
}

}  // namespace

BinaryMask erode(const BinaryMask& mask, int radius) { return square_filter(mask, radius, true); }
BinaryMask dilate(const BinaryMask& mask, int radius) { return square_filter(mask, radius, false); }

BinaryMask morph_clean(const BinaryMask& mask, int radius) {
  const BinaryMask opened = dilate(erode(mask, radius), radius);
  const BinaryMask closed = erode(dilate(opened, radius), radius);
  return dilate(closed, radius);
}

std::optional<Component> largest_component(const BinaryMask& mask, int connectivity) {
  if (connectivity != 4 && connectivity != 8) fail_usage("connectivity must be 4 or 8");
  const int w = mask.width();
  const int h = mask.height();
  std::vector<int> label(mask.size(), 0);
  int best_label = 0;
  std::size_t best_area = 0;
  int next = 0;
  std::deque<std::pair<int, int>> queue;

  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      const std::size_t i0 = static_cast<std::size_t>(y0) * w + x0;
      if (!mask[i0] || label[i0] != 0) continue;
      const int id = ++next;
      std::size_t area = 0;
      label[i0] = id;
      queue.emplace_back(x0, y0);
      while (!queue.empty()) {
        const auto [x, y] = queue.front();
        queue.pop_front();
        ++area;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            if (connectivity == 4 && dx != 0 && dy != 0) continue;
            const int xx = x + dx;
            const int yy = y + dy;
            if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
            const std::size_t j = static_cast<std::size_t>(yy) * w + xx;
            if (mask[j] && label[j] == 0) {
              label[j] = id;
              queue.emplace_back(xx, yy);
            }
          }
        }
      }
      // Strictly greater keeps the earliest component on ties.
      if (area > best_area) {
        best_area = area;
        best_label = id;
      }
    }
  }
  if (best_label == 0) return std::nullopt;
  Component c{BinaryMask(w, h), best_area};
  for (std::size_t i = 0; i < label.size(); ++i) c.mask.set(i, label[i] == best_label);
  return c;
}

DiaphragmRemoval remove_diaphragm(const GrayImage& img, const PreprocessConfig& cfg) {
  cfg.validate();
  DiaphragmRemoval out{img, BinaryMask(img.width(), img.height()), false};
  const BinaryMask cleaned = morph_clean(threshold_segment(img, cfg.threshold_fraction), cfg.morph_radius);
  auto blob = largest_component(cleaned, cfg.connectivity);
  if (!blob) return out;
  const double limit = cfg.max_blob_fraction * static_cast<double>(img.size());
  if (static_cast<double>(blob->area) > limit) return out;

  const double fill = cfg.fill == FillPolicy::zero ? 0.0 : intensity_range(img).first;
  auto px = out.image.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    if (blob->mask[i]) px[i] = fill;
  }
  out.mask = std::move(blob->mask);
  out.removed = true;
  return out;
}

GrayImage bilateral_filter(const GrayImage& img, int radius, double sigma_space,
                           double sigma_range) {
  if (radius < 1) fail_usage("bilateral radius must be >= 1");
  if (!(sigma_space > 0.0) || !(sigma_range > 0.0)) fail_usage("bilateral sigmas must be > 0");
  const int w = img.width();
  const int h = img.height();
  const int side = 2 * radius + 1;
  std::vector<double> spatial(static_cast<std::size_t>(side) * side);
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      spatial[static_cast<std::size_t>(dy + radius) * side + (dx + radius)] =
          std::exp(-(dx * dx + dy * dy) / (2.0 * sigma_space * sigma_space));
    }
  }
  const double range_coeff = -1.0 / (2.0 * sigma_range * sigma_range);

  std::vector<double> out(img.size());
  for (int y = 0; y < h; ++y) {
    const int y_lo = std::max(0, y - radius);
    const int y_hi = std::min(h - 1, y + radius);
    for (int x = 0; x < w; ++x) {
      const int x_lo = std::max(0, x - radius);
      const int x_hi = std::min(w - 1, x + radius);
      const double center = img.at(x, y);
      double num = 0.0;
      double den = 0.0;
      for (int yy = y_lo; yy <= y_hi; ++yy) {
        const double* srow = &spatial[static_cast<std::size_t>(yy - y + radius) * side];
        for (int xx = x_lo; xx <= x_hi; ++xx) {
          const double v = img.at(xx, yy);
          const double d = v - center;
          const double wgt = srow[xx - x + radius] * std::exp(range_coeff * d * d);
          num += wgt * v;
          den += wgt;
        }
      }
      // The centre weight is 1, so den >= 1.
      out[static_cast<std::size_t>(y) * w + x] = std::clamp(num / den, 0.0, 1.0);
    }
  }
  return GrayImage(w, h, std::move(out), img.source_depth());
}

GrayImage hist_equalize(const GrayImage& img, const BinaryMask* exclude, int bins) {
  if (bins < 2) fail_usage("equalization needs at least 2 bins");
  if (exclude != nullptr && !exclude->matches(img)) fail_data("exclusion mask shape mismatch");
  const auto px = img.pixels();
  const double top = bins - 1;
  auto level = [&](double v) {
    return std::clamp(static_cast<int>(std::floor(v * top + 0.5)), 0, bins - 1);
  };

  std::vector<std::size_t> hist(static_cast<std::size_t>(bins), 0);
  std::size_t included = 0;
  for (std::size_t i = 0; i < px.size(); ++i) {
    if (exclude != nullptr && (*exclude)[i]) continue;
    ++hist[static_cast<std::size_t>(level(px[i]))];
    ++included;
  }
  if (included == 0) fail_data("empty histogram");

  std::vector<double> lut(static_cast<std::size_t>(bins), 0.0);
  std::size_t cdf = 0;
  std::size_t cdf_min = 0;
  for (std::size_t k = 0; k < hist.size(); ++k) {
    cdf += hist[k];
    if (cdf_min == 0 && cdf > 0) cdf_min = cdf;
    if (included == cdf_min) {
      lut[k] = 0.0;  // single occupied level
    } else if (cdf >= cdf_min) {
      lut[k] = static_cast<double>(cdf - cdf_min) / static_cast<double>(included - cdf_min);
    }  // levels below the first occupied one (excluded pixels only) map to 0
  }

  std::vector<double> out(px.size());
  for (std::size_t i = 0; i < px.size(); ++i) out[i] = lut[static_cast<std::size_t>(level(px[i]))];
  return GrayImage(img.width(), img.height(), std::move(out), img.source_depth());
}

MultiChannelSample compose_sample(const GrayImage& i_p, const GrayImage& i_b,
                                  const GrayImage& i_eq) {
  if (!i_p.same_shape(i_b) || !i_p.same_shape(i_eq)) fail_data("channel dimension mismatch");
  MultiChannelSample s;
  s.channels[0] = resize_bilinear(i_p, kSampleSide, kSampleSide);
  s.channels[1] = resize_bilinear(i_b, kSampleSide, kSampleSide);
  s.channels[2] = resize_bilinear(i_eq, kSampleSide, kSampleSide);
  return s;
}

PreprocessOutput preprocess_chain(const GrayImage& img, const PreprocessConfig& cfg) {
  cfg.validate();
  DiaphragmRemoval d = remove_diaphragm(img, cfg);
  PreprocessOutput out;
  out.i_b = bilateral_filter(d.image, cfg.bilateral_radius, cfg.sigma_space, cfg.sigma_range);
  out.i_eq = hist_equalize(d.image, d.removed ? &d.mask : nullptr, cfg.equalize_bins);
  out.i_p = std::move(d.image);
  out.diaphragm_mask = std::move(d.mask);
  out.removed = d.removed;
  return out;
}

PreprocessResult preprocess_image(const GrayImage& img, const PreprocessConfig& cfg,
                                  PreprocessMode mode) {
  cfg.validate();
  switch (mode) {
    case PreprocessMode::simple:
      return {compose_sample(img, img, img), false};
    case PreprocessMode::filter_base: {
      const GrayImage b = bilateral_filter(img, cfg.bilateral_radius, cfg.sigma_space, cfg.sigma_range);
      const GrayImage eq = hist_equalize(img, nullptr, cfg.equalize_bins);
      return {compose_sample(img, b, eq), false};
    }
    case PreprocessMode::full: {
      const PreprocessOutput o = preprocess_chain(img, cfg);
      return {compose_sample(o.i_p, o.i_b, o.i_eq), o.removed};
    }
  }
  fail_usage("unknown preprocessing mode");
}

// ---- .mcs ------------------------------------------------------------------

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}

constexpr std::size_t kMcsHeader = 4 + 4 * 4;

}  // namespace

std::vector<std::uint8_t> encode_sample(const MultiChannelSample& s) {
  s.validate();
  std::vector<std::uint8_t> out = {'C', 'X', 'R', '1'};
  out.reserve(kMcsHeader + 3 * kSampleSide * kSampleSide * 4);
  put_u32(out, 3);
  put_u32(out, kSampleSide);
  put_u32(out, kSampleSide);
  put_u32(out, s.label ? static_cast<std::uint32_t>(class_index(*s.label)) : kUnlabeled);
  for (const auto& plane : s.channels) {
    for (double v : plane.pixels()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

MultiChannelSample decode_sample(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMcsHeader || bytes[0] != 'C' || bytes[1] != 'X' || bytes[2] != 'R' ||
      bytes[3] != '1') {
    fail_data("not a CXR1 sample file");
  }
  const std::uint32_t channels = get_u32(bytes, 4);
  const std::uint32_t w = get_u32(bytes, 8);
  const std::uint32_t h = get_u32(bytes, 12);
  const std::uint32_t label = get_u32(bytes, 16);
  if (channels != 3 || w != kSampleSide || h != kSampleSide) fail_data("sample must be 3x224x224");
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  if (bytes.size() != kMcsHeader + 3 * plane * 4) fail_data("truncated sample file");

  MultiChannelSample s;
  if (label != kUnlabeled) s.label = class_from_index(label);
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<double> data(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      const float f = std::bit_cast<float>(get_u32(bytes, kMcsHeader + (c * plane + i) * 4));
      data[i] = std::clamp(static_cast<double>(f), 0.0, 1.0);
    }
    s.channels[c] = GrayImage(static_cast<int>(w), static_cast<int>(h), std::move(data));
  }
  return s;
}

void save_sample(const MultiChannelSample& s, const std::filesystem::path& path) {
  const auto bytes = encode_sample(s);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_data("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail_data("cannot write " + path.string());
}

MultiChannelSample load_sample(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_data("cannot open sample " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  return decode_sample(bytes);
}

}  // namespace cxr
