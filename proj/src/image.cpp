#include "cxr/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cxr/error.hpp"

namespace cxr {

namespace {

void check_dims(int width, int height) {
  if (width <= 0 || height <= 0) {
    fail_data("image dimensions must be positive, got " + std::to_string(width) + "x" +
              std::to_string(height));
  }
}

}  // namespace

GrayImage::GrayImage(int width, int height, double fill, int source_depth)
    : width_(width), height_(height), source_depth_(source_depth) {
  check_dims(width, height);
  if (!(fill >= 0.0 && fill <= 1.0)) fail_data("fill intensity outside [0,1]");
  data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

GrayImage::GrayImage(int width, int height, std::vector<double> data, int source_depth)
    : width_(width), height_(height), source_depth_(source_depth), data_(std::move(data)) {
  check_dims(width, height);
  if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    fail_data("pixel count does not match dimensions");
  }
  for (double v : data_) {
    if (!(v >= 0.0 && v <= 1.0)) fail_data("intensity outside [0,1]");
  }
}

BinaryMask::BinaryMask(int width, int height, bool fill)
    : width_(width), height_(height),
      bits_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill ? 1 : 0) {
  check_dims(width, height);
}

std::size_t BinaryMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

void MultiChannelSample::validate() const {
  for (const auto& plane : channels) {
    if (plane.width() != kSampleSide || plane.height() != kSampleSide) {
      fail_data("sample planes must be 224x224");
    }
  }
}

GrayImage resize_bilinear(const GrayImage& img, int width, int height) {
  check_dims(width, height);
  if (img.empty()) fail_data("cannot resize an empty image");
  if (width == img.width() && height == img.height()) return img;

  const int sw = img.width();
  const int sh = img.height();
  const double sx_scale = static_cast<double>(sw) / width;
  const double sy_scale = static_cast<double>(sh) / height;

  // Per-axis source index pairs and weights.
  struct Tap {
    int i0, i1;
    double w1;
  };
  auto taps = [](int out, int in, double scale) {
    std::vector<Tap> t(static_cast<std::size_t>(out));
    for (int o = 0; o < out; ++o) {
      double s = (o + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(in - 1));
      int i0 = static_cast<int>(std::floor(s));
      int i1 = std::min(i0 + 1, in - 1);
      t[static_cast<std::size_t>(o)] = {i0, i1, s - i0};
    }
    return t;
  };
  const auto xt = taps(width, sw, sx_scale);
  const auto yt = taps(height, sh, sy_scale);

  std::vector<double> out(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const Tap& ty = yt[static_cast<std::size_t>(y)];
    for (int x = 0; x < width; ++x) {
      const Tap& tx = xt[static_cast<std::size_t>(x)];
      const double top = img.at(tx.i0, ty.i0) * (1.0 - tx.w1) + img.at(tx.i1, ty.i0) * tx.w1;
      const double bot = img.at(tx.i0, ty.i1) * (1.0 - tx.w1) + img.at(tx.i1, ty.i1) * tx.w1;
      const double v = top * (1.0 - ty.w1) + bot * ty.w1;
      out[static_cast<std::size_t>(y) * width + x] = std::clamp(v, 0.0, 1.0);
    }
  }
  return GrayImage(width, height, std::move(out), img.source_depth());
}

GrayImage resize_area(const GrayImage& img, int width, int height) {
  check_dims(width, height);
  if (img.empty()) fail_data("cannot resize an empty image");
  if (width == img.width() && height == img.height()) return img;

  // Overlap weights of each output cell with the input cells along one axis.
  struct Span {
    int first;
    std::vector<double> weights;
  };
  auto spans = [](int out, int in) {
    std::vector<Span> s(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
      const double lo = o * scale;
      const double hi = (o + 1) * scale;
      const int first = static_cast<int>(std::floor(lo));
      const int last = std::min(in - 1, static_cast<int>(std::ceil(hi)) - 1);
      Span& sp = s[static_cast<std::size_t>(o)];
      sp.first = first;
      for (int i = first; i <= last; ++i) {
        const double w = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
        sp.weights.push_back(std::max(0.0, w) / scale);
      }
    }
    return s;
  };
  const auto xs = spans(width, img.width());
  const auto ys = spans(height, img.height());

  std::vector<double> out(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const Span& sy = ys[static_cast<std::size_t>(y)];
    for (int x = 0; x < width; ++x) {
      const Span& sx = xs[static_cast<std::size_t>(x)];
      double acc = 0.0;
      for (std::size_t j = 0; j < sy.weights.size(); ++j) {
        double row = 0.0;
        for (std::size_t i = 0; i < sx.weights.size(); ++i) {
          row += sx.weights[i] * img.at(sx.first + static_cast<int>(i), sy.first + static_cast<int>(j));
        }
        acc += sy.weights[j] * row;
      }
      out[static_cast<std::size_t>(y) * width + x] = std::clamp(acc, 0.0, 1.0);
    }
  }
  return GrayImage(width, height, std::move(out), img.source_depth());
}

std::pair<double, double> intensity_range(const GrayImage& img) {
  if (img.empty()) fail_data("intensity range of an empty image");
  const auto [lo, hi] = std::minmax_element(img.pixels().begin(), img.pixels().end());
  return {*lo, *hi};
}

}  // namespace cxr
