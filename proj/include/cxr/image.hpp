#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "cxr/labels.hpp"

namespace cxr {

/// Single-channel raster with intensities normalized to [0, 1], row-major.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, double fill = 0.0, int source_depth = 8);
  /// Takes ownership of `data`; throws if the size or any value is out of range.
  GrayImage(int width, int height, std::vector<double> data, int source_depth = 8);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int source_depth() const noexcept { return source_depth_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double at(int x, int y) const { return data_[index(x, y)]; }
  double& at(int x, int y) { return data_[index(x, y)]; }

  std::span<const double> pixels() const noexcept { return data_; }
  std::span<double> pixels() noexcept { return data_; }

  bool same_shape(const GrayImage& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  int source_depth_ = 8;
  std::vector<double> data_;
};

/// One boolean per pixel, row-major. Stored as bytes (0/1).
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, bool fill = false);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool v) { bits_[index(x, y)] = v ? 1 : 0; }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }

  std::size_t count() const noexcept;
  bool any() const noexcept { return count() > 0; }

  bool matches(const GrayImage& img) const noexcept {
    return width_ == img.width() && height_ == img.height();
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

inline constexpr int kSampleSide = 224;

/// Three 224x224 planes fed to the network. Channel order is (I_p, I_b, I_eq).
struct MultiChannelSample {
  std::array<GrayImage, 3> channels;
  std::optional<ClassLabel> label;

  /// Throws unless all planes are kSampleSide x kSampleSide.
  void validate() const;
};

// ---- I/O -----------------------------------------------------------------

/// Reads binary PGM (P5, maxval 255 or 65535) or grayscale PNG (8/16 bit).
GrayImage load_image(const std::filesystem::path& path);

/// Writes PGM, or PNG when the extension is ".png". depth is 8 or 16.
void save_image(const GrayImage& img, const std::filesystem::path& path, int depth = 8);

/// Encodes `img` as a binary PGM byte stream ("P5\n<w> <h>\n<maxval>\n" + samples).
std::vector<std::uint8_t> encode_pgm(const GrayImage& img, int depth = 8);
GrayImage decode_pgm(std::span<const std::uint8_t> bytes);

// ---- elementary raster ops -------------------------------------------------

/// Bilinear resampling with half-pixel centers and edge clamping.
GrayImage resize_bilinear(const GrayImage& img, int width, int height);

/// Box-filter resampling: each output pixel is the area-weighted mean of the
/// input pixels it covers. Used to shrink samples to the network resolution.
GrayImage resize_area(const GrayImage& img, int width, int height);

/// (v_min, v_max) over all pixels.
std::pair<double, double> intensity_range(const GrayImage& img);

}  // namespace cxr
