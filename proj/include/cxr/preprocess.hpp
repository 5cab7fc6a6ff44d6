#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>

#include "cxr/image.hpp"

namespace cxr {

enum class FillPolicy { image_minimum, zero };

struct PreprocessConfig {
  double threshold_fraction = 0.9;  ///< T = v_min + fraction * (v_max - v_min)
  int morph_radius = 1;             ///< square element of side 2r+1
  int connectivity = 8;             ///< 4 or 8
  int bilateral_radius = 5;
  double sigma_space = 3.0;
  double sigma_range = 0.1;
  int equalize_bins = 256;
  double max_blob_fraction = 0.6;  ///< skip removal when the blob covers more than this
  FillPolicy fill = FillPolicy::image_minimum;

  /// Throws Error(usage) when a field is out of range.
  void validate() const;
};

/// Ablation modes: raw image in all channels, filters without diaphragm
/// removal, or the complete chain.
enum class PreprocessMode { simple, filter_base, full };

std::string_view mode_name(PreprocessMode m);
std::optional<PreprocessMode> parse_mode(std::string_view name);

/// Foreground iff intensity >= v_min + fraction * (v_max - v_min).
BinaryMask threshold_segment(const GrayImage& img, double fraction);

BinaryMask erode(const BinaryMask& mask, int radius);
BinaryMask dilate(const BinaryMask& mask, int radius);

/// open, then close, then dilate; out-of-bounds pixels count as background.
BinaryMask morph_clean(const BinaryMask& mask, int radius);

struct Component {
  BinaryMask mask;
  std::size_t area = 0;
};

/// Largest connected foreground component. Ties go to the component whose
/// first pixel comes earliest in row-major order. nullopt when the mask is empty.
std::optional<Component> largest_component(const BinaryMask& mask, int connectivity);

struct DiaphragmRemoval {
  GrayImage image;
  BinaryMask mask;  ///< removed pixels; empty when removed == false
  bool removed = false;
};

DiaphragmRemoval remove_diaphragm(const GrayImage& img, const PreprocessConfig& cfg);

/// Edge-preserving smoothing over a (2r+1)^2 window clipped at the borders.
GrayImage bilateral_filter(const GrayImage& img, int radius, double sigma_space,
                           double sigma_range);

/// Histogram equalization with the cdf_min convention. Pixels in `exclude`
/// do not contribute to the histogram but are remapped through the same table.
GrayImage hist_equalize(const GrayImage& img, const BinaryMask* exclude, int bins);

/// Resizes the three planes to 224x224 in the order (I_p, I_b, I_eq).
MultiChannelSample compose_sample(const GrayImage& i_p, const GrayImage& i_b,
                                  const GrayImage& i_eq);

struct PreprocessOutput {
  GrayImage i_p;
  GrayImage i_b;
  GrayImage i_eq;
  BinaryMask diaphragm_mask;
  bool removed = false;
};

/// Full chain at source resolution: diaphragm removal, then both filters on I_p.
PreprocessOutput preprocess_chain(const GrayImage& img, const PreprocessConfig& cfg);

struct PreprocessResult {
  MultiChannelSample sample;
  bool removed = false;
};

PreprocessResult preprocess_image(const GrayImage& img, const PreprocessConfig& cfg,
                                  PreprocessMode mode);

inline MultiChannelSample preprocess_full(const GrayImage& img, const PreprocessConfig& cfg,
                                          PreprocessMode mode) {
  return preprocess_image(img, cfg, mode).sample;
}

// ---- .mcs sample files -----------------------------------------------------
//
// "CXR1", then u32 LE channels=3, width, height, label (255 = unlabeled),
// then three planes of f32 LE, row-major, plane-major.

inline constexpr std::uint32_t kUnlabeled = 255;

std::vector<std::uint8_t> encode_sample(const MultiChannelSample& s);
MultiChannelSample decode_sample(std::span<const std::uint8_t> bytes);
void save_sample(const MultiChannelSample& s, const std::filesystem::path& path);
MultiChannelSample load_sample(const std::filesystem::path& path);

}  // namespace cxr
