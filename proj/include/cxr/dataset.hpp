#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cxr/image.hpp"
#include "cxr/labels.hpp"

namespace cxr {

struct ManifestRecord {
  std::string path;
  ClassLabel label;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct Manifest {
  std::vector<ManifestRecord> records;
  /// Directory relative record paths are resolved against.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const ManifestRecord& r) const;
  std::array<std::size_t, kNumClasses> class_counts() const;
};

/// CSV with header "path,label"; labels normal|pneumonia|covid19.
Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(const std::string& text);
void save_manifest(const Manifest& m, const std::filesystem::path& path);

/// floor(x + 0.5), tolerant of representation error just below the half.
std::size_t round_half_up(double x);

struct SplitResult {
  std::vector<ManifestRecord> train;
  std::vector<ManifestRecord> validation;
  std::vector<ManifestRecord> test;
  std::uint64_t seed = 0;
};

/// Per-class shuffle, then test = round_half_up(test_frac * n_c) and
/// validation = round_half_up(val_frac * (n_c - test)) carved from the rest.
SplitResult stratified_split(const Manifest& m, double test_frac, double val_frac,
                             std::uint64_t seed);

/// Synthetic chest-like image: mid-gray body, two darker elliptical lung
/// fields, a bright band in the bottom fifth standing in for the diaphragm,
/// and class-dependent lung texture (smooth / coarse blotches / fine
/// peripheral speckle). Pure function of (cls, seed, size).
GrayImage generate_phantom(ClassLabel cls, std::uint64_t seed, int size);

/// Ground-truth regions of a phantom of the given size.
struct PhantomRegions {
  BinaryMask band;
  BinaryMask lungs;
};
PhantomRegions phantom_regions(int size);

}  // namespace cxr
