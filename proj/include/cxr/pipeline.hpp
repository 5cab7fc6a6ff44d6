#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cxr/augment.hpp"
#include "cxr/dataset.hpp"
#include "cxr/metrics.hpp"
#include "cxr/nn/network.hpp"
#include "cxr/nn/optimizer.hpp"
#include "cxr/nn/trainer.hpp"
#include "cxr/preprocess.hpp"

namespace cxr {

/// Micro-scale stand-in for the VGG16 base: conv blocks of `block_widths`
/// channels (each `convs_per_block` convolutions and a 2x2 pool) on
/// input_size x input_size inputs, then the dense head.
struct NetConfig {
  std::size_t input_size = 32;
  std::vector<std::size_t> block_widths = {8, 16};
  std::size_t convs_per_block = 1;
  std::vector<std::size_t> head_widths = {256, 128};
  int freeze_below = 0;

  nn::NetworkSpec build() const;
};

struct SplitConfig {
  double test_fraction = 0.10;
  double val_fraction = 0.10;
};

struct PathsConfig {
  std::filesystem::path manifest;
  std::filesystem::path samples = "samples";
  std::filesystem::path checkpoints;  ///< empty: same as reports
  std::filesystem::path reports = "reports";
};

/// Flat "section.key = value" configuration. Lines starting with '#' are comments.
struct PipelineConfig {
  PreprocessConfig preprocess;
  AugmentConfig augment;
  bool augment_enabled = true;
  nn::AdamConfig optimizer;
  std::size_t batch_size = 4;
  std::size_t max_epochs = 200;
  nn::PlateauSchedule schedule;
  SplitConfig split;
  NetConfig net;
  PathsConfig paths;
  std::uint64_t seed = 0;
  unsigned threads = 0;  ///< preprocessing workers; 0 = hardware concurrency

  /// Sets one key; throws Error(usage) for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  void validate() const;
};

PipelineConfig parse_config(const std::string& text);
/// Relative paths.* values in the file resolve against the file's directory.
PipelineConfig load_config(const std::filesystem::path& path);

/// Every key the parser accepts, for documentation and tests.
std::vector<std::string> config_keys();

// ---- commands -----------------------------------------------------------------

struct PhantomOptions {
  std::optional<ClassLabel> cls;  ///< nullopt: every class
  std::size_t count = 10;          ///< per class
  std::uint64_t seed = 0;
  int size = 128;
  std::filesystem::path out_dir;
};

/// Writes phantom PGMs plus out_dir/manifest.csv (appending to an existing
/// manifest). Returns the manifest path.
std::filesystem::path cmd_phantom(const PhantomOptions& opts);

struct ImageStatus {
  std::string path;
  ClassLabel label;
  bool ok = false;
  bool removed = false;
  std::string error;
};

struct PreprocessSummary {
  std::vector<ImageStatus> images;
  std::array<std::size_t, kNumClasses> class_counts{};  ///< successful images
  std::size_t failed = 0;

  /// More than 10% of the images failed.
  bool too_many_failures() const { return failed * 10 > images.size(); }
  std::string render() const;
};

std::filesystem::path sample_path(const PipelineConfig& cfg, const ManifestRecord& r,
                                  PreprocessMode mode);

/// One <stem>.<mode>.mcs per manifest record under paths.samples, plus
/// summary.<mode>.csv. Images are processed on worker threads; failures are
/// recorded and skipped.
PreprocessSummary cmd_preprocess(const PipelineConfig& cfg, PreprocessMode mode,
                                 const std::function<void(const std::string&)>& log = {});

struct RunOptions {
  std::optional<std::filesystem::path> pretrained;  ///< import conv-block weights
};

struct RunResult {
  ClassificationReport report;
  std::vector<nn::EpochRecord> history;
  std::size_t best_epoch = 0;
  std::filesystem::path out_dir;
};

/// split -> train -> best-validation checkpoint -> test predictions -> report.
/// Writes history.csv, best.ckpt, predictions.csv, report.txt and report.kv
/// under <reports>/<mode>/.
RunResult cmd_run(const PipelineConfig& cfg, PreprocessMode mode, const RunOptions& opts = {},
                  const std::function<void(const std::string&)>& log = {});

struct AblationResult {
  std::vector<AblationRow> rows;
  std::string table;
};

/// Runs all three modes with the same seed; writes ablation.txt under <reports>.
AblationResult cmd_ablate(const PipelineConfig& cfg,
                          const std::function<void(const std::string&)>& log = {});

/// Report from a user-supplied matrix, no training involved.
ClassificationReport cmd_report(const ConfusionMatrix3& m, ClassLabel positive);

}  // namespace cxr
