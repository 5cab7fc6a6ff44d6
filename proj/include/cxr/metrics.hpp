#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cxr/labels.hpp"

namespace cxr {

/// A rate that may be undefined (zero denominator).
using Rate = std::optional<double>;

/// 3x3 counts: rows are the true class, columns the predicted class, both in
/// the order (normal, pneumonia, covid19).
class ConfusionMatrix3 {
 public:
  using Counts = std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses>;

  /// Throws when every entry is zero.
  explicit ConfusionMatrix3(const Counts& counts);

  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts_[truth][pred]; }
  const Counts& counts() const noexcept { return counts_; }
  std::uint64_t total() const noexcept { return total_; }
  std::uint64_t trace() const noexcept;
  std::uint64_t row_sum(std::size_t c) const;
  std::uint64_t col_sum(std::size_t c) const;

  friend bool operator==(const ConfusionMatrix3&, const ConfusionMatrix3&) = default;

 private:
  Counts counts_;
  std::uint64_t total_ = 0;
};

ConfusionMatrix3 confusion(std::span<const int> truth, std::span<const int> pred);

/// Parses "a,b,c;d,e,f;g,h,i" (rows separated by ';').
ConfusionMatrix3 parse_matrix(const std::string& text);

struct ClassMetrics {
  Rate precision;
  Rate recall;
  Rate f1;
  std::uint64_t support = 0;
};

std::array<ClassMetrics, kNumClasses> per_class_metrics(const ConfusionMatrix3& m);

double overall_accuracy(const ConfusionMatrix3& m);

/// Unweighted mean of the defined entries; undefined entries are skipped and
/// reported through `warnings`. All undefined -> undefined.
Rate macro_avg(std::span<const Rate> values, std::vector<std::string>* warnings = nullptr);

/// Support-weighted mean of the defined entries (weights renormalized over
/// them). Throws if the total support is zero.
Rate weighted_avg(std::span<const Rate> values, std::span<const std::uint64_t> supports,
                  std::vector<std::string>* warnings = nullptr);

/// kappa = (p_o - p_e) / (1 - p_e); 0 with a warning when p_e == 1.
double cohens_kappa(const ConfusionMatrix3& m, std::vector<std::string>* warnings = nullptr);

struct BinaryCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const BinaryCounts&, const BinaryCounts&) = default;
};

/// One-vs-rest collapse around `positive`.
BinaryCounts collapse_binary(const ConfusionMatrix3& m, ClassLabel positive);

struct BinaryStats {
  Rate sensitivity;  ///< TP / (TP + FN)
  Rate specificity;  ///< TN / (TN + FP)
  Rate accuracy;     ///< (TP + TN) / n
  Rate recall;       ///< TP / (TP + FN), identical to sensitivity
  Rate f1;           ///< 2TP / (2TP + FP + FN)
  Rate precision;    ///< TP / (TP + FP)
};

BinaryStats binary_stats(const BinaryCounts& b);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Normal-approximation interval p ± (z * sqrt(p(1-p)/n) + c), clipped to
/// [0,1], where c = 1/(2n) with continuity correction and 0 without.
Interval wald_ci(std::uint64_t successes, std::uint64_t n, double z = 1.96,
                 bool continuity_correction = true);

struct AverageMetrics {
  Rate precision;
  Rate recall;
  Rate f1;
};

struct ClassificationReport {
  ConfusionMatrix3 matrix;
  std::array<ClassMetrics, kNumClasses> per_class;
  double accuracy = 0.0;
  std::uint64_t correct = 0;
  std::uint64_t n = 0;
  AverageMetrics macro;
  AverageMetrics weighted;
  double kappa = 0.0;
  Interval accuracy_ci;
  ClassLabel positive = ClassLabel::covid19;
  BinaryCounts binary;
  BinaryStats binary_stats;
  std::vector<std::string> warnings;
};

ClassificationReport build_report(const ConfusionMatrix3& m,
                                  ClassLabel positive = ClassLabel::covid19);

/// Half-up rounding to `decimals` places, for display only.
double round_display(double v, int decimals);

/// Table with Precision / Recall / F1-score / Support columns, accuracy,
/// macro and weighted rows, then kappa, CI and the binary collapse.
std::string render_report_text(const ClassificationReport& r);

/// One "name=value" line per metric at full precision; undefined -> "undefined".
std::string render_report_kv(const ClassificationReport& r);

struct AblationRow {
  std::string mode;
  ConfusionMatrix3 matrix;
};

/// Side-by-side matrices with accuracy (percent, 1 decimal), 95% CI and kappa.
std::string render_ablation_table(std::span<const AblationRow> rows);

}  // namespace cxr
