#include "cxr/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "cxr/error.hpp"

namespace cxr {

ConfusionMatrix3::ConfusionMatrix3(const Counts& counts) : counts_(counts) {
  for (const auto& row : counts_) {
    for (auto v : row) total_ += v;
  }
  if (total_ == 0) fail_data("confusion matrix is all zero");
}

std::uint64_t ConfusionMatrix3::trace() const noexcept {
  return counts_[0][0] + counts_[1][1] + counts_[2][2];
}

std::uint64_t ConfusionMatrix3::row_sum(std::size_t c) const {
  return counts_.at(c)[0] + counts_.at(c)[1] + counts_.at(c)[2];
}

std::uint64_t ConfusionMatrix3::col_sum(std::size_t c) const {
  return counts_[0].at(c) + counts_[1].at(c) + counts_[2].at(c);
}

ConfusionMatrix3 confusion(std::span<const int> truth, std::span<const int> pred) {
  if (truth.size() != pred.size()) fail_data("truth and prediction lengths differ");
  if (truth.empty()) fail_data("no labels to tabulate");
  ConfusionMatrix3::Counts c{};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] > 2 || pred[i] < 0 || pred[i] > 2) fail_data("label out of range");
    ++c[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(pred[i])];
  }
  return ConfusionMatrix3(c);
}

ConfusionMatrix3 parse_matrix(const std::string& text) {
  ConfusionMatrix3::Counts c{};
  std::istringstream rows(text);
  std::string row;
  std::size_t r = 0;
  while (std::getline(rows, row, ';')) {
    if (r >= kNumClasses) fail_data("matrix must have 3 rows");
    std::istringstream cells(row);
    std::string cell;
    std::size_t k = 0;
    while (std::getline(cells, cell, ',')) {
      if (k >= kNumClasses) fail_data("matrix rows must have 3 entries");
      std::size_t used = 0;
      long long v = 0;
      try {
        v = std::stoll(cell, &used);
      } catch (const std::exception&) {
        fail_data("malformed matrix entry \"" + cell + "\"");
      }
      while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
      if (used != cell.size() || v < 0) fail_data("malformed matrix entry \"" + cell + "\"");
      c[r][k++] = static_cast<std::uint64_t>(v);
    }
    if (k != kNumClasses) fail_data("matrix rows must have 3 entries");
    ++r;
  }
  if (r != kNumClasses) fail_data("matrix must have 3 rows");
  return ConfusionMatrix3(c);
}

namespace {

Rate ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::array<ClassMetrics, kNumClasses> per_class_metrics(const ConfusionMatrix3& m) {
  std::array<ClassMetrics, kNumClasses> out{};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const std::uint64_t tp = m.at(c, c);
    ClassMetrics& cm = out[c];
    cm.support = m.row_sum(c);
    cm.precision = ratio(tp, m.col_sum(c));
    cm.recall = ratio(tp, m.row_sum(c));
    // Harmonic mean written as 2TP / (row + col); undefined when precision is.
    if (cm.precision && cm.recall) cm.f1 = ratio(2 * tp, m.row_sum(c) + m.col_sum(c));
  }
  return out;
}

double overall_accuracy(const ConfusionMatrix3& m) {
  return static_cast<double>(m.trace()) / static_cast<double>(m.total());
}

Rate macro_avg(std::span<const Rate> values, std::vector<std::string>* warnings) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const Rate& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  if (n < values.size() && warnings != nullptr) {
    warnings->push_back("macro average excludes undefined per-class values");
  }
  return sum / static_cast<double>(n);
}

Rate weighted_avg(std::span<const Rate> values, std::span<const std::uint64_t> supports,
                  std::vector<std::string>* warnings) {
  if (values.size() != supports.size()) fail_usage("values and supports differ in length");
  std::uint64_t total = 0;
  for (auto s : supports) total += s;
  if (total == 0) fail_data("weighted average with zero total support");
  double sum = 0.0;
  std::uint64_t used = 0;
  bool skipped = false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i]) {
      skipped = skipped || supports[i] > 0;
      continue;
    }
    sum += static_cast<double>(supports[i]) * *values[i];
    used += supports[i];
  }
  if (used == 0) return std::nullopt;
  if (skipped && warnings != nullptr) {
    warnings->push_back("weighted average excludes undefined per-class values");
  }
  return sum / static_cast<double>(used);
}

double cohens_kappa(const ConfusionMatrix3& m, std::vector<std::string>* warnings) {
  const double n = static_cast<double>(m.total());
  const double p_o = static_cast<double>(m.trace()) / n;
  double p_e = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    p_e += static_cast<double>(m.row_sum(c)) * static_cast<double>(m.col_sum(c));
  }
  p_e /= n * n;
  if (p_e >= 1.0) {
    if (warnings != nullptr) warnings->push_back("kappa undefined (chance agreement is 1); reported as 0");
    return 0.0;
  }
  return (p_o - p_e) / (1.0 - p_e);
}

BinaryCounts collapse_binary(const ConfusionMatrix3& m, ClassLabel positive) {
  const std::size_t p = class_index(positive);
  BinaryCounts b;
  b.tp = m.at(p, p);
  b.fn = m.row_sum(p) - b.tp;
  b.fp = m.col_sum(p) - b.tp;
  b.tn = m.total() - b.tp - b.fn - b.fp;
  return b;
}

BinaryStats binary_stats(const BinaryCounts& b) {
  if (b.total() == 0) fail_data("binary counts are all zero");
  BinaryStats s;
  s.sensitivity = ratio(b.tp, b.tp + b.fn);
  s.specificity = ratio(b.tn, b.tn + b.fp);
  s.accuracy = ratio(b.tp + b.tn, b.total());
  s.recall = ratio(b.tp, b.tp + b.fn);
  s.f1 = ratio(2 * b.tp, 2 * b.tp + b.fp + b.fn);
  s.precision = ratio(b.tp, b.tp + b.fp);
  return s;
}

Interval wald_ci(std::uint64_t successes, std::uint64_t n, double z, bool continuity_correction) {
  if (n == 0) fail_data("confidence interval needs n > 0");
  if (successes > n) fail_data("successes exceed trials");
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  double half = z * std::sqrt(p * (1.0 - p) / nn);
  if (continuity_correction) half += 0.5 / nn;
  return {std::max(0.0, p - half), std::min(1.0, p + half)};
}

ClassificationReport build_report(const ConfusionMatrix3& m, ClassLabel positive) {
  ClassificationReport r{m, per_class_metrics(m)};
  r.n = m.total();
  r.correct = m.trace();
  r.accuracy = overall_accuracy(m);

  std::array<Rate, kNumClasses> prec, rec, f1;
  std::array<std::uint64_t, kNumClasses> support;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    prec[c] = r.per_class[c].precision;
    rec[c] = r.per_class[c].recall;
    f1[c] = r.per_class[c].f1;
    support[c] = r.per_class[c].support;
    if (!prec[c]) {
      r.warnings.push_back("precision undefined for class " + std::string(class_name(class_from_index(c))) +
                           " (never predicted)");
    }
  }
  r.macro = {macro_avg(prec, &r.warnings), macro_avg(rec, &r.warnings), macro_avg(f1, &r.warnings)};
  r.weighted = {weighted_avg(prec, support, &r.warnings), weighted_avg(rec, support, &r.warnings),
                weighted_avg(f1, support, &r.warnings)};
  r.kappa = cohens_kappa(m, &r.warnings);
  r.accuracy_ci = wald_ci(r.correct, r.n);
  r.positive = positive;
  r.binary = collapse_binary(m, positive);
  r.binary_stats = binary_stats(r.binary);
  return r;
}

double round_display(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::floor(v * scale + 0.5 + 1e-9) / scale;
}

namespace {

const char* kDisplayNames[kNumClasses] = {"Normal", "Other Pneumonia", "COVID19"};

std::string fmt_rate(const Rate& r, int decimals = 2) {
  if (!r) return "—";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, round_display(*r, decimals));
  return buf;
}

std::string fmt_percent(const Rate& r) {
  if (!r) return "—";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", round_display(*r * 100.0, 1));
  return buf;
}

std::string fmt_full(const Rate& r) {
  if (!r) return "undefined";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", *r);
  return buf;
}

std::string pad_left(const std::string& s, std::size_t width) {
  // "—" is three bytes but one column.
  std::size_t cols = 0;
  for (unsigned char ch : s) cols += (ch & 0xC0) != 0x80;
  return cols >= width ? s : std::string(width - cols, ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string table_row(const std::string& name, const std::string& p, const std::string& r,
                      const std::string& f, std::uint64_t support) {
  return pad_right(name, 16) + pad_left(p, 11) + pad_left(r, 9) + pad_left(f, 10) +
         pad_left(std::to_string(support), 15) + "\n";
}

std::string ci_text(const Interval& ci) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "[%.2f,%.2f]", round_display(ci.low, 2), round_display(ci.high, 2));
  return buf;
}

}  // namespace

std::string render_report_text(const ClassificationReport& r) {
  std::string out = pad_right("", 16) + pad_left("Precision", 11) + pad_left("Recall", 9) +
                    pad_left("F1-score", 10) + pad_left("Support cases", 15) + "\n";
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& m = r.per_class[c];
    out += table_row(kDisplayNames[c], fmt_rate(m.precision), fmt_rate(m.recall), fmt_rate(m.f1), m.support);
  }
  out += table_row("Accuracy", "---", "---", fmt_rate(r.accuracy), r.n);
  out += table_row("Macro avg", fmt_rate(r.macro.precision), fmt_rate(r.macro.recall),
                   fmt_rate(r.macro.f1), r.n);
  out += table_row("Weighted avg", fmt_rate(r.weighted.precision), fmt_rate(r.weighted.recall),
                   fmt_rate(r.weighted.f1), r.n);

  char buf[256];
  out += "\nConfusion matrix (rows: truth, columns: prediction)\n";
  out += pad_right("", 16) + pad_left("Normal", 10) + pad_left("Pneumonia", 11) + pad_left("COVID19", 9) + "\n";
  const char* row_names[kNumClasses] = {"Normal", "Pneumonia", "COVID19"};
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    out += pad_right(row_names[t], 16) + pad_left(std::to_string(r.matrix.at(t, 0)), 10) +
           pad_left(std::to_string(r.matrix.at(t, 1)), 11) + pad_left(std::to_string(r.matrix.at(t, 2)), 9) + "\n";
  }
  std::snprintf(buf, sizeof buf, "\nOverall accuracy: %s (%llu/%llu), 95%% CI %s\n",
                fmt_percent(r.accuracy).c_str(), static_cast<unsigned long long>(r.correct),
                static_cast<unsigned long long>(r.n), ci_text(r.accuracy_ci).c_str());
  out += buf;
  std::snprintf(buf, sizeof buf, "Cohen's kappa: %s\n", fmt_rate(r.kappa).c_str());
  out += buf;

  const BinaryCounts& b = r.binary;
  const auto u = [](std::uint64_t v) { return static_cast<unsigned long long>(v); };
  std::snprintf(buf, sizeof buf, "\n%s vs rest: TP=%llu FN=%llu FP=%llu TN=%llu\n",
                std::string(class_name(r.positive)).c_str(), u(b.tp), u(b.fn), u(b.fp), u(b.tn));
  out += buf;
  std::snprintf(buf, sizeof buf, "Sensitivity %s (%llu/%llu), specificity %s (%llu/%llu)\n",
                fmt_percent(r.binary_stats.sensitivity).c_str(), u(b.tp), u(b.tp + b.fn),
                fmt_percent(r.binary_stats.specificity).c_str(), u(b.tn), u(b.tn + b.fp));
  out += buf;
  std::snprintf(buf, sizeof buf, "Accuracy %s (%llu/%llu), recall %s, F1-score %s\n",
                fmt_percent(r.binary_stats.accuracy).c_str(), u(b.tp + b.tn), u(b.total()),
                fmt_percent(r.binary_stats.recall).c_str(), fmt_rate(r.binary_stats.f1).c_str());
  out += buf;
  for (const auto& w : r.warnings) out += "warning: " + w + "\n";
  return out;
}

std::string render_report_kv(const ClassificationReport& r) {
  std::ostringstream out;
  auto line = [&](const std::string& k, const std::string& v) { out << k << '=' << v << '\n'; };
  const auto u = [](std::uint64_t v) { return std::to_string(v); };
  line("n", u(r.n));
  line("correct", u(r.correct));
  line("accuracy", fmt_full(r.accuracy));
  line("accuracy_ci_low", fmt_full(r.accuracy_ci.low));
  line("accuracy_ci_high", fmt_full(r.accuracy_ci.high));
  line("kappa", fmt_full(r.kappa));
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const std::string name(class_name(class_from_index(c)));
    line(name + ".precision", fmt_full(r.per_class[c].precision));
    line(name + ".recall", fmt_full(r.per_class[c].recall));
    line(name + ".f1", fmt_full(r.per_class[c].f1));
    line(name + ".support", u(r.per_class[c].support));
  }
  line("macro.precision", fmt_full(r.macro.precision));
  line("macro.recall", fmt_full(r.macro.recall));
  line("macro.f1", fmt_full(r.macro.f1));
  line("weighted.precision", fmt_full(r.weighted.precision));
  line("weighted.recall", fmt_full(r.weighted.recall));
  line("weighted.f1", fmt_full(r.weighted.f1));
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    for (std::size_t p = 0; p < kNumClasses; ++p) {
      line("matrix." + std::to_string(t) + "." + std::to_string(p), u(r.matrix.at(t, p)));
    }
  }
  line("binary.positive", std::string(class_name(r.positive)));
  line("binary.tp", u(r.binary.tp));
  line("binary.fn", u(r.binary.fn));
  line("binary.fp", u(r.binary.fp));
  line("binary.tn", u(r.binary.tn));
  line("binary.sensitivity", fmt_full(r.binary_stats.sensitivity));
  line("binary.specificity", fmt_full(r.binary_stats.specificity));
  line("binary.accuracy", fmt_full(r.binary_stats.accuracy));
  line("binary.recall", fmt_full(r.binary_stats.recall));
  line("binary.f1", fmt_full(r.binary_stats.f1));
  line("binary.precision", fmt_full(r.binary_stats.precision));
  return out.str();
}

std::string render_ablation_table(std::span<const AblationRow> rows) {
  std::string out = pad_right("Model", 16) + pad_right("Truth", 11) + pad_left("Normal", 8) +
                    pad_left("Pneumonia", 11) + pad_left("COVID19", 9) + pad_left("Accuracy", 10) +
                    pad_left("95% CI", 13) + pad_left("Kappa", 7) + "\n";
  const char* truth[kNumClasses] = {"Normal", "Pneumonia", "COVID19"};
  for (const AblationRow& row : rows) {
    const ConfusionMatrix3& m = row.matrix;
    const ClassificationReport r = build_report(m);
    for (std::size_t t = 0; t < kNumClasses; ++t) {
      out += pad_right(t == 0 ? row.mode : "", 16) + pad_right(truth[t], 11) +
             pad_left(std::to_string(m.at(t, 0)), 8) + pad_left(std::to_string(m.at(t, 1)), 11) +
             pad_left(std::to_string(m.at(t, 2)), 9);
      if (t == 0) {
        out += pad_left(fmt_percent(r.accuracy), 10) + pad_left(ci_text(r.accuracy_ci), 13) +
               pad_left(fmt_rate(r.kappa), 7);
      }
      out += "\n";
    }
  }
  return out;
}

}  // namespace cxr
