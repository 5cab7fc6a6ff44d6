#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "cxr/error.hpp"
#include "cxr/metrics.hpp"
#include "cxr/random.hpp"

using namespace cxr;

namespace {

const ConfusionMatrix3 kFull({{{260, 24, 4}, {16, 494, 8}, {0, 0, 42}}});
const ConfusionMatrix3 kFilterBase({{{228, 55, 5}, {6, 503, 9}, {1, 0, 41}}});
const ConfusionMatrix3 kSimple({{{197, 81, 10}, {4, 506, 8}, {1, 1, 40}}});

double r2(const Rate& r) { return round_display(r.value(), 2); }

ConfusionMatrix3 random_matrix(Rng& rng) {
  ConfusionMatrix3::Counts c{};
  for (auto& row : c)
    for (auto& v : row) v = rng.index(40);
  c[0][0] += 1;
  return ConfusionMatrix3(c);
}

}  // namespace

TEST_CASE("confusion") {
  const std::vector<int> t{0, 1, 2}, p{0, 1, 2};
  const auto m = confusion(t, p);
  CHECK(m.trace() == 3);
  CHECK(m.total() == 3);
  const std::vector<int> t2{2, 2}, p2{0, 1};
  const auto m2 = confusion(t2, p2);
  CHECK(m2.at(2, 0) == 1);
  CHECK(m2.at(2, 1) == 1);
  CHECK(m2.at(2, 2) == 0);
  CHECK(kFull.trace() == 796);
  CHECK(kFull.total() == 848);
  const std::vector<int> empty;
  CHECK_THROWS_AS(confusion(empty, empty), Error);
  CHECK_THROWS_AS(confusion(t, p2), Error);
  const std::vector<int> bad{3};
  CHECK_THROWS_AS(confusion(bad, bad), Error);
  CHECK_THROWS_AS(ConfusionMatrix3(ConfusionMatrix3::Counts{}), Error);

  Rng rng(1);
  std::vector<int> tr(500), pr(500);
  for (std::size_t i = 0; i < 500; ++i) {
    tr[i] = static_cast<int>(rng.index(3));
    pr[i] = static_cast<int>(rng.index(3));
  }
  const auto mr = confusion(tr, pr);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(mr.row_sum(c) == static_cast<std::uint64_t>(std::count(tr.begin(), tr.end(), static_cast<int>(c))));
    CHECK(mr.col_sum(c) == static_cast<std::uint64_t>(std::count(pr.begin(), pr.end(), static_cast<int>(c))));
  }
}

TEST_CASE("parse_matrix") {
  CHECK(parse_matrix("260,24,4;16,494,8;0,0,42") == kFull);
  CHECK(parse_matrix(" 260, 24, 4 ; 16,494,8;0,0,42 ") == kFull);
  CHECK_THROWS_AS(parse_matrix("1,2;3,4"), Error);
  CHECK_THROWS_AS(parse_matrix("1,2,x;3,4,5;6,7,8"), Error);
  CHECK_THROWS_AS(parse_matrix("1,2,-3;3,4,5;6,7,8"), Error);
  CHECK_THROWS_AS(parse_matrix("0,0,0;0,0,0;0,0,0"), Error);
}

TEST_CASE("per-class metrics of the full-model matrix") {
  const auto pc = per_class_metrics(kFull);
  CHECK(pc[2].precision.value() == doctest::Approx(42.0 / 54.0));
  CHECK(pc[2].recall.value() == 1.0);
  CHECK(pc[2].f1.value() == doctest::Approx(84.0 / 96.0));
  CHECK(r2(pc[2].precision) == 0.78);
  CHECK(r2(pc[2].f1) == 0.88);
  CHECK(r2(pc[0].precision) == 0.94);
  CHECK(r2(pc[0].recall) == 0.90);
  CHECK(r2(pc[0].f1) == 0.92);
  CHECK(r2(pc[1].precision) == 0.95);
  CHECK(r2(pc[1].recall) == 0.95);
  CHECK(r2(pc[1].f1) == 0.95);
  CHECK(pc[0].support == 288);
  CHECK(pc[1].support == 518);
  CHECK(pc[2].support == 42);

  const auto id = per_class_metrics(ConfusionMatrix3({{{3, 0, 0}, {0, 4, 0}, {0, 0, 5}}}));
  for (const auto& m : id) {
    CHECK(m.precision.value() == 1.0);
    CHECK(m.recall.value() == 1.0);
    CHECK(m.f1.value() == 1.0);
  }
}

TEST_CASE("undefined rates") {
  // nothing predicted as covid19; covid19 row present
  const ConfusionMatrix3 m({{{5, 0, 0}, {0, 5, 0}, {3, 0, 0}}});
  const auto pc = per_class_metrics(m);
  CHECK_FALSE(pc[2].precision.has_value());
  CHECK(pc[2].recall.value() == 0.0);
  CHECK_FALSE(pc[2].f1.has_value());
  const auto r = build_report(m);
  CHECK_FALSE(r.warnings.empty());
  CHECK(r.macro.precision.value() == doctest::Approx((5.0 / 8.0 + 1.0) / 2.0));
  CHECK(render_report_text(r).find("—") != std::string::npos);
  CHECK(render_report_kv(r).find("covid19.precision=undefined") != std::string::npos);

  // no covid19 truth rows: recall undefined
  const ConfusionMatrix3 m2({{{5, 0, 1}, {0, 5, 0}, {0, 0, 0}}});
  CHECK_FALSE(per_class_metrics(m2)[2].recall.has_value());
}

TEST_CASE("overall accuracy") {
  CHECK(overall_accuracy(kFull) == 796.0 / 848.0);
  CHECK(kFilterBase.trace() == 772);
  CHECK(round_display(100 * overall_accuracy(kFilterBase), 1) == 91.0);
  CHECK(kSimple.trace() == 743);
  CHECK(round_display(100 * overall_accuracy(kSimple), 1) == 87.6);
}

TEST_CASE("macro and weighted averages") {
  const std::vector<Rate> prec{0.94, 0.95, 0.78};
  CHECK(round_display(macro_avg(prec).value(), 2) == 0.89);
  const std::vector<Rate> rec{0.90, 0.95, 1.00};
  CHECK(round_display(macro_avg(rec).value(), 2) == 0.95);
  const std::vector<Rate> same{0.3, 0.3, 0.3};
  CHECK(macro_avg(same).value() == doctest::Approx(0.3));

  const std::vector<std::uint64_t> sup{288, 518, 42};
  CHECK(weighted_avg(prec, sup).value() == doctest::Approx((0.94 * 288 + 0.95 * 518 + 0.78 * 42) / 848));
  CHECK(round_display(weighted_avg(prec, sup).value(), 2) == 0.94);
  const std::vector<std::uint64_t> eq{5, 5, 5};
  CHECK(weighted_avg(prec, eq).value() == doctest::Approx(macro_avg(prec).value()));
  const std::vector<std::uint64_t> one{0, 7, 0};
  CHECK(weighted_avg(prec, one).value() == doctest::Approx(0.95));
  const std::vector<std::uint64_t> none{0, 0, 0};
  CHECK_THROWS_AS(weighted_avg(prec, none), Error);

  const std::vector<Rate> gap{0.5, std::nullopt, 1.0};
  std::vector<std::string> warnings;
  CHECK(macro_avg(gap, &warnings).value() == 0.75);
  CHECK(warnings.size() == 1);
  const std::vector<Rate> all_gap{std::nullopt, std::nullopt, std::nullopt};
  CHECK_FALSE(macro_avg(all_gap).has_value());

  const auto r = build_report(kFull);
  CHECK(round_display(r.macro.precision.value(), 2) == 0.89);
  CHECK(round_display(r.macro.recall.value(), 2) == 0.95);
  CHECK(round_display(r.macro.f1.value(), 2) == 0.92);
  CHECK(round_display(r.weighted.precision.value(), 2) == 0.94);
  CHECK(round_display(r.weighted.recall.value(), 2) == 0.94);
  CHECK(round_display(r.weighted.f1.value(), 2) == 0.94);
}

TEST_CASE("accuracy equals the support-weighted mean of recalls") {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const auto m = random_matrix(rng);
    const auto pc = per_class_metrics(m);
    std::vector<Rate> rec;
    std::vector<std::uint64_t> sup;
    for (const auto& c : pc) {
      rec.push_back(c.recall);
      sup.push_back(c.support);
    }
    CHECK(weighted_avg(rec, sup).value() == doctest::Approx(overall_accuracy(m)).epsilon(1e-12));
  }
}

TEST_CASE("cohen's kappa") {
  CHECK(cohens_kappa(kFilterBase) == doctest::Approx(0.821).epsilon(5e-4));
  CHECK(round_display(cohens_kappa(kFilterBase), 2) == 0.82);
  CHECK(cohens_kappa(kSimple) == doctest::Approx(0.748).epsilon(5e-4));
  CHECK(round_display(cohens_kappa(kSimple), 2) == 0.75);
  CHECK(cohens_kappa(kFull) == doctest::Approx(0.8805).epsilon(1e-4));
  // p_e of the full matrix: (288*276 + 518*518 + 42*54) / 848^2
  const double pe = (288.0 * 276 + 518.0 * 518 + 42.0 * 54) / (848.0 * 848.0);
  CHECK(cohens_kappa(kFull) == doctest::Approx((796.0 / 848 - pe) / (1 - pe)).epsilon(1e-14));

  CHECK(cohens_kappa(ConfusionMatrix3({{{3, 0, 0}, {0, 4, 0}, {0, 0, 0}}})) == doctest::Approx(1.0));
  std::vector<std::string> w;
  CHECK(cohens_kappa(ConfusionMatrix3({{{9, 0, 0}, {0, 0, 0}, {0, 0, 0}}}), &w) == 0.0);
  CHECK(w.size() == 1);

  SUBCASE("matches a recomputation from raw label lists") {
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
      const auto m = random_matrix(rng);
      std::vector<int> truth, pred;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          for (std::uint64_t k = 0; k < m.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)); ++k) {
            truth.push_back(i);
            pred.push_back(j);
          }
      const double n = static_cast<double>(truth.size());
      double agree = 0, pe = 0;
      for (std::size_t i = 0; i < truth.size(); ++i) agree += truth[i] == pred[i] ? 1 : 0;
      for (int c = 0; c < 3; ++c)
        pe += (static_cast<double>(std::count(truth.begin(), truth.end(), c)) / n) *
              (static_cast<double>(std::count(pred.begin(), pred.end(), c)) / n);
      const double po = agree / n;
      const double k = cohens_kappa(m);
      CHECK(k == doctest::Approx((po - pe) / (1 - pe)).epsilon(1e-12));
      CHECK(k <= 1.0 + 1e-15);
      const bool diagonal = m.trace() == m.total();
      CHECK((std::abs(k - 1.0) < 1e-12) == diagonal);
    }
  }
}

TEST_CASE("binary collapse and stats") {
  const auto b = collapse_binary(kFull, ClassLabel::covid19);
  CHECK(b == BinaryCounts{42, 12, 794, 0});
  const auto s = binary_stats(b);
  CHECK(s.sensitivity.value() == 1.0);
  CHECK(s.specificity.value() == doctest::Approx(794.0 / 806.0));
  CHECK(round_display(100 * s.specificity.value(), 1) == 98.5);
  CHECK(s.accuracy.value() == doctest::Approx(836.0 / 848.0));
  CHECK(round_display(100 * s.accuracy.value(), 1) == 98.6);
  CHECK(s.recall == s.sensitivity);

  CHECK(collapse_binary(kFilterBase, ClassLabel::covid19) == BinaryCounts{41, 14, 792, 1});
  const auto id = collapse_binary(ConfusionMatrix3({{{3, 0, 0}, {0, 4, 0}, {0, 0, 5}}}), ClassLabel::normal);
  CHECK(id.fp == 0);
  CHECK(id.fn == 0);

  const auto none = binary_stats({0, 0, 5, 3});
  CHECK(none.sensitivity.value() == 0.0);
  CHECK_FALSE(none.precision.has_value());
  CHECK(none.f1.value() == 0.0);  // 2TP/(2TP+FP+FN) = 0/3

  const auto half = binary_stats({1, 1, 1, 1});
  CHECK(half.sensitivity.value() == 0.5);
  CHECK(half.specificity.value() == 0.5);
  CHECK(half.accuracy.value() == 0.5);
  CHECK(half.f1.value() == 0.5);

  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    const auto m = random_matrix(rng);
    for (ClassLabel c : kAllClasses) {
      const auto bc = collapse_binary(m, c);
      CHECK(bc.total() == m.total());
      const auto st = binary_stats(bc);
      CHECK(st.recall == st.sensitivity);
    }
  }
}

TEST_CASE("wald interval") {
  auto disp = [](Interval i) { return std::pair{round_display(i.low, 2), round_display(i.high, 2)}; };
  CHECK(disp(wald_ci(796, 848)) == std::pair{0.92, 0.96});
  CHECK(disp(wald_ci(772, 848)) == std::pair{0.89, 0.93});
  CHECK(disp(wald_ci(743, 848)) == std::pair{0.85, 0.90});

  const auto plain = wald_ci(796, 848, 1.96, false);
  const double p = 796.0 / 848, se = std::sqrt(p * (1 - p) / 848);
  CHECK(plain.low == doctest::Approx(p - 1.96 * se).epsilon(1e-14));
  CHECK(plain.high == doctest::Approx(p + 1.96 * se).epsilon(1e-14));
  const auto cc = wald_ci(796, 848);
  CHECK(cc.low == doctest::Approx(p - 1.96 * se - 0.5 / 848).epsilon(1e-14));

  CHECK(wald_ci(10, 10).high == 1.0);
  CHECK(wald_ci(0, 10).low == 0.0);
  CHECK_THROWS_AS(wald_ci(1, 0), Error);
  CHECK_THROWS_AS(wald_ci(5, 4), Error);

  // width scales as 1/sqrt(n) at fixed p
  const auto w = [](Interval i) { return i.high - i.low; };
  CHECK(w(wald_ci(30, 100, 1.96, false)) / w(wald_ci(120, 400, 1.96, false)) == doctest::Approx(2.0));
  CHECK(w(wald_ci(120, 400)) < w(wald_ci(30, 100)));
}

TEST_CASE("display rounding is half-up") {
  CHECK(round_display(0.875, 2) == 0.88);
  CHECK(round_display(0.125, 2) == 0.13);
  CHECK(round_display(93.867, 1) == 93.9);
  CHECK(round_display(0.8804, 2) == 0.88);
}

TEST_CASE("text report mirrors the classification table") {
  const std::string text = render_report_text(build_report(kFull));
  CHECK(text.find("Precision") != std::string::npos);
  CHECK(text.find("Support") != std::string::npos);
  CHECK(text.find("COVID19                0.78     1.00      0.88             42") != std::string::npos);
  CHECK(text.find("Macro avg              0.89     0.95      0.92            848") != std::string::npos);
  CHECK(text.find("Weighted avg           0.94     0.94      0.94            848") != std::string::npos);
  CHECK(text.find("93.9% (796/848), 95% CI [0.92,0.96]") != std::string::npos);
  CHECK(text.find("Cohen's kappa: 0.88") != std::string::npos);
  CHECK(text.find("specificity 98.5% (794/806)") != std::string::npos);
  CHECK(text.find("Accuracy 98.6% (836/848)") != std::string::npos);

  const std::string kv = render_report_kv(build_report(kFull));
  CHECK(kv.find("correct=796\n") != std::string::npos);
  CHECK(kv.find("binary.tn=794\n") != std::string::npos);
}

TEST_CASE("ablation table") {
  const std::vector<AblationRow> rows{{"simple", kSimple}, {"filter-base", kFilterBase}, {"full", kFull}};
  const std::string t = render_ablation_table(rows);
  CHECK(t.find("87.6%") != std::string::npos);
  CHECK(t.find("[0.85,0.90]") != std::string::npos);
  CHECK(t.find("91.0%") != std::string::npos);
  CHECK(t.find("[0.89,0.93]") != std::string::npos);
  CHECK(t.find("93.9%") != std::string::npos);
  CHECK(t.find("0.82") != std::string::npos);
  CHECK(t.find("0.75") != std::string::npos);
}
