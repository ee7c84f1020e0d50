#include <gtest/gtest.h>

#include <json.hpp>

#include "csanet/error.hpp"
#include "csanet/gradcheck_suite.hpp"
#include "csanet/metrics.hpp"

using namespace csanet;

namespace {

// Kappa straight from its definition over raw counts.
double kappa_reference(const std::vector<std::vector<std::uint64_t>>& m) {
  double n = 0, agree = 0;
  const std::size_t L = m.size();
  std::vector<double> rows(L, 0), cols(L, 0);
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = 0; j < L; ++j) {
      n += m[i][j];
      rows[i] += m[i][j];
      cols[j] += m[i][j];
      if (i == j) agree += m[i][j];
    }
  double pe = 0;
  for (std::size_t k = 0; k < L; ++k) pe += rows[k] / n * (cols[k] / n);
  return (agree / n - pe) / (1 - pe);
}

}  // namespace

TEST(Metrics, PerfectAndChanceLevel) {
  const auto perfect = ConfusionMatrix::from_rows({{2, 0}, {0, 2}});
  EXPECT_EQ(accuracy(perfect), 1.0);
  EXPECT_EQ(kappa(perfect), 1.0);
  const auto chance = ConfusionMatrix::from_rows({{1, 1}, {1, 1}});
  EXPECT_EQ(accuracy(chance), 0.5);
  EXPECT_EQ(kappa(chance), 0.0);
}

TEST(Metrics, TextbookKappa) {
  const auto cm = ConfusionMatrix::from_rows({{20, 5}, {10, 15}});
  EXPECT_DOUBLE_EQ(accuracy(cm), 0.7);
  EXPECT_NEAR(kappa(cm), 0.4, 1e-15);
  EXPECT_EQ(per_class_recall(cm), (std::vector<double>{0.8, 0.6}));
}

TEST(Metrics, KappaMatchesReferenceAndIsSymmetric) {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const std::size_t L = 2 + rng.uniform_index(4);
    std::vector<std::vector<std::uint64_t>> rows(L, std::vector<std::uint64_t>(L));
    for (auto& r : rows)
      for (auto& v : r) v = rng.uniform_index(20);
    rows[0][1] += 1;  // avoid degenerate single-cell matrices
    rows[1][1] += 1;
    const auto cm = ConfusionMatrix::from_rows(rows);
    ASSERT_NEAR(kappa(cm), kappa_reference(rows), 1e-12);
    ASSERT_NEAR(kappa(cm), kappa(cm.transposed()), 1e-12);
    ASSERT_LE(kappa(cm), 1.0);
  }
}

TEST(Metrics, StdAcrossIsPopulationStd) {
  const std::vector<double> v{0.8, 0.6};
  EXPECT_NEAR(std_across(v), 0.1, 1e-15);
  const std::vector<double> one{0.5};
  EXPECT_EQ(std_across(one), 0.0);
  EXPECT_THROW(std_across(std::vector<double>{}), DataError);
}

TEST(Metrics, EmptyAndMalformedInputs) {
  EXPECT_THROW(accuracy(ConfusionMatrix(3)), DataError);
  EXPECT_THROW(kappa(ConfusionMatrix(3)), DataError);
  EXPECT_THROW(ConfusionMatrix::from_rows({{1, 2}, {3}}), DataError);
  ConfusionMatrix cm(2);
  EXPECT_THROW(cm.add(2, 0), DataError);
}

TEST(Metrics, AbsentClassHasZeroRecall) {
  const auto cm = ConfusionMatrix::from_rows({{3, 1, 0}, {0, 0, 0}, {1, 0, 2}});
  const auto r = per_class_recall(cm);
  EXPECT_DOUBLE_EQ(r[0], 0.75);
  EXPECT_EQ(r[1], 0.0);
  EXPECT_DOUBLE_EQ(r[2], 2.0 / 3.0);
}

TEST(Report, CsvAndJsonRoundTrip) {
  const auto cm = ConfusionMatrix::from_rows({{7, 2, 1}, {0, 9, 3}, {4, 1, 5}});
  const auto report = make_report(cm, {{1, 0.7}, {2, 1.0 / 3.0}, {5, 0.9}});
  ASSERT_TRUE(report.subject_std.has_value());
  EXPECT_EQ(report_from_csv(report_to_csv(report)), report);
  EXPECT_EQ(report_from_json(report_to_json(report)), report);
  const auto bare = make_report(cm);
  EXPECT_FALSE(bare.subject_std.has_value());
  EXPECT_EQ(report_from_csv(report_to_csv(bare)), bare);
  EXPECT_EQ(report_from_json(report_to_json(bare)), bare);
}

TEST(Report, CsvLayout) {
  const auto report = make_report(ConfusionMatrix::from_rows({{1, 1}, {0, 2}}));
  const auto csv = report_to_csv(report);
  EXPECT_TRUE(csv.starts_with("metric,value\n"));
  EXPECT_NE(csv.find("accuracy,0.75\n"), std::string::npos);
  EXPECT_NE(csv.find("\n\ntrue\\pred,0,1\n0,1,1\n1,0,2\n"), std::string::npos);
  const auto json = nlohmann::json::parse(report_to_json(report));
  EXPECT_EQ(json["accuracy"].get<double>(), 0.75);
  EXPECT_THROW(report_from_csv("garbage"), DataError);
}

TEST(Report, SummaryUsesPercentages) {
  const auto s = report_summary(make_report(ConfusionMatrix::from_rows({{20, 5}, {10, 15}})));
  EXPECT_NE(s.find("70.00"), std::string::npos);
}

TEST(Evaluate, CountsMatchPredictionsAndChecksDims) {
  const auto cfg = mini_model_config();
  CsanetModel<float> model(cfg, 3);
  SynthSpec spec;
  spec.channels = cfg.channels;
  spec.time_steps = cfg.time_steps;
  spec.n_classes = cfg.n_classes;
  spec.n_per_class = 5;
  spec.subjects = 2;
  const auto set = synth_generate(spec);
  const auto preds = predict(model, set, 3);
  const auto report = evaluate(model, set, 4);
  ASSERT_EQ(preds.size(), set.size());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == set.trials[i].label;
  EXPECT_EQ(report.confusion.total(), set.size());
  EXPECT_DOUBLE_EQ(report.accuracy, static_cast<double>(correct) / set.size());
  EXPECT_EQ(report.per_subject.size(), 2u);

  SynthSpec other = spec;
  other.channels = cfg.channels + 1;
  EXPECT_THROW(evaluate(model, synth_generate(other)), ConfigError);
}
