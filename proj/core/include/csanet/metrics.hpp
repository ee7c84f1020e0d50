#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csanet/data.hpp"
#include "csanet/model.hpp"

namespace csanet {

// L x L counts; rows are true classes, columns predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t n_classes = 0);
  // Throws DataError for ragged or non-square input.
  static ConfusionMatrix from_rows(const std::vector<std::vector<std::uint64_t>>& rows);

  void add(std::size_t truth, std::size_t predicted, std::uint64_t count = 1);
  std::uint64_t at(std::size_t truth, std::size_t predicted) const;
  std::size_t n_classes() const { return n_; }
  std::uint64_t total() const;
  std::uint64_t row_total(std::size_t truth) const;
  std::uint64_t column_total(std::size_t predicted) const;
  ConfusionMatrix transposed() const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint64_t> counts_;
};

// trace / total. Throws DataError on an empty matrix.
double accuracy(const ConfusionMatrix& cm);

// Population standard deviation (divisor M). Throws DataError when empty.
double std_across(std::span<const double> values);

// Cohen's kappa (p_o - p_e) / (1 - p_e). When p_e == 1 the result is 1 if
// p_o == 1 and UndefinedValueError otherwise.
double kappa(const ConfusionMatrix& cm);

// Recall per true class; classes without any true instance report 0.
std::vector<double> per_class_recall(const ConfusionMatrix& cm);

struct SubjectAccuracy {
  std::uint32_t subject = 0;
  double accuracy = 0.0;

  bool operator==(const SubjectAccuracy&) const = default;
};

struct EvalReport {
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  double kappa = 0.0;
  std::vector<double> per_class_recall;
  std::vector<SubjectAccuracy> per_subject;
  std::optional<double> subject_std;

  bool operator==(const EvalReport&) const = default;
};

// Fills every derived field from the confusion matrix and per-subject list.
EvalReport make_report(const ConfusionMatrix& cm, std::vector<SubjectAccuracy> per_subject = {});

// CSV: a `metric,value` header and rows, a blank line, then the confusion
// block headed `true\pred,0,1,...`. Numbers round-trip exactly.
std::string report_to_csv(const EvalReport& report);
EvalReport report_from_csv(std::string_view text);
std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(std::string_view text);

// Human-readable summary; percentages with two decimals.
std::string report_summary(const EvalReport& report);

// Eval-mode predictions in batches (no dropout, running batch-norm stats).
template <typename T>
std::vector<std::size_t> predict(CsanetModel<T>& model, const TrialSet& set, std::size_t batch_size = 64);

// Throws ConfigError when the set's dimensions differ from the model's.
template <typename T>
EvalReport evaluate(CsanetModel<T>& model, const TrialSet& set, std::size_t batch_size = 64);

}  // namespace csanet
