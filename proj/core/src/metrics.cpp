#include "csanet/metrics.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "csanet/error.hpp"
#include "csanet/key_values.hpp"

namespace csanet {

ConfusionMatrix::ConfusionMatrix(std::size_t n_classes) : n_(n_classes), counts_(n_classes * n_classes, 0) {}

ConfusionMatrix ConfusionMatrix::from_rows(const std::vector<std::vector<std::uint64_t>>& rows) {
  ConfusionMatrix cm(rows.size());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    if (rows[t].size() != rows.size()) throw DataError("confusion matrix must be square");
    for (std::size_t p = 0; p < rows.size(); ++p) cm.counts_[t * cm.n_ + p] = rows[t][p];
  }
  return cm;
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t count) {
  if (truth >= n_ || predicted >= n_) throw DataError("class index out of range for the confusion matrix");
  counts_[truth * n_ + predicted] += count;
}

std::uint64_t ConfusionMatrix::at(std::size_t truth, std::size_t predicted) const {
  if (truth >= n_ || predicted >= n_) throw DataError("class index out of range for the confusion matrix");
  return counts_[truth * n_ + predicted];
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::row_total(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < n_; ++p) s += at(truth, p);
  return s;
}

std::uint64_t ConfusionMatrix::column_total(std::size_t predicted) const {
  std::uint64_t s = 0;
  for (std::size_t t = 0; t < n_; ++t) s += at(t, predicted);
  return s;
}

ConfusionMatrix ConfusionMatrix::transposed() const {
  ConfusionMatrix out(n_);
  for (std::size_t t = 0; t < n_; ++t) {
    for (std::size_t p = 0; p < n_; ++p) out.counts_[p * n_ + t] = counts_[t * n_ + p];
  }
  return out;
}

double accuracy(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw DataError("accuracy of an empty confusion matrix");
  std::uint64_t diag = 0;
  for (std::size_t k = 0; k < cm.n_classes(); ++k) diag += cm.at(k, k);
  return static_cast<double>(diag) / static_cast<double>(total);
}

double std_across(std::span<const double> values) {
  if (values.empty()) throw DataError("standard deviation of an empty list");
  const double m = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= m;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / m);
}

double kappa(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw DataError("kappa of an empty confusion matrix");
  const double p_o = accuracy(cm);
  const double n = static_cast<double>(total);
  double p_e = 0.0;
  for (std::size_t k = 0; k < cm.n_classes(); ++k) {
    p_e += static_cast<double>(cm.row_total(k)) * static_cast<double>(cm.column_total(k));
  }
  p_e /= n * n;
  if (p_e == 1.0) {
    if (p_o == 1.0) return 1.0;
    throw UndefinedValueError("kappa is undefined: chance agreement is 1 but observed agreement is not");
  }
  return (p_o - p_e) / (1.0 - p_e);
}

std::vector<double> per_class_recall(const ConfusionMatrix& cm) {
  std::vector<double> out(cm.n_classes(), 0.0);
  for (std::size_t k = 0; k < cm.n_classes(); ++k) {
    const std::uint64_t row = cm.row_total(k);
    if (row) out[k] = static_cast<double>(cm.at(k, k)) / static_cast<double>(row);
  }
  return out;
}

EvalReport make_report(const ConfusionMatrix& cm, std::vector<SubjectAccuracy> per_subject) {
  EvalReport r;
  r.confusion = cm;
  r.accuracy = accuracy(cm);
  r.kappa = kappa(cm);
  r.per_class_recall = per_class_recall(cm);
  if (!per_subject.empty()) {
    std::vector<double> accs;
    for (const auto& s : per_subject) accs.push_back(s.accuracy);
    r.subject_std = std_across(accs);
  }
  r.per_subject = std::move(per_subject);
  return r;
}

// ---- CSV ---------------------------------------------------------------------

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = line.find(',');
    out.push_back(line.substr(0, comma));
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return out;
}

double csv_double(std::string_view text, const std::string& what) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || end != text.data() + text.size()) {
    throw FormatError("bad number for " + what + ": '" + std::string(text) + "'", 0);
  }
  return v;
}

std::uint64_t csv_uint(std::string_view text, const std::string& what) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || end != text.data() + text.size()) {
    throw FormatError("bad count for " + what + ": '" + std::string(text) + "'", 0);
  }
  return v;
}

}  // namespace

std::string report_to_csv(const EvalReport& report) {
  std::string out = "metric,value\n";
  const std::size_t L = report.confusion.n_classes();
  out += "n_classes," + std::to_string(L) + "\n";
  out += "n_trials," + std::to_string(report.confusion.total()) + "\n";
  out += "accuracy," + encode_value(report.accuracy) + "\n";
  out += "kappa," + encode_value(report.kappa) + "\n";
  for (std::size_t k = 0; k < report.per_class_recall.size(); ++k) {
    out += "recall." + std::to_string(k) + "," + encode_value(report.per_class_recall[k]) + "\n";
  }
  for (const auto& s : report.per_subject) {
    out += "subject." + std::to_string(s.subject) + ".accuracy," + encode_value(s.accuracy) + "\n";
  }
  if (report.subject_std) out += "subject_std," + encode_value(*report.subject_std) + "\n";
  out += "\ntrue\\pred";
  for (std::size_t p = 0; p < L; ++p) out += "," + std::to_string(p);
  out += "\n";
  for (std::size_t t = 0; t < L; ++t) {
    out += std::to_string(t);
    for (std::size_t p = 0; p < L; ++p) out += "," + std::to_string(report.confusion.at(t, p));
    out += "\n";
  }
  return out;
}

EvalReport report_from_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    lines.push_back(text.substr(0, eol));
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
  }
  if (lines.empty() || lines[0] != "metric,value") throw FormatError("missing 'metric,value' header", 0);

  EvalReport r;
  std::size_t L = 0;
  std::size_t i = 1;
  std::map<std::size_t, double> recall;
  for (; i < lines.size() && !lines[i].empty(); ++i) {
    const auto cells = split_csv(lines[i]);
    if (cells.size() != 2) throw FormatError("expected metric,value on line " + std::to_string(i + 1), 0);
    const std::string name(cells[0]);
    if (name == "n_classes") {
      L = csv_uint(cells[1], name);
    } else if (name == "n_trials") {
      // derived from the confusion block
    } else if (name == "accuracy") {
      r.accuracy = csv_double(cells[1], name);
    } else if (name == "kappa") {
      r.kappa = csv_double(cells[1], name);
    } else if (name == "subject_std") {
      r.subject_std = csv_double(cells[1], name);
    } else if (name.starts_with("recall.")) {
      recall[csv_uint(std::string_view(name).substr(7), name)] = csv_double(cells[1], name);
    } else if (name.starts_with("subject.") && name.ends_with(".accuracy")) {
      const std::string_view id = std::string_view(name).substr(8, name.size() - 8 - 9);
      r.per_subject.push_back({static_cast<std::uint32_t>(csv_uint(id, name)), csv_double(cells[1], name)});
    } else {
      throw FormatError("unknown metric '" + name + "'", 0);
    }
  }
  for (const auto& [k, v] : recall) {
    if (k != r.per_class_recall.size()) throw FormatError("recall rows are not contiguous", 0);
    r.per_class_recall.push_back(v);
  }
  ++i;  // blank separator
  if (i >= lines.size() || !lines[i].starts_with("true\\pred")) throw FormatError("missing confusion block", 0);
  std::vector<std::vector<std::uint64_t>> rows;
  for (++i; i < lines.size() && !lines[i].empty(); ++i) {
    const auto cells = split_csv(lines[i]);
    if (cells.size() != L + 1) throw FormatError("confusion row of wrong width", 0);
    std::vector<std::uint64_t> row;
    for (std::size_t c = 1; c < cells.size(); ++c) row.push_back(csv_uint(cells[c], "confusion"));
    rows.push_back(std::move(row));
  }
  if (rows.size() != L) throw FormatError("confusion block has " + std::to_string(rows.size()) + " rows", 0);
  r.confusion = ConfusionMatrix::from_rows(rows);
  return r;
}

// ---- JSON --------------------------------------------------------------------

std::string report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  const std::size_t L = report.confusion.n_classes();
  j["n_classes"] = L;
  j["n_trials"] = report.confusion.total();
  j["accuracy"] = report.accuracy;
  j["kappa"] = report.kappa;
  j["per_class_recall"] = report.per_class_recall;
  auto subjects = nlohmann::ordered_json::array();
  for (const auto& s : report.per_subject) subjects.push_back({{"subject", s.subject}, {"accuracy", s.accuracy}});
  j["per_subject"] = subjects;
  j["subject_std"] = report.subject_std ? nlohmann::ordered_json(*report.subject_std) : nlohmann::ordered_json();
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < L; ++t) {
    auto row = nlohmann::ordered_json::array();
    for (std::size_t p = 0; p < L; ++p) row.push_back(report.confusion.at(t, p));
    rows.push_back(row);
  }
  j["confusion"] = rows;
  return j.dump(2) + "\n";
}

EvalReport report_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    EvalReport r;
    r.accuracy = j.at("accuracy").get<double>();
    r.kappa = j.at("kappa").get<double>();
    r.per_class_recall = j.at("per_class_recall").get<std::vector<double>>();
    for (const auto& s : j.at("per_subject")) {
      r.per_subject.push_back({s.at("subject").get<std::uint32_t>(), s.at("accuracy").get<double>()});
    }
    if (!j.at("subject_std").is_null()) r.subject_std = j.at("subject_std").get<double>();
    r.confusion = ConfusionMatrix::from_rows(j.at("confusion").get<std::vector<std::vector<std::uint64_t>>>());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad JSON report: ") + e.what(), 0);
  }
}

std::string report_summary(const EvalReport& report) {
  char buf[128];
  std::string out;
  std::snprintf(buf, sizeof buf, "trials    %llu\n", static_cast<unsigned long long>(report.confusion.total()));
  out += buf;
  std::snprintf(buf, sizeof buf, "accuracy  %.2f%%\n", 100.0 * report.accuracy);
  out += buf;
  std::snprintf(buf, sizeof buf, "kappa     %.4f\n", report.kappa);
  out += buf;
  for (std::size_t k = 0; k < report.per_class_recall.size(); ++k) {
    std::snprintf(buf, sizeof buf, "recall[%zu] %.2f%%\n", k, 100.0 * report.per_class_recall[k]);
    out += buf;
  }
  if (report.subject_std && report.per_subject.size() > 1) {
    std::snprintf(buf, sizeof buf, "subject std %.2f\n", 100.0 * *report.subject_std);
    out += buf;
  }
  return out;
}

// ---- model evaluation ----------------------------------------------------------

template <typename T>
std::vector<std::size_t> predict(CsanetModel<T>& model, const TrialSet& set, std::size_t batch_size) {
  const ModelConfig& cfg = model.config();
  if (set.channels != cfg.channels || set.time_steps != cfg.time_steps) {
    throw ConfigError("data is " + std::to_string(set.channels) + "x" + std::to_string(set.time_steps) +
                      " but the model expects " + std::to_string(cfg.channels) + "x" +
                      std::to_string(cfg.time_steps));
  }
  if (set.n_classes > cfg.n_classes) {
    throw ConfigError("data has " + std::to_string(set.n_classes) + " classes, model " +
                      std::to_string(cfg.n_classes));
  }
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  NoGradGuard no_grad;
  std::vector<std::size_t> out;
  out.reserve(set.size());
  for (std::size_t start = 0; start < set.size(); start += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(set.size(), start + batch_size); ++i) idx.push_back(i);
    const auto logits = model.forward(trials_to_tensor<T>(set, idx), false, nullptr);
    for (std::size_t c : predict_classes(logits)) out.push_back(c);
  }
  return out;
}

template <typename T>
EvalReport evaluate(CsanetModel<T>& model, const TrialSet& set, std::size_t batch_size) {
  const auto predicted = predict(model, set, batch_size);
  ConfusionMatrix cm(model.config().n_classes);
  std::map<std::uint32_t, std::pair<std::size_t, std::size_t>> by_subject;  // correct, total
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& t = set.trials[i];
    cm.add(t.label, predicted[i]);
    auto& [correct, total] = by_subject[t.subject_id];
    correct += predicted[i] == t.label ? 1 : 0;
    ++total;
  }
  std::vector<SubjectAccuracy> per_subject;
  for (const auto& [subject, ct] : by_subject) {
    per_subject.push_back({subject, static_cast<double>(ct.first) / static_cast<double>(ct.second)});
  }
  return make_report(cm, std::move(per_subject));
}

template std::vector<std::size_t> predict<float>(CsanetModel<float>&, const TrialSet&, std::size_t);
template std::vector<std::size_t> predict<double>(CsanetModel<double>&, const TrialSet&, std::size_t);
template EvalReport evaluate<float>(CsanetModel<float>&, const TrialSet&, std::size_t);
template EvalReport evaluate<double>(CsanetModel<double>&, const TrialSet&, std::size_t);

}  // namespace csanet
