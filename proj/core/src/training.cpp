#include "csanet/training.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "csanet/error.hpp"
#include "csanet/key_values.hpp"
#include "csanet/metrics.hpp"
#include "csanet/ops.hpp"

namespace csanet {

std::string epoch_csv_header() { return "epoch,train_loss,train_acc,eval_acc,effective_batch"; }

std::string epoch_csv_row(const EpochLog& log) {
  std::string row = std::to_string(log.epoch) + "," + encode_value(log.train_loss) + ",";
  if (!std::isnan(log.train_acc)) row += encode_value(log.train_acc);
  row += ",";
  if (log.eval_acc) row += encode_value(*log.eval_acc);
  row += "," + std::to_string(log.effective_batch);
  return row;
}

template <typename T>
Trainer<T>::Trainer(CsanetModel<T>& model, const TrainOptions& options)
    : model_(model),
      options_(options),
      adam_(model.parameters(), options.adam),
      shuffle_rng_(Rng::derive(options.seed, "shuffle")),
      augment_rng_(Rng::derive(options.seed, "augmentation")),
      dropout_rng_(Rng::derive(options.seed, "dropout")) {
  if (options_.batch_size == 0) throw ConfigError("must be positive", "train.batch_size");
}

template <typename T>
EpochLog Trainer<T>::train_epoch(const TrialSet& train, const TrialSet* eval) {
  const ModelConfig& cfg = model_.config();
  if (train.channels != cfg.channels || train.time_steps != cfg.time_steps) {
    throw ConfigError("train data dimensions do not match the model");
  }
  if (train.empty()) throw DataError("empty train set");

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng_.uniform_index(i)]);

  const std::size_t factor = options_.sr.enabled ? 2 : 1;
  EpochLog log;
  log.epoch = ++epoch_;
  log.effective_batch = std::min(options_.batch_size, train.size()) * factor;

  double loss_sum = 0.0;
  std::size_t loss_trials = 0;
  for (std::size_t start = 0; start < order.size(); start += options_.batch_size) {
    const std::size_t end = std::min(order.size(), start + options_.batch_size);
    if ((end - start) * factor < 2) continue;
    const std::span<const std::size_t> idx(order.data() + start, end - start);
    const TrialSet batch = sr_augment(train.subset(idx), options_.sr, augment_rng_);
    std::vector<std::size_t> targets;
    targets.reserve(batch.size());
    for (const auto& t : batch.trials) targets.push_back(t.label);

    model_.zero_grad();
    const Tensor<T> logits = model_.forward(trials_to_tensor<T>(batch), true, &dropout_rng_);
    Tensor<T> loss = cross_entropy(logits, targets);
    const double value = static_cast<double>(loss.item());
    if (!std::isfinite(value)) {
      throw NumericalError("non-finite training loss at epoch " + std::to_string(log.epoch) + ", step " +
                           std::to_string(log.steps + 1));
    }
    loss.backward();
    adam_.step();
    loss_sum += value * static_cast<double>(batch.size());
    loss_trials += batch.size();
    ++log.steps;
  }
  if (log.steps == 0) throw DataError("no batch with at least two trials; the train set is too small");
  log.train_loss = loss_sum / static_cast<double>(loss_trials);
  log.train_acc = options_.measure_train_accuracy ? evaluate(model_, train, options_.batch_size).accuracy
                                                  : std::numeric_limits<double>::quiet_NaN();
  if (eval && !eval->empty()) log.eval_acc = evaluate(model_, *eval, options_.batch_size).accuracy;
  return log;
}

template <typename T>
std::vector<EpochLog> Trainer<T>::fit(const TrialSet& train, const TrialSet* eval,
                                      const std::function<bool(const EpochLog&)>& on_epoch) {
  std::vector<EpochLog> logs;
  for (std::size_t e = 0; e < options_.epochs; ++e) {
    logs.push_back(train_epoch(train, eval));
    if (on_epoch && !on_epoch(logs.back())) break;
  }
  return logs;
}

template class Trainer<float>;
template class Trainer<double>;

}  // namespace csanet
