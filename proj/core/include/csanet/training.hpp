#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "csanet/adam.hpp"
#include "csanet/augment.hpp"
#include "csanet/data.hpp"
#include "csanet/model.hpp"
#include "csanet/rng.hpp"

namespace csanet {

struct TrainOptions {
  std::size_t epochs = 2000;
  std::size_t batch_size = 64;
  AdamOptions adam{};
  SrConfig sr{};
  std::uint64_t seed = 0;
  // Score the un-augmented train set in eval mode after every epoch.
  bool measure_train_accuracy = true;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  // Eval-mode accuracy on the un-augmented train set (NaN when not measured).
  double train_acc = 0.0;
  std::optional<double> eval_acc;
  // Trials per optimizer step of a full batch, after augmentation.
  std::size_t effective_batch = 0;
  std::size_t steps = 0;
};

// Header of the per-epoch CSV log and one row of it.
std::string epoch_csv_header();
std::string epoch_csv_row(const EpochLog& log);

// Mini-batch training with cross-entropy loss and Adam.
//
// Each epoch visits the train set in a freshly shuffled order. Per batch the
// S&R augmentation (when enabled) doubles the trials, then one Adam step is
// taken. Batches that would hold a single trial after augmentation are
// skipped, since batch norm needs two samples. The shuffle, augmentation and
// dropout draws come from the "shuffle", "augmentation" and "dropout"
// substreams of the seed.
template <typename T>
class Trainer {
 public:
  Trainer(CsanetModel<T>& model, const TrainOptions& options);

  EpochLog train_epoch(const TrialSet& train, const TrialSet* eval = nullptr);

  // Runs up to options.epochs epochs. `on_epoch` may return false to stop.
  std::vector<EpochLog> fit(const TrialSet& train, const TrialSet* eval = nullptr,
                            const std::function<bool(const EpochLog&)>& on_epoch = {});

  const Adam<T>& optimizer() const { return adam_; }
  std::size_t epochs_done() const { return epoch_; }

 private:
  CsanetModel<T>& model_;
  TrainOptions options_;
  Adam<T> adam_;
  Rng shuffle_rng_;
  Rng augment_rng_;
  Rng dropout_rng_;
  std::size_t epoch_ = 0;
};

extern template class Trainer<float>;
extern template class Trainer<double>;

}  // namespace csanet
