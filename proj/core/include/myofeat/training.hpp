#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "myofeat/convnet.hpp"
#include "myofeat/dataio.hpp"

namespace myofeat::training {

struct TrainConfig {
  double lr = 0.0404709;
  int batch_size = 512;
  double lambda = 0.1;
  double reversal_constant = -1.0;
  double anneal_factor = 5.0;
  int patience = 15;
  int max_epochs = 500;
  /// Standard training steps per epoch; 0 means one per participant so both
  /// trainers take the same number of optimiser steps.
  int standard_steps_per_epoch = 0;
  /// Separate optimiser steps for the source and target passes.
  bool split_steps = false;
  /// Target-pass normalisation: batch statistics or the target's stored ones.
  /// Either way the target's running statistics are never updated.
  convnet::BnSource target_bn = convnet::BnSource::Batch;
  int eval_chunk = 64;
  std::uint64_t seed = 0;
  convnet::Architecture arch;
  convnet::AdamConfig adam;

  void validate() const;
};

/// Cycles 1-3 train, cycle 4 validation, cycles 5-8 test.
struct Split {
  std::vector<dataio::Window> train;
  std::vector<dataio::Window> validation;
  std::vector<dataio::Window> test;
};

Split split_by_cycle(std::span<const dataio::Window> windows);

/// Windows of the listed participants only.
std::vector<dataio::Window> select_participants(std::span<const dataio::Window> windows,
                                                std::span<const int> participants);
std::vector<int> participants_of(std::span<const dataio::Window> windows);

struct DomainBatch {
  int participant = 0;
  int domain_label = 0;
  std::vector<std::size_t> windows;  // indices into the training windows
};

/// Source batch from participant p (domain label 0) and target batch from
/// q != p (domain label 1); processed consecutively, never merged.
struct DomainBatchPair {
  DomainBatch source;
  DomainBatch target;
};

/// One pair per participant, in shuffled order; the target participant is
/// drawn uniformly from the others. Batches hold min(batch_size, available)
/// windows sampled without replacement.
std::vector<DomainBatchPair> make_domain_batches(std::span<const dataio::Window> train,
                                                 int batch_size, std::uint64_t epoch_seed);

/// Plateau annealing with early stopping. After `patience` epochs without a
/// new best the rate is divided by `factor`; the second consecutive
/// annealing without a new best stops training.
class LrScheduler {
 public:
  enum class Action { Continue, Annealed, Stop };

  LrScheduler(double lr, double factor, int patience);
  Action observe(double validation_loss);
  double lr() const { return lr_; }
  int annealings() const { return annealings_; }
  double best() const { return best_; }
  int best_epoch() const { return best_epoch_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  int epoch_ = -1;
  int best_epoch_ = -1;
  double best_ = 0.0;
  int since_best_ = 0;
  int annealings_ = 0;
  int failed_annealings_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  int annealings = 0;
};

struct TrainResult {
  convnet::ConvNet<float> model;
  std::vector<EpochRecord> history;
  long steps = 0;
  int best_epoch = 0;
};

/// Aggregated training: gesture cross-entropy only, one shared statistics set.
TrainResult train_standard(std::span<const dataio::Window> train,
                           std::span<const dataio::Window> validation, const TrainConfig& config);

/// Multi-domain adversarial training with per-participant statistics.
TrainResult train_adann(std::span<const dataio::Window> train,
                        std::span<const dataio::Window> validation, const TrainConfig& config);

/// The gradient of one ADANN pair, exposed for verification: accumulates the
/// source and target contributions into grad and returns the total loss.
/// Running statistics are updated on the source pass only.
double adann_pair_gradient(convnet::ConvNet<float>& model, std::span<const dataio::Window> train,
                           const DomainBatchPair& pair, const TrainConfig& config, Rng& rng,
                           std::span<float> grad);

struct Evaluation {
  double accuracy = 0.0;
  double loss = 0.0;
  std::vector<int> predictions;
};

Evaluation evaluate(const convnet::ConvNet<float>& model, std::span<const dataio::Window> windows,
                    int domain, int chunk = 64);

/// Per-participant evaluation with each participant's own statistics.
Evaluation evaluate_per_participant(const convnet::ConvNet<float>& model,
                                    std::span<const dataio::Window> windows, int chunk = 64);

/// Accuracy on a domain absent from training. With `adapt` the domain's
/// statistics are first estimated from its unlabeled windows.
Evaluation evaluate_unseen(convnet::ConvNet<float>& model, std::span<const dataio::Window> windows,
                           bool adapt, int chunk = 64);

enum class Trainer { Standard, Adann };

struct LodoFold {
  int held_out = 0;
  double accuracy = 0.0;
  int epochs = 0;
};

/// Leave-one-domain-out: for each participant, train on the others'
/// training cycles and test on the held-out participant's test cycles.
std::vector<LodoFold> leave_one_domain_out(std::span<const dataio::Window> windows, Trainer trainer,
                                           const TrainConfig& config);

/// One JSON object per line: {epoch, lr, train_loss, val_loss, val_acc, annealings}.
void write_history_jsonl(std::span<const EpochRecord> history, const std::filesystem::path& file);

}  // namespace myofeat::training
