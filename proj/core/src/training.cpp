#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "myofeat/error.hpp"
#include "myofeat/training.hpp"

namespace myofeat::training {

using convnet::ConvNet;
using convnet::Mat;
using dataio::Window;

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (!(anneal_factor > 1.0)) throw ConfigError("anneal_factor must exceed 1");
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (standard_steps_per_epoch < 0) throw ConfigError("standard_steps_per_epoch must be >= 0");
  arch.validate();
}

Split split_by_cycle(std::span<const Window> windows) {
  Split s;
  for (const auto& w : windows) {
    if (dataio::is_validation_cycle(w.cycle_id)) {
      s.validation.push_back(w);
    } else if (dataio::is_training_cycle(w.cycle_id)) {
      s.train.push_back(w);
    } else {
      s.test.push_back(w);
    }
  }
  return s;
}

std::vector<Window> select_participants(std::span<const Window> windows,
                                        std::span<const int> participants) {
  const std::set<int> keep(participants.begin(), participants.end());
  std::vector<Window> out;
  for (const auto& w : windows)
    if (keep.count(w.participant_id)) out.push_back(w);
  return out;
}

std::vector<int> participants_of(std::span<const Window> windows) {
  std::set<int> ids;
  for (const auto& w : windows) ids.insert(w.participant_id);
  return {ids.begin(), ids.end()};
}

namespace {

std::map<int, std::vector<std::size_t>> index_by_participant(std::span<const Window> windows) {
  std::map<int, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < windows.size(); ++i) out[windows[i].participant_id].push_back(i);
  return out;
}

std::vector<std::size_t> sample(Rng& rng, std::vector<std::size_t> pool, int count) {
  rng.shuffle(pool);
  pool.resize(std::min(pool.size(), static_cast<std::size_t>(count)));
  return pool;
}

std::vector<const Window*> gather(std::span<const Window> windows, std::span<const std::size_t> idx) {
  std::vector<const Window*> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(&windows[i]);
  return out;
}

std::vector<int> gesture_labels(std::span<const Window* const> windows) {
  std::vector<int> out;
  out.reserve(windows.size());
  for (const auto* w : windows) out.push_back(w->gesture_id);
  return out;
}

}  // namespace

std::vector<DomainBatchPair> make_domain_batches(std::span<const Window> train, int batch_size,
                                                 std::uint64_t epoch_seed) {
  const auto by_participant = index_by_participant(train);
  if (by_participant.size() < 2) throw ConfigError("ADANN needs at least 2 participants");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  std::vector<int> ids;
  for (const auto& [p, idx] : by_participant) ids.push_back(p);
  Rng rng(epoch_seed);
  std::vector<int> order = ids;
  rng.shuffle(order);
  std::vector<DomainBatchPair> pairs;
  for (int p : order) {
    std::vector<int> others;
    for (int q : ids)
      if (q != p) others.push_back(q);
    const int q = others[static_cast<std::size_t>(rng.below(others.size()))];
    DomainBatchPair pair;
    pair.source = {p, 0, sample(rng, by_participant.at(p), batch_size)};
    pair.target = {q, 1, sample(rng, by_participant.at(q), batch_size)};
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

// ---------------------------------------------------------------------------

LrScheduler::LrScheduler(double lr, double factor, int patience)
    : lr_(lr), factor_(factor), patience_(patience) {
  if (!(factor > 1.0)) throw ConfigError("anneal factor must exceed 1");
  if (patience < 1) throw ConfigError("patience must be at least 1");
}

LrScheduler::Action LrScheduler::observe(double validation_loss) {
  ++epoch_;
  if (best_epoch_ < 0 || validation_loss < best_) {
    best_ = validation_loss;
    best_epoch_ = epoch_;
    since_best_ = 0;
    failed_annealings_ = 0;
    return Action::Continue;
  }
  if (++since_best_ < patience_) return Action::Continue;
  lr_ /= factor_;
  ++annealings_;
  ++failed_annealings_;
  since_best_ = 0;
  return failed_annealings_ >= 2 ? Action::Stop : Action::Annealed;
}

// ---------------------------------------------------------------------------

Evaluation evaluate(const ConvNet<float>& model, std::span<const Window> windows, int domain, int chunk) {
  Evaluation ev;
  if (windows.empty()) return ev;
  double loss = 0.0;
  std::size_t correct = 0;
  convnet::for_each_chunk<float>(model, windows, domain, chunk,
                                 [&](std::size_t first, const convnet::Tape<float>& tape) {
                                   const auto n = static_cast<std::size_t>(tape.batch);
                                   std::vector<int> labels;
                                   for (std::size_t i = 0; i < n; ++i)
                                     labels.push_back(windows[first + i].gesture_id);
                                   Mat<float> d;
                                   loss += convnet::softmax_cross_entropy(tape.gesture_logits, labels, d) *
                                           static_cast<double>(n);
                                   const auto pred = convnet::argmax_columns(tape.gesture_logits);
                                   for (std::size_t i = 0; i < n; ++i) {
                                     correct += pred[i] == labels[i];
                                     ev.predictions.push_back(pred[i]);
                                   }
                                 });
  ev.loss = loss / static_cast<double>(windows.size());
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(windows.size());
  return ev;
}

Evaluation evaluate_per_participant(const ConvNet<float>& model, std::span<const Window> windows,
                                    int chunk) {
  // Mean over participants of their own loss and accuracy; predictions are
  // returned in input order.
  Evaluation out;
  out.predictions.assign(windows.size(), -1);
  const auto by_participant = index_by_participant(windows);
  if (by_participant.empty()) return out;
  for (const auto& [p, idx] : by_participant) {
    std::vector<Window> part;
    for (auto i : idx) part.push_back(windows[i]);
    const auto ev = evaluate(model, part, p, chunk);
    out.loss += ev.loss;
    out.accuracy += ev.accuracy;
    for (std::size_t k = 0; k < idx.size(); ++k) out.predictions[idx[k]] = ev.predictions[k];
  }
  out.loss /= static_cast<double>(by_participant.size());
  out.accuracy /= static_cast<double>(by_participant.size());
  return out;
}

Evaluation evaluate_unseen(ConvNet<float>& model, std::span<const Window> windows, bool adapt, int chunk) {
  if (windows.empty()) throw ConfigError("evaluate_unseen needs windows");
  if (!adapt) return evaluate(model, windows, convnet::kSharedDomain, chunk);
  constexpr int kUnseen = -2;
  model.estimate_stats(kUnseen, convnet::pack_windows<float>(windows), static_cast<int>(windows.size()),
                       chunk);
  auto ev = evaluate(model, windows, kUnseen, chunk);
  model.clear_stats(kUnseen);
  return ev;
}

// ---------------------------------------------------------------------------

namespace {

struct Snapshot {
  std::vector<float> params;
  std::map<int, convnet::BnStats<float>> stats;
};

Snapshot snapshot(const ConvNet<float>& model) {
  Snapshot s;
  s.params.assign(model.parameters().begin(), model.parameters().end());
  for (int d : model.stat_domains()) s.stats[d] = model.stats(d);
  return s;
}

void restore(ConvNet<float>& model, const Snapshot& s) {
  model.set_parameters(s.params);
  for (int d : model.stat_domains()) model.clear_stats(d);
  for (const auto& [d, st] : s.stats) model.set_stats(d, st);
}

// Shared epoch loop: plateau annealing, early stopping, best-weights restore.
template <class EpochFn, class ValidateFn>
void run_schedule(TrainResult& result, const TrainConfig& config, EpochFn&& epoch_fn,
                  ValidateFn&& validate_fn, const char* label) {
  LrScheduler scheduler(config.lr, config.anneal_factor, config.patience);
  convnet::Adam<float> adam(result.model.parameter_count(), config.adam);
  Snapshot best;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    const double lr = scheduler.lr();
    const double train_loss = epoch_fn(epoch, adam, lr);
    const auto val = validate_fn(result.model);
    if (!std::isfinite(val.loss)) throw NumericError(std::string(label) + ": validation loss diverged");
    const auto action = scheduler.observe(val.loss);
    if (scheduler.best_epoch() == epoch) best = snapshot(result.model);
    result.history.push_back({epoch, lr, train_loss, val.loss, val.accuracy, scheduler.annealings()});
    spdlog::debug("{} epoch {} lr {:.3g} train {:.4f} val {:.4f} acc {:.3f}", label, epoch, lr,
                  train_loss, val.loss, val.accuracy);
    if (action == LrScheduler::Action::Stop) break;
  }
  restore(result.model, best);
  result.best_epoch = scheduler.best_epoch();
}

}  // namespace

TrainResult train_standard(std::span<const Window> train, std::span<const Window> validation,
                           const TrainConfig& config) {
  config.validate();
  if (train.empty()) throw ConfigError("empty training split");
  if (validation.empty()) throw ConfigError("empty validation split");
  const int participants = static_cast<int>(participants_of(train).size());
  const int steps = config.standard_steps_per_epoch > 0 ? config.standard_steps_per_epoch : participants;
  const int batch_size = std::min<int>(config.batch_size, static_cast<int>(train.size()));
  Rng rng(config.seed ^ 0x57A2DULL);
  std::vector<std::size_t> stream;
  std::size_t cursor = 0;
  std::vector<float> grad;

  TrainResult result{ConvNet<float>(config.arch, config.seed), {}, 0, 0};
  auto& model = result.model;
  auto epoch = [&](int, convnet::Adam<float>& adam, double lr) {
    double total = 0.0;
    for (int s = 0; s < steps; ++s) {
      // Batches are consecutive slices of a reshuffled stream over all windows.
      std::vector<std::size_t> idx;
      while (static_cast<int>(idx.size()) < batch_size) {
        if (cursor == stream.size()) {
          stream.resize(train.size());
          for (std::size_t i = 0; i < stream.size(); ++i) stream[i] = i;
          rng.shuffle(stream);
          cursor = 0;
        }
        idx.push_back(stream[cursor++]);
      }
      const auto batch = gather(train, idx);
      const auto labels = gesture_labels(batch);
      convnet::ForwardOptions fo;
      fo.mode = convnet::Mode::Train;
      fo.domain = convnet::kSharedDomain;
      fo.rng = &rng;
      const auto tape = model.forward(convnet::pack_windows<float>(batch), static_cast<int>(batch.size()), fo);
      Mat<float> d;
      total += convnet::softmax_cross_entropy(tape.gesture_logits, labels, d);
      grad.assign(model.parameter_count(), 0.0f);
      model.backward(tape, d, nullptr, grad);
      adam.step(model.parameters(), grad, lr, model.groups());
      ++result.steps;
    }
    return total / steps;
  };
  auto validate = [&](const ConvNet<float>& m) {
    return evaluate(m, validation, convnet::kSharedDomain, config.eval_chunk);
  };
  run_schedule(result, config, epoch, validate, "standard");
  return result;
}

namespace {

double source_gradient(ConvNet<float>& model, std::span<const Window> train, const DomainBatch& batch,
                       const TrainConfig& config, Rng& rng, std::span<float> grad) {
  convnet::BackwardOptions bo;
  bo.reversal = config.reversal_constant;
  const auto src = gather(train, batch.windows);
  const auto labels = gesture_labels(src);
  convnet::ForwardOptions fo;
  fo.mode = convnet::Mode::Train;
  fo.domain = batch.participant;
  fo.domain_head = true;
  fo.rng = &rng;
  const auto tape = model.forward(convnet::pack_windows<float>(src), static_cast<int>(src.size()), fo);
  Mat<float> dy, dd;
  double loss = convnet::softmax_cross_entropy(tape.gesture_logits, labels, dy);
  const std::vector<int> domain(src.size(), batch.domain_label);
  loss += config.lambda * convnet::softmax_cross_entropy(tape.domain_logits, domain, dd);
  dd *= static_cast<float>(config.lambda);
  model.backward(tape, dy, &dd, grad, bo);
  return loss;
}

double target_gradient(ConvNet<float>& model, std::span<const Window> train, const DomainBatch& batch,
                       const TrainConfig& config, Rng& rng, std::span<float> grad) {
  convnet::BackwardOptions bo;
  bo.reversal = config.reversal_constant;
  const auto tgt = gather(train, batch.windows);
  convnet::ForwardOptions fo;
  fo.mode = convnet::Mode::Train;
  fo.domain = batch.participant;
  fo.domain_head = true;
  fo.update_stats = false;
  fo.rng = &rng;
  fo.bn = config.target_bn == convnet::BnSource::Stored && model.has_stats(batch.participant)
              ? convnet::BnSource::Stored
              : convnet::BnSource::Batch;
  const auto tape = model.forward(convnet::pack_windows<float>(tgt), static_cast<int>(tgt.size()), fo);
  Mat<float> dd;
  const std::vector<int> domain(tgt.size(), batch.domain_label);
  const double loss = config.lambda * convnet::softmax_cross_entropy(tape.domain_logits, domain, dd);
  dd *= static_cast<float>(config.lambda);
  const Mat<float> no_gesture = Mat<float>::Zero(model.arch().gestures, static_cast<Eigen::Index>(tgt.size()));
  model.backward(tape, no_gesture, &dd, grad, bo);
  return loss;
}

}  // namespace

double adann_pair_gradient(ConvNet<float>& model, std::span<const Window> train,
                           const DomainBatchPair& pair, const TrainConfig& config, Rng& rng,
                           std::span<float> grad) {
  if (pair.source.participant == pair.target.participant) {
    throw ConfigError("source and target participants must differ");
  }
  const double loss = source_gradient(model, train, pair.source, config, rng, grad);
  return loss + target_gradient(model, train, pair.target, config, rng, grad);
}

TrainResult train_adann(std::span<const Window> train, std::span<const Window> validation,
                        const TrainConfig& config) {
  config.validate();
  if (train.empty()) throw ConfigError("empty training split");
  if (validation.empty()) throw ConfigError("empty validation split");
  const auto train_ids = participants_of(train);
  if (train_ids.size() < 2) throw ConfigError("ADANN needs at least 2 participants");
  for (int p : participants_of(validation)) {
    if (!std::binary_search(train_ids.begin(), train_ids.end(), p)) {
      throw ConfigError("unknown participant " + std::to_string(p) + " in the validation split");
    }
  }
  Rng rng(config.seed ^ 0xADA77ULL);
  std::vector<float> grad;

  TrainResult result{ConvNet<float>(config.arch, config.seed), {}, 0, 0};
  auto& model = result.model;
  auto epoch = [&](int e, convnet::Adam<float>& adam, double lr) {
    const auto pairs = make_domain_batches(
        train, config.batch_size, config.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(e));
    double total = 0.0;
    for (const auto& pair : pairs) {
      grad.assign(model.parameter_count(), 0.0f);
      if (config.split_steps) {
        total += source_gradient(model, train, pair.source, config, rng, grad);
        adam.step(model.parameters(), grad, lr, model.groups());
        grad.assign(model.parameter_count(), 0.0f);
        total += target_gradient(model, train, pair.target, config, rng, grad);
        result.steps += 2;
      } else {
        total += adann_pair_gradient(model, train, pair, config, rng, grad);
        ++result.steps;
      }
      adam.step(model.parameters(), grad, lr, model.groups());
    }
    return total / static_cast<double>(pairs.size());
  };
  auto validate = [&](const ConvNet<float>& m) {
    return evaluate_per_participant(m, validation, config.eval_chunk);
  };
  run_schedule(result, config, epoch, validate, "adann");
  return result;
}

std::vector<LodoFold> leave_one_domain_out(std::span<const Window> windows, Trainer trainer,
                                           const TrainConfig& config) {
  const auto ids = participants_of(windows);
  if (ids.size() < 3) throw ConfigError("leave-one-domain-out needs at least 3 participants");
  std::vector<LodoFold> folds;
  for (int held : ids) {
    std::vector<int> keep;
    for (int p : ids)
      if (p != held) keep.push_back(p);
    const auto split = split_by_cycle(select_participants(windows, keep));
    const std::vector<int> held_v{held};
    const auto unseen = split_by_cycle(select_participants(windows, held_v)).test;
    TrainConfig c = config;
    c.seed = config.seed * 1000003ULL + static_cast<std::uint64_t>(held);
    auto result = trainer == Trainer::Adann ? train_adann(split.train, split.validation, c)
                                            : train_standard(split.train, split.validation, c);
    const auto ev = evaluate_unseen(result.model, unseen, trainer == Trainer::Adann, config.eval_chunk);
    folds.push_back({held, ev.accuracy, static_cast<int>(result.history.size())});
    spdlog::info("lodo {} held-out {}: accuracy {:.3f} after {} epochs",
                 trainer == Trainer::Adann ? "adann" : "standard", held, ev.accuracy,
                 result.history.size());
  }
  return folds;
}

void write_history_jsonl(std::span<const EpochRecord> history, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw LoadError(file.string() + ": cannot write");
  for (const auto& r : history) {
    nlohmann::json j = {{"epoch", r.epoch},       {"lr", r.lr},           {"train_loss", r.train_loss},
                        {"val_loss", r.val_loss}, {"val_acc", r.val_acc}, {"annealings", r.annealings}};
    out << j.dump() << '\n';
  }
}

}  // namespace myofeat::training
