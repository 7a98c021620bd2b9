#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "gradcheck.hpp"
#include "myofeat/dataio.hpp"
#include "myofeat/error.hpp"
#include "myofeat/training.hpp"
#include "oracles.hpp"

using namespace myofeat;
using namespace myofeat::training;
using Action = LrScheduler::Action;

namespace {

const std::vector<dataio::Window>& synth_windows() {
  static const auto windows = dataio::preprocess_all(dataio::synth_generate(3, 4, 5));
  return windows;
}

TrainConfig small_config() {
  TrainConfig c;
  c.arch.maps = 2;
  c.batch_size = 16;
  c.lr = 0.005;
  c.max_epochs = 2;
  c.patience = 2;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("scheduler anneals after the patience window and stops on the second failure") {
  LrScheduler s(1.0, 5.0, 15);
  std::vector<Action> trace;
  trace.push_back(s.observe(1.0));
  for (int e = 1; e <= 40 && (trace.empty() || trace.back() != Action::Stop); ++e) trace.push_back(s.observe(2.0));
  REQUIRE(trace.size() == 31);
  for (std::size_t e = 0; e < trace.size(); ++e) {
    const Action expected = e == 15 ? Action::Annealed : e == 30 ? Action::Stop : Action::Continue;
    CHECK(trace[e] == expected);
  }
  CHECK(s.lr() == doctest::Approx(1.0 / 25.0));
  CHECK(s.best_epoch() == 0);
}

TEST_CASE("a new best after annealing resets the stop counter") {
  LrScheduler s(1.0, 2.0, 2);
  CHECK(s.observe(5.0) == Action::Continue);
  CHECK(s.observe(6.0) == Action::Continue);
  CHECK(s.observe(6.0) == Action::Annealed);
  CHECK(s.observe(4.0) == Action::Continue);
  CHECK(s.observe(6.0) == Action::Continue);
  CHECK(s.observe(6.0) == Action::Annealed);
  CHECK(s.observe(6.0) == Action::Continue);
  CHECK(s.observe(6.0) == Action::Stop);
  CHECK(s.annealings() == 3);
  CHECK(s.best() == 4.0);
  CHECK_THROWS_AS(LrScheduler(1.0, 1.0, 2), ConfigError);
}

TEST_CASE("cycle split") {
  const auto split = split_by_cycle(synth_windows());
  for (const auto& w : split.train) CHECK(w.cycle_id <= 3);
  for (const auto& w : split.validation) CHECK(w.cycle_id == 4);
  for (const auto& w : split.test) CHECK(w.cycle_id >= 5);
  CHECK(split.train.size() + split.validation.size() + split.test.size() == synth_windows().size());
  CHECK(participants_of(split.train) == std::vector<int>{1, 2, 3});
}

TEST_CASE("domain batches pair each source with another participant") {
  const auto train = split_by_cycle(synth_windows()).train;
  const auto pairs = make_domain_batches(train, 8, 99);
  REQUIRE(pairs.size() == 3);
  std::set<int> sources;
  for (const auto& p : pairs) {
    sources.insert(p.source.participant);
    CHECK(p.source.participant != p.target.participant);
    CHECK(p.source.domain_label == 0);
    CHECK(p.target.domain_label == 1);
    for (const auto* b : {&p.source, &p.target}) {
      CHECK(b->windows.size() == 8);
      CHECK(std::set<std::size_t>(b->windows.begin(), b->windows.end()).size() == b->windows.size());
      for (auto i : b->windows) CHECK(train[i].participant_id == b->participant);
    }
  }
  CHECK(sources == std::set<int>{1, 2, 3});
  const auto again = make_domain_batches(train, 8, 99);
  CHECK(again[1].target.windows == pairs[1].target.windows);
  const auto big = make_domain_batches(train, 100000, 1);
  CHECK(big[0].source.windows.size() == select_participants(train, std::vector<int>{big[0].source.participant}).size());
  CHECK_THROWS_AS(make_domain_batches(select_participants(train, std::vector<int>{1}), 8, 1), ConfigError);
}

TEST_CASE("adversarial pair gradient matches finite differences of the two-pass loss") {
  const auto train = split_by_cycle(synth_windows()).train;
  auto config = small_config();
  config.arch.dropout = 0.0;
  // A shallow net keeps single-precision rounding well below the tolerance.
  config.arch.blocks = 2;
  config.lambda = 0.3;
  DomainBatchPair pair;
  pair.source.participant = 1;
  pair.target = {2, 1, {}};
  for (std::size_t i = 0; i < train.size(); ++i) {
    auto& b = train[i].participant_id == 1 ? pair.source : pair.target;
    if (train[i].participant_id <= 2 && b.windows.size() < 4) b.windows.push_back(i);
  }
  convnet::ConvNet<float> model(config.arch, 8);
  Rng rng(1);
  std::vector<float> grad(model.parameter_count(), 0.0f);
  const double loss = adann_pair_gradient(model, train, pair, config, rng, grad);
  CHECK(std::isfinite(loss));
  CHECK(model.has_stats(1));
  CHECK_FALSE(model.has_stats(2));

  auto net = convnet::convnet_cast<double>(model);
  const auto make = [&](const DomainBatch& b, bool gesture) {
    std::vector<dataio::Window> ws;
    for (auto i : b.windows) ws.push_back(train[i]);
    oracle::BatchLoss l;
    l.input = convnet::pack_windows<double>(ws);
    l.batch = static_cast<int>(ws.size());
    for (const auto& w : ws) l.gestures.push_back(w.gesture_id);
    l.domains.assign(ws.size(), b.domain_label);
    l.domain_weight = config.lambda;
    return std::pair{l, gesture};
  };
  const auto [src, unused1] = make(pair.source, true);
  const auto [tgt, unused2] = make(pair.target, false);
  const std::size_t trunk_end = net.group("gesture.weight").offset;
  const std::size_t domain_begin = net.group("domain.weight").offset;
  int checked = 0, failed = 0;
  for (std::size_t i = 0; i < net.parameter_count(); i += 5) {
    const double fy = oracle::parameter_fd(net, i, [&] { return src.value(net, true, false); });
    const double fd = oracle::parameter_fd(net, i, [&] {
      return src.value(net, false, true) + tgt.value(net, false, true);
    });
    const double expected = i < trunk_end ? fy + config.reversal_constant * fd : i >= domain_begin ? fd : fy;
    ++checked;
    if (!oracle::gradients_agree(grad[i], expected, 2e-3, 2e-5)) ++failed;
  }
  CHECK(checked > 100);
  CHECK(failed == 0);
}

TEST_CASE("stored target statistics are used when configured") {
  const auto train = split_by_cycle(synth_windows()).train;
  auto config = small_config();
  config.target_bn = convnet::BnSource::Stored;
  const auto pairs = make_domain_batches(train, 8, 4);
  convnet::ConvNet<float> model(config.arch, 8);
  const auto x = convnet::pack_windows<float>(select_participants(train, std::vector<int>{pairs[0].target.participant}));
  model.estimate_stats(pairs[0].target.participant, x, static_cast<int>(x.cols() / (10 * 151)));
  const auto before = model.stats(pairs[0].target.participant);
  Rng rng(2);
  std::vector<float> grad(model.parameter_count(), 0.0f);
  adann_pair_gradient(model, train, pairs[0], config, rng, grad);
  const auto& after = model.stats(pairs[0].target.participant);
  for (std::size_t b = 0; b < before.mean.size(); ++b) {
    CHECK((after.mean[b] - before.mean[b]).cwiseAbs().maxCoeff() == 0.0f);
    CHECK((after.var[b] - before.var[b]).cwiseAbs().maxCoeff() == 0.0f);
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto split = split_by_cycle(synth_windows());
  const auto config = small_config();
  const auto a = train_standard(split.train, split.validation, config);
  const auto b = train_standard(split.train, split.validation, config);
  CHECK(std::equal(a.model.parameters().begin(), a.model.parameters().end(), b.model.parameters().begin()));
  CHECK(a.history.size() == 2);
  CHECK(a.steps > 0);
  const auto c = train_adann(split.train, split.validation, config);
  const auto d = train_adann(split.train, split.validation, config);
  CHECK(std::equal(c.model.parameters().begin(), c.model.parameters().end(), d.model.parameters().begin()));
  for (int p : {1, 2, 3}) CHECK(c.model.has_stats(p));
  const auto ev = evaluate_per_participant(c.model, split.test);
  CHECK(ev.predictions.size() == split.test.size());
  CHECK(ev.accuracy >= 0.0);
  CHECK(ev.accuracy <= 1.0);
}

TEST_CASE("unseen-domain evaluation estimates statistics only when adapting") {
  const auto split = split_by_cycle(synth_windows());
  auto config = small_config();
  config.max_epochs = 1;
  const auto two = select_participants(split.train, std::vector<int>{1, 2});
  const auto val = select_participants(split.validation, std::vector<int>{1, 2});
  auto model = train_adann(two, val, config).model;
  const auto held = select_participants(split.test, std::vector<int>{3});
  CHECK_FALSE(model.has_stats(3));
  const auto adapted = evaluate_unseen(model, held, true);
  CHECK_FALSE(model.has_stats(3));
  // Same result as estimating the held-out statistics by hand.
  auto copy = model;
  const auto x = convnet::pack_windows<float>(held);
  copy.estimate_stats(3, x, static_cast<int>(held.size()));
  const auto manual = evaluate(copy, held, 3);
  CHECK(adapted.predictions == manual.predictions);
  CHECK(adapted.loss == doctest::Approx(manual.loss).epsilon(1e-5));
  // Per-participant statistics leave nothing to fall back on without adapting.
  CHECK_THROWS(evaluate_unseen(model, held, false));
  CHECK_THROWS_AS(leave_one_domain_out(two, Trainer::Standard, config), ConfigError);
}

TEST_CASE("history is written as JSON lines") {
  const std::vector<EpochRecord> history = {{0, 0.1, 2.0, 1.5, 0.4, 0}, {1, 0.02, 1.0, 1.2, 0.5, 1}};
  const auto file = std::filesystem::temp_directory_path() / "myofeat_history.jsonl";
  write_history_jsonl(history, file);
  std::ifstream in(file);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("epoch") == n);
    CHECK(j.contains("val_acc"));
    ++n;
  }
  CHECK(n == 2);
  std::filesystem::remove(file);
}

TEST_CASE("config validation") {
  auto c = small_config();
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.lr = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
