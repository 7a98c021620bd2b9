// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <spdlog/spdlog.h>

#include "gradcheck.hpp"
#include "myofeat/convnet.hpp"
#include "myofeat/dataio.hpp"
#include "myofeat/evaluate.hpp"
#include "myofeat/features.hpp"
#include "myofeat/interpret.hpp"
#include "myofeat/mapper.hpp"
#include "myofeat/training.hpp"
#include "oracles.hpp"

using namespace myofeat;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

// Training settings sized for a single desk core: narrower maps and fewer
// epochs than the full configuration, same optimiser and schedule rules.
training::TrainConfig desk_config(std::uint64_t seed) {
  training::TrainConfig c;
  c.arch.maps = 16;
  c.batch_size = 32;
  c.lr = 0.002;
  c.max_epochs = 30;
  c.patience = 8;
  c.seed = seed;
  return c;
}

// 1 -------------------------------------------------------------------------

Outcome architecture() {
  const convnet::Architecture arch;
  const convnet::ConvNet<float> net(arch, 1);
  std::vector<int> lengths;
  for (int b = 1; b <= arch.blocks; ++b) lengths.push_back(arch.block_length(b));
  Rng rng(1);
  const auto windows = oracle::noise_windows(1, arch.gestures, rng);
  convnet::ConvNet<float> probe(arch, 1);
  const auto x = convnet::pack_windows<float>(windows);
  probe.estimate_stats(convnet::kSharedDomain, x, 1);
  convnet::ForwardOptions f;
  const auto tape = probe.forward(x, 1, f);
  const auto& last = tape.act.back();
  const bool final_map = last.rows() == arch.maps && last.cols() == arch.channels * 1;
  const bool pass = net.parameter_count() == 543629 && arch.parameter_count(true) == 543629 &&
                    lengths == std::vector<int>{126, 101, 76, 51, 26, 1} && final_map;
  std::string ls;
  for (int l : lengths) ls += (ls.empty() ? "" : "/") + std::to_string(l);
  return {pass, "parameters " + std::to_string(net.parameter_count()) + ", block lengths " + ls + ", final map " +
                    std::to_string(last.cols()) + " columns per map"};
}

// 2 -------------------------------------------------------------------------

Outcome registry() {
  const auto methods = features::method_registry();
  const auto descriptors = features::feature_registry();
  std::vector<int> counts(5, 0);
  for (const auto& m : methods) ++counts[static_cast<std::size_t>(m.group)];
  convnet::ConvNet<float> net(convnet::Architecture{}, 2);
  Rng rng(2);
  const auto windows = oracle::noise_windows(2, net.arch().gestures, rng);
  net.estimate_stats(convnet::kSharedDomain, convnet::pack_windows<float>(windows), 2);
  const auto cloud = convnet::extract_learned_features(net, windows, convnet::kSharedDomain);
  const bool pass = methods.size() == 56 && descriptors.size() == 79 &&
                    counts == std::vector<int>{25, 5, 6, 7, 13} && cloud.values.rows() == 384;
  return {pass, std::to_string(descriptors.size()) + " descriptors from " + std::to_string(methods.size()) +
                    " methods, groups " + std::to_string(counts[0]) + "/" + std::to_string(counts[1]) + "/" +
                    std::to_string(counts[2]) + "/" + std::to_string(counts[3]) + "/" +
                    std::to_string(counts[4]) + ", learned cloud rows " + std::to_string(cloud.values.rows())};
}

// 3 -------------------------------------------------------------------------

oracle::BatchLoss random_loss(const convnet::Architecture& arch, int batch, Rng& rng, double weight) {
  oracle::BatchLoss loss;
  loss.input = oracle::random_input<double>(arch, batch, rng);
  loss.batch = batch;
  for (int n = 0; n < batch; ++n) {
    loss.gestures.push_back(n % arch.gestures);
    loss.domains.push_back(n % 2);
  }
  loss.domain_weight = weight;
  return loss;
}

// Adversarial objective: gradient reversal makes the trunk descend
// L_y - lambda L_d while the domain head descends lambda L_d.
void check_adversarial(convnet::ConvNet<double>& net, const oracle::BatchLoss& loss, std::size_t stride,
                       oracle::GradCheckReport& report, std::set<std::string>& groups) {
  const auto g = loss.gradient(net, -1.0);
  const std::size_t trunk_end = net.group("gesture.weight").offset;
  for (std::size_t i = 0; i < net.parameter_count(); i += stride) {
    const double fy = oracle::parameter_fd(net, i, [&] { return loss.value(net, true, false); });
    const double fd = oracle::parameter_fd(net, i, [&] { return loss.value(net, false, true); });
    oracle::record(report, g[i], i < trunk_end ? fy - fd : fy + fd);
    for (const auto& grp : net.groups())
      if (i >= grp.offset && i < grp.offset + grp.size) groups.insert(grp.name);
  }
}

Outcome gradients() {
  Rng rng(3);
  oracle::GradCheckReport net_report;
  std::set<std::string> touched;

  // Every parameter of a small network with all layer types in train mode.
  auto arch = oracle::tiny_arch();
  convnet::ConvNet<double> tiny(arch, 31);
  check_adversarial(tiny, random_loss(arch, 4, rng, 0.1), 1, net_report, touched);
  const bool all_groups = touched.size() == tiny.groups().size();

  // Eval mode with stored statistics.
  auto eval_loss = random_loss(arch, 3, rng, 0.1);
  eval_loss.mode = convnet::Mode::Eval;
  tiny.estimate_stats(convnet::kSharedDomain, eval_loss.input, eval_loss.batch);
  const auto ge = eval_loss.gradient(tiny, 1.0);
  for (std::size_t i = 0; i < tiny.parameter_count(); ++i)
    oracle::record(net_report, ge[i], oracle::parameter_fd(tiny, i, [&] { return eval_loss.value(tiny); }));

  // Input gradient through every convolution.
  {
    auto loss = random_loss(arch, 2, rng, 0.1);
    loss.domains.clear();
    const auto tape = loss.run(tiny);
    convnet::Mat<double> dg;
    convnet::softmax_cross_entropy<double>(tape.gesture_logits, loss.gestures, dg);
    std::vector<double> grad(tiny.parameter_count(), 0.0);
    convnet::BackwardOptions b;
    b.input_gradient = true;
    convnet::BackwardExtras<double> extras;
    tiny.backward(tape, dg, nullptr, grad, b, &extras);
    for (Eigen::Index i = 0; i < loss.input.size(); ++i) {
      const double f = oracle::central_difference([&] { return loss.value(tiny); }, loss.input(0, i), 1e-5);
      oracle::record(net_report, extras.input_gradient(0, i), f);
    }
  }

  // The full-size network on two windows, every 4001st parameter plus the
  // first entry of every group.
  oracle::GradCheckReport full_report;
  {
    convnet::Architecture full;
    convnet::ConvNet<double> net(full, 32);
    auto loss = random_loss(full, 2, rng, 0.1);
    const auto g = loss.gradient(net, -1.0);
    const std::size_t trunk_end = net.group("gesture.weight").offset;
    std::set<std::size_t> picks;
    for (std::size_t i = 0; i < net.parameter_count(); i += 4001) picks.insert(i);
    for (const auto& grp : net.groups()) picks.insert(grp.offset);
    for (auto i : picks) {
      // With millions of rectifier units a step of 1e-5 often straddles a
      // kink somewhere; 1e-7 keeps the difference on one linear piece.
      const double hh = 1e-7;
      const double fy = oracle::parameter_fd(net, i, [&] { return loss.value(net, true, false); }, hh);
      const double fd = oracle::parameter_fd(net, i, [&] { return loss.value(net, false, true); }, hh);
      oracle::record(full_report, g[i], i < trunk_end ? fy - fd : fy + fd);
    }
  }

  // t-SNE objective.
  oracle::GradCheckReport tsne_report;
  {
    Eigen::MatrixXd x(12, 4), y(12, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = rng.normal();
    const auto p = mapper::tsne_affinities(x, 3.0);
    const auto g = mapper::tsne_kl_gradient(p, y);
    for (Eigen::Index i = 0; i < y.rows(); ++i)
      for (Eigen::Index d = 0; d < y.cols(); ++d)
        oracle::record(tsne_report, g(i, d),
                       oracle::central_difference([&] { return mapper::tsne_kl(p, y); }, y(i, d), 1e-6));
  }

  const bool pass = all_groups && net_report.failed == 0 && full_report.failed == 0 && tsne_report.failed == 0;
  return {pass, "small net " + std::to_string(net_report.failed) + "/" + std::to_string(net_report.checked) + " fail, worst at " + fmt(net_report.worst, 2) +
                    " over " + std::to_string(touched.size()) + " groups; full net " +
                    std::to_string(full_report.failed) + "/" + std::to_string(full_report.checked) + " fail, worst at " + fmt(full_report.worst, 2) +
                    "; t-SNE " + std::to_string(tsne_report.failed) + "/" + std::to_string(tsne_report.checked) + " fail, worst at " +
                    fmt(tsne_report.worst, 2) + " (fractions of the 1e-4 relative tolerance)"};
}

// 4 -------------------------------------------------------------------------

double mean_accuracy(const std::vector<training::LodoFold>& folds) {
  double s = 0.0;
  for (const auto& f : folds) s += f.accuracy;
  return s / static_cast<double>(folds.size());
}

Outcome adann_benefit() {
  double gain = 0.0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    dataio::SynthConfig sc;
    sc.seed = seed;
    const auto windows = dataio::preprocess_all(dataio::synth_generate(sc));
    const auto cfg = desk_config(seed);
    const double standard = mean_accuracy(training::leave_one_domain_out(windows, training::Trainer::Standard, cfg));
    const double adann = mean_accuracy(training::leave_one_domain_out(windows, training::Trainer::Adann, cfg));
    gain += adann - standard;
    detail += "seed " + std::to_string(seed) + " standard " + fmt(standard, 3) + " adann " + fmt(adann, 3) + "; ";
  }
  gain = 100.0 * gain / 3.0;
  return {gain >= 5.0, detail + "mean gain " + fmt(gain, 3) + " points (maps 16)"};
}

// 5 -------------------------------------------------------------------------

std::vector<std::string> two_labels(int n, int split) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(i < split ? "a" : "b");
  return out;
}

Outcome mapper_shapes() {
  Rng rng(5);
  Eigen::MatrixXd circle(200, 2);
  for (int i = 0; i < 200; ++i) {
    const double a = 2.0 * std::numbers::pi * i / 200.0;
    circle(i, 0) = std::cos(a) + rng.normal(0.0, 0.05);
    circle(i, 1) = std::sin(a) + rng.normal(0.0, 0.05);
  }
  const mapper::MapperConfig config;
  mapper::Cover cover;
  const auto ring = mapper::mapper_graph(circle, circle, two_labels(200, 100), config, &cover);

  Eigen::MatrixXd blobs(100, 3);
  for (int i = 0; i < 100; ++i)
    for (int d = 0; d < 3; ++d) blobs(i, d) = rng.normal(i < 50 ? -10.0 : 10.0, 1.0);
  const Eigen::MatrixXd blob_lens = blobs.leftCols(2);
  const auto apart = mapper::mapper_graph(blobs, blob_lens, two_labels(100, 50), config);

  const bool pass = ring.cycle_rank() >= 1 && apart.components() >= 2 && cover.regions.size() == 25;
  return {pass, "circle cycle rank " + std::to_string(ring.cycle_rank()) + ", blob components " +
                    std::to_string(apart.components()) + ", cover regions " + std::to_string(cover.regions.size())};
}

// 6 -------------------------------------------------------------------------

double measured_db(double hz) {
  const dataio::FilterSpec spec;
  std::vector<double> x(8000);
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / spec.sample_rate);
  const auto y = dataio::bandpass_filter(x, spec);
  double ss = 0.0, xx = 0.0;
  for (std::size_t i = 4000; i < y.size(); ++i) {
    ss += y[i] * y[i];
    xx += x[i] * x[i];
  }
  return 10.0 * std::log10(ss / xx);
}

Outcome signal_path() {
  const double g100 = measured_db(100.0), g20 = measured_db(20.0), g495 = measured_db(495.0), g5 = measured_db(5.0);
  bool segments = true;
  for (int s = 0; s <= 6000; ++s) {
    const int expected = s < 151 ? 0 : (s - 151) / 51 + 1;
    if (dataio::window_count(s) != expected) segments = false;
  }
  for (int s : {150, 151, 202, 1000, 5000}) {
    if (dataio::segment(Eigen::MatrixXd::Zero(10, s)).size() != static_cast<std::size_t>((s < 151 ? 0 : (s - 151) / 51 + 1)))
      segments = false;
  }
  const bool pass = std::abs(g100) <= 0.5 && std::abs(g20 + 3.0) <= 1.0 && std::abs(g495 + 3.0) <= 1.0 &&
                    g5 <= -20.0 && segments;
  return {pass, "gain " + fmt(g100, 3) + " dB at 100 Hz, " + fmt(g20, 3) + " dB at 20 Hz, " + fmt(g495, 3) +
                    " dB at 495 Hz, " + fmt(g5, 3) + " dB at 5 Hz; segment formula " +
                    (segments ? "exact" : "wrong")};
}

// 7 -------------------------------------------------------------------------

// Average ranks of the magnitudes, computed by counting.
std::vector<double> ranks_of(const std::vector<double>& magnitude) {
  std::vector<double> r;
  for (double m : magnitude) {
    double less = 0.0, equal = 0.0;
    for (double v : magnitude) {
      less += v < m;
      equal += v == m;
    }
    r.push_back(less + (equal + 1.0) / 2.0);
  }
  return r;
}

Outcome statistics() {
  int patterns = 0, wilcoxon_bad = 0;
  for (int n = 5; n <= 10; ++n) {
    // Distinct magnitudes and a tied layout.
    std::vector<double> distinct, tied;
    for (int i = 1; i <= n; ++i) {
      distinct.push_back(i);
      tied.push_back((i + 1) / 2);
    }
    for (const auto* mags : {&distinct, &tied}) {
      const auto ranks = ranks_of(*mags);
      for (long mask = 0; mask < (1L << n); ++mask) {
        std::vector<double> d;
        double w = 0.0;
        for (int i = 0; i < n; ++i) {
          const bool up = mask & (1L << i);
          d.push_back(up ? (*mags)[static_cast<std::size_t>(i)] : -(*mags)[static_cast<std::size_t>(i)]);
          if (up) w += ranks[static_cast<std::size_t>(i)];
        }
        const auto r = evaluate::wilcoxon_signed_rank(d);
        ++patterns;
        if (!r.exact || std::abs(r.p_value - oracle::wilcoxon_brute_force(ranks, w)) > 1e-12 || r.w_plus != w)
          ++wilcoxon_bad;
      }
    }
  }

  const std::vector<double> a = {0.5, 1.0, 1.5}, b = {-0.5, 0.0, 0.5};
  const std::vector<double> c = {2, 4, 6}, e = {1, 3, 5};
  const auto huge = evaluate::cohens_d(a, b);
  const auto medium = evaluate::cohens_d(c, e);
  const auto zero = evaluate::cohens_d(c, c);
  const bool cohen = std::abs(huge.d - 2.0) < 1e-12 && huge.label == "huge" && std::abs(medium.d - 0.5) < 1e-12 &&
                     medium.label == "medium" && zero.d == 0.0;

  // Two Gaussian classes with a shared correlated covariance; the Bayes rule
  // with the true parameters is linear in x.
  Rng rng(7);
  Eigen::Matrix3d chol;
  chol << 1.0, 0.0, 0.0, 0.6, 0.8, 0.0, -0.3, 0.4, 0.7;
  const Eigen::Vector3d mu0(0.0, 0.0, 0.0), mu1(1.2, -0.5, 0.8);
  const auto draw = [&](int per_class, Eigen::MatrixXd& x, std::vector<int>& y) {
    x.resize(2 * per_class, 3);
    y.clear();
    for (int i = 0; i < 2 * per_class; ++i) {
      const int k = i < per_class ? 0 : 1;
      Eigen::Vector3d z(rng.normal(), rng.normal(), rng.normal());
      x.row(i) = ((k == 0 ? mu0 : mu1) + chol * z).transpose();
      y.push_back(k);
    }
  };
  Eigen::MatrixXd xtr, xte;
  std::vector<int> ytr, yte;
  draw(1000, xtr, ytr);
  draw(5000, xte, yte);
  const Eigen::Matrix3d sigma = chol * chol.transpose();
  const Eigen::Vector3d w = sigma.ldlt().solve(mu1 - mu0);
  const double bias = -0.5 * w.dot(mu0 + mu1);
  std::vector<int> bayes;
  for (Eigen::Index i = 0; i < xte.rows(); ++i) bayes.push_back(xte.row(i).dot(w) + bias > 0.0 ? 1 : 0);
  const auto pred = evaluate::lda_predict(evaluate::lda_fit(xtr, ytr), xte);
  const double agreement = evaluate::accuracy(bayes, pred);

  const bool pass = wilcoxon_bad == 0 && cohen && agreement >= 0.98;
  return {pass, "Wilcoxon " + std::to_string(patterns - wilcoxon_bad) + "/" + std::to_string(patterns) +
                    " sign patterns exact, Cohen's d cases " + (cohen ? "exact" : "wrong") +
                    ", LDA agrees with Bayes on " + fmt(100.0 * agreement, 4) + "%"};
}

// 8 -------------------------------------------------------------------------

Outcome interpretation() {
  dataio::SynthConfig sc;
  sc.seed = 1;
  const auto split = training::split_by_cycle(dataio::preprocess_all(dataio::synth_generate(sc)));
  const auto result = training::train_adann(split.train, split.validation, desk_config(1));
  const auto cmp = interpret::compare_with_noise(result.model, split.test, 4, 1);
  const double ratio = cmp.mean_max_noise > 0.0 ? cmp.mean_max_signal / cmp.mean_max_noise : INFINITY;
  return {ratio >= 2.0, "mean max relevance " + fmt(cmp.mean_max_signal) + " on signal, " +
                            fmt(cmp.mean_max_noise) + " on noise (sd " + fmt(cmp.noise_sd) + "), ratio " +
                            fmt(ratio, 3) + " over " + std::to_string(cmp.windows.size()) + " windows"};
}

// 9 -------------------------------------------------------------------------

#ifdef MYOFEAT_CLI
int cli(const fs::path& work, const std::string& args) {
  const std::string cmd = std::string(MYOFEAT_CLI) + " " + args + " > " + (work / "cli.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const auto work = fs::temp_directory_path() / "myofeat_acceptance_cli";
  fs::remove_all(work);
  fs::create_directories(work);
  const auto w = [&](const std::string& name) { return (work / name).string(); };
  {
    std::ofstream cfg(work / "run.json");
    cfg << R"({"synth": {"samples_per_recording": 400},
              "train": {"max_epochs": 3, "arch": {"maps": 4}},
              "probe": {"restarts": 2, "epochs": 5},
              "gradcam": {"per_gesture": 1}})";
    std::ofstream pairs(work / "pairs.csv");
    pairs << "a,b\n0.91,0.80\n0.85,0.70\n0.95,0.90\n0.80,0.60\n0.90,0.75\n0.70,0.72\n0.88,0.81\n";
  }
  const std::string cfg = " --seed 11 --config " + w("run.json");
  if (cli(work, "synth --domains 3 --classes 3" + cfg + " --out " + w("data")) != 0)
    return {false, "synth command failed"};
  if (cli(work, "train --data " + w("data") + " --mode adann" + cfg + " --out " + w("model")) != 0)
    return {false, "model training failed"};
  if (cli(work, "features --data " + w("data") + " --split train" + cfg + " --out " + w("cloud")) != 0)
    return {false, "feature extraction failed"};
  const std::string model = w("model") + "/model.bin";
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"synth", "synth --domains 3 --classes 3"},
      {"preprocess", "preprocess --data " + w("data")},
      {"features", "features --data " + w("data") + " --split train"},
      {"train", "train --data " + w("data") + " --mode adann"},
      {"train-standard", "train --data " + w("data") + " --mode standard"},
      {"learned-features", "learned-features --data " + w("data") + " --model " + model + " --split train"},
      {"mapper", "mapper --scenario a --features " + w("cloud") + "/features.csv"},
      {"gradcam", "gradcam --data " + w("data") + " --model " + model},
      {"probe", "probe --data " + w("data") + " --model " + model + " --method MAV --block 2"},
      {"lda", "lda --data " + w("data") + " --model " + model},
      {"stats", "stats --pairs " + w("pairs.csv")},
  };
  std::vector<std::string> differing;
  for (const auto& [name, args] : commands) {
    for (const char* tag : {"_1", "_2"}) {
      if (cli(work, args + cfg + " --out " + w(name + tag)) != 0) return {false, name + " command failed"};
    }
    const auto a = slurp(w(name + "_1") + "/manifest.json");
    const auto b = slurp(w(name + "_2") + "/manifest.json");
    if (a.empty() || a != b) differing.push_back(name);
  }
  std::size_t hashed = 0;
  for (const auto& [name, args] : commands) {
    const auto doc = slurp(w(name + "_1") + "/manifest.json");
    for (std::size_t pos = doc.find("sha256"); pos != std::string::npos; pos = doc.find("sha256", pos + 1)) ++hashed;
  }
  std::string detail = std::to_string(commands.size()) + " commands run twice, " + std::to_string(hashed) +
                       " hashed artifacts";
  if (!differing.empty()) {
    detail += "; manifests differ for";
    for (const auto& d : differing) detail += " " + d;
  } else {
    detail += ", all manifests byte-identical";
  }
  fs::remove_all(work);
  return {differing.empty() && hashed > commands.size(), detail};
}
#else
Outcome determinism() { return {false, "command-line tool not built"}; }
#endif

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"architecture fidelity", architecture}, {"feature registry fidelity", registry},
      {"gradient correctness", gradients},     {"adversarial training benefit", adann_benefit},
      {"mapper shape recovery", mapper_shapes}, {"signal path", signal_path},
      {"statistics oracles", statistics},       {"interpretation discrimination", interpretation},
      {"determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %d %s: %s (%.1f s)\n", out.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                out.detail.c_str(), secs);
    std::fflush(stdout);
    failed += out.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
