#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "myofeat/artifacts.hpp"
#include "myofeat/convnet.hpp"
#include "myofeat/evaluate.hpp"
#include "myofeat/parallel.hpp"
#include "myofeat/rng.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace myofeat::cli {
namespace {

const std::set<std::string> kSections = {"seed",  "filter", "preprocess_order", "synth",  "features", "train",
                                         "mapper", "probe",  "gradcam",          "lda",    "stats"};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 0;
};

// Per-run state handed to each command.
struct Run {
  std::string command;
  json doc;            // the --config document
  std::uint64_t seed;  // --seed, else doc["seed"], else 1
  fs::path dir;
  json resolved = json::object();  // echoed as config.json
};

void write_json(const fs::path& file, const json& doc) {
  std::ofstream out(file);
  if (!out) throw LoadError(file.string() + ": cannot write");
  out << doc.dump(2) << '\n';
}

// --- Inputs --------------------------------------------------------------------

dataio::FilterSpec filter_spec(Run& run) {
  auto spec = parse_section(run.doc, "filter", dataio::FilterSpec{});
  spec.validate();
  run.resolved["filter"] = spec;
  return spec;
}

// Windows from a preprocess output, a window file, a synth output or a
// directory of recording CSVs.
std::vector<dataio::Window> load_windows(Run& run, const fs::path& data) {
  fs::path bin = data;
  if (fs::is_directory(data)) bin = data / "windows.bin";
  if (fs::is_regular_file(bin)) {
    run.resolved["data"] = {{"windows", bin.string()}};
    auto index = bin;
    index.replace_extension(".json");
    return dataio::read_windows(bin, index);
  }
  const fs::path rec = fs::is_directory(data / "recordings") ? data / "recordings" : data;
  const auto spec = filter_spec(run);
  const auto order = run.doc.value("preprocess_order", dataio::PreprocessOrder::FilterThenSegment);
  run.resolved["preprocess_order"] = order;
  run.resolved["data"] = {{"recordings", rec.string()}};
  const auto recordings = dataio::load_recordings(rec);
  if (recordings.empty()) throw LoadError(rec.string() + ": no recordings found");
  return dataio::preprocess_all(recordings, spec, order);
}

std::vector<dataio::Window> select_split(std::span<const dataio::Window> windows, const std::string& split) {
  if (split == "all") return {windows.begin(), windows.end()};
  std::vector<dataio::Window> out;
  for (const auto& w : windows) {
    const bool keep = split == "train" ? dataio::is_training_cycle(w.cycle_id) : dataio::is_test_cycle(w.cycle_id);
    if (keep) out.push_back(w);
  }
  if (out.empty()) throw ConfigError("split '" + split + "' selects no windows");
  return out;
}

int domain_for(const convnet::ConvNet<float>& model, const dataio::Window& w) {
  return model.has_stats(w.participant_id) ? w.participant_id : convnet::kSharedDomain;
}

// Learned cloud where every window uses its participant's statistics when
// the model has them.
features::FeaturePointCloud learned_cloud(const convnet::ConvNet<float>& model,
                                          std::span<const dataio::Window> windows) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < windows.size(); ++i) groups[domain_for(model, windows[i])].push_back(i);
  const int c = model.arch().channels;
  features::FeaturePointCloud out;
  for (const auto& [domain, idx] : groups) {
    std::vector<dataio::Window> subset;
    for (auto i : idx) subset.push_back(windows[i]);
    const auto part = convnet::extract_learned_features(model, subset, domain);
    if (out.row_labels.empty()) {
      out.row_labels = part.row_labels;
      out.row_groups = part.row_groups;
      out.values.resize(part.points(), static_cast<Eigen::Index>(windows.size()) * c);
      for (std::size_t n = 0; n < windows.size(); ++n)
        for (int ch = 0; ch < c; ++ch) out.column_labels.emplace_back(static_cast<int>(n), ch);
    }
    for (std::size_t j = 0; j < idx.size(); ++j)
      out.values.middleCols(static_cast<Eigen::Index>(idx[j]) * c, c) =
          part.values.middleCols(static_cast<Eigen::Index>(j) * c, c);
  }
  return out;
}

// --- Commands ------------------------------------------------------------------

void cmd_synth(Run& run, int domains, int classes) {
  dataio::SynthConfig cfg;
  cfg.seed = run.seed;
  cfg = parse_section(run.doc, "synth", cfg);
  if (domains > 0) cfg.n_domains = domains;
  if (classes > 0) cfg.n_classes = classes;
  if (!run.doc.contains("synth") || !run.doc["synth"].contains("seed")) cfg.seed = run.seed;
  run.resolved["synth"] = cfg;
  const auto recordings = dataio::synth_generate(cfg);
  dataio::write_recordings(recordings, run.dir / "recordings");
  write_json(run.dir / "summary.json",
             {{"recordings", recordings.size()}, {"domains", cfg.n_domains}, {"classes", cfg.n_classes}});
}

void cmd_preprocess(Run& run, const fs::path& data) {
  const auto windows = load_windows(run, data);
  dataio::write_windows(windows, run.dir / "windows.bin", run.dir / "windows.json");
  std::map<std::string, int> per_participant;
  for (const auto& w : windows) ++per_participant[std::to_string(w.participant_id)];
  write_json(run.dir / "summary.json", {{"windows", windows.size()}, {"per_participant", per_participant}});
}

void cmd_features(Run& run, const fs::path& data, const std::string& split) {
  const auto windows = select_split(load_windows(run, data), split);
  const auto cfg = parse_section(run.doc, "features", features::FeatureConfig{});
  run.resolved["features"] = cfg;
  run.resolved["split"] = split;
  const auto cloud = features::extract_all(windows, cfg);
  features::write_cloud_csv(cloud, run.dir / "features.csv");
  features::write_registry_json(run.dir / "registry.json");
  write_json(run.dir / "summary.json", {{"rows", cloud.points()}, {"columns", cloud.dims()}, {"windows", windows.size()}});
}

training::TrainConfig train_config(Run& run, const std::string& profile) {
  if (profile != "desk" && profile != "full") throw ConfigError("profile must be desk or full");
  auto cfg = profile == "desk" ? desk_train_config() : training::TrainConfig{};
  cfg.seed = run.seed;
  cfg = parse_section(run.doc, "train", cfg);
  if (!run.doc.contains("train") || !run.doc["train"].contains("seed")) cfg.seed = run.seed;
  cfg.validate();
  run.resolved["profile"] = profile;
  run.resolved["train"] = cfg;
  return cfg;
}

void cmd_train(Run& run, const fs::path& data, const std::string& mode, const std::string& profile, bool lodo) {
  if (mode != "standard" && mode != "adann") throw ConfigError("mode must be standard or adann");
  const auto windows = load_windows(run, data);
  const auto cfg = train_config(run, profile);
  run.resolved["mode"] = mode;
  const auto trainer = mode == "adann" ? training::Trainer::Adann : training::Trainer::Standard;
  if (lodo) {
    run.resolved["lodo"] = true;
    const auto folds = training::leave_one_domain_out(windows, trainer, cfg);
    json list = json::array();
    double mean = 0.0;
    for (const auto& f : folds) {
      list.push_back({{"held_out", f.held_out}, {"accuracy", f.accuracy}, {"epochs", f.epochs}});
      mean += f.accuracy / static_cast<double>(folds.size());
    }
    write_json(run.dir / "lodo.json", {{"mode", mode}, {"folds", list}, {"mean_accuracy", mean}});
    spdlog::info("leave-one-domain-out mean accuracy {:.4f}", mean);
    return;
  }
  const auto split = training::split_by_cycle(windows);
  auto result = trainer == training::Trainer::Adann ? training::train_adann(split.train, split.validation, cfg)
                                                    : training::train_standard(split.train, split.validation, cfg);
  convnet::save_checkpoint(result.model, run.dir / "model.bin");
  training::write_history_jsonl(result.history, run.dir / "history.jsonl");
  const auto eval = trainer == training::Trainer::Adann
                        ? training::evaluate_per_participant(result.model, split.test, cfg.eval_chunk)
                        : training::evaluate(result.model, split.test, convnet::kSharedDomain, cfg.eval_chunk);
  const auto truth = evaluate::window_labels(split.test);
  const auto cm = evaluate::confusion_matrix(truth, eval.predictions, cfg.arch.gestures);
  evaluate::write_confusion_csv(cm, run.dir / "confusion.csv");
  evaluate::write_confusion_json(cm, run.dir / "confusion.json");
  write_json(run.dir / "metrics.json", {{"mode", mode},
                                        {"test_accuracy", eval.accuracy},
                                        {"test_loss", eval.loss},
                                        {"epochs", result.history.size()},
                                        {"best_epoch", result.best_epoch},
                                        {"steps", result.steps},
                                        {"parameters", cfg.arch.parameter_count(true)}});
  spdlog::info("test accuracy {:.4f}", eval.accuracy);
}

void cmd_learned(Run& run, const fs::path& data, const fs::path& model_file, const std::string& split) {
  const auto windows = select_split(load_windows(run, data), split);
  const auto model = convnet::load_checkpoint(model_file);
  run.resolved["model"] = model_file.string();
  run.resolved["split"] = split;
  const auto cloud = learned_cloud(model, windows);
  features::write_cloud_csv(cloud, run.dir / "learned.csv");
  write_json(run.dir / "summary.json", {{"rows", cloud.points()}, {"columns", cloud.dims()}, {"windows", windows.size()}});
}

void cmd_mapper(Run& run, const std::string& scenario, const fs::path& handcrafted, const fs::path& learned) {
  features::FeaturePointCloud cloud;
  if (scenario == "a") {
    if (handcrafted.empty()) throw ConfigError("scenario a needs --features");
    cloud = features::read_cloud_csv(handcrafted);
  } else if (scenario == "b") {
    if (learned.empty()) throw ConfigError("scenario b needs --learned");
    cloud = features::read_cloud_csv(learned);
  } else if (scenario == "c") {
    if (handcrafted.empty() || learned.empty()) throw ConfigError("scenario c needs --features and --learned");
    cloud = features::FeaturePointCloud::concat(features::read_cloud_csv(handcrafted),
                                                features::read_cloud_csv(learned));
  } else {
    throw ConfigError("scenario must be a, b or c");
  }
  mapper::MapperConfig cfg;
  cfg.tsne.seed = run.seed;
  cfg = parse_section(run.doc, "mapper", cfg);
  if (!run.doc.contains("mapper") || !run.doc["mapper"].contains("tsne") ||
      !run.doc["mapper"]["tsne"].contains("seed")) {
    cfg.tsne.seed = run.seed;
  }
  // The perplexity must stay below (M-1)/3; small clouds use the largest
  // admissible value and the run records it.
  const double bound = static_cast<double>(cloud.points() - 1) / 3.0;
  const double requested = cfg.tsne.perplexity;
  if (!(cfg.tsne.perplexity < bound)) {
    cfg.tsne.perplexity = std::floor(bound - 1e-9);
    spdlog::warn("perplexity {} too large for {} points; using {}", requested, cloud.points(), cfg.tsne.perplexity);
  }
  run.resolved["scenario"] = scenario;
  run.resolved["mapper"] = cfg;
  const auto result = mapper::run_mapper(cloud, cfg);
  const auto& net = result.network;
  mapper::write_graph_json(net, cloud.row_labels, run.dir / "graph.json");
  mapper::write_graph_dot(net, run.dir / "graph.dot");
  mapper::write_lens_csv(result.lens, cloud.row_labels, cloud.row_groups, run.dir / "lens.csv");
  json share = json::object();
  for (const auto& g : std::set<std::string>(cloud.row_groups.begin(), cloud.row_groups.end()))
    share[g] = mapper::dominant_share(net, cloud.row_groups, g);
  write_json(run.dir / "summary.json", {{"points", cloud.points()},
                                        {"pca_components", result.pca.components},
                                        {"perplexity_requested", requested},
                                        {"perplexity", cfg.tsne.perplexity},
                                        {"kl_divergence", result.lens.kl_divergence},
                                        {"regions", result.cover.regions.size()},
                                        {"nodes", net.nodes.size()},
                                        {"edges", net.edges.size()},
                                        {"components", net.components()},
                                        {"cycle_rank", net.cycle_rank()},
                                        {"dominant_share", share},
                                        {"purity_histogram", mapper::purity_histogram(net)}});
  spdlog::info("mapper graph: {} nodes, {} edges", net.nodes.size(), net.edges.size());
}

struct GradcamOptions {
  int per_gesture = 1;
  double decades = 4.0;
};

// Each selected test window is paired with a Gaussian noise window at the
// pooled signal scale; the network is asked for the window's gesture on both
// inputs, under the same normalisation statistics.
void cmd_gradcam(Run& run, const fs::path& data, const fs::path& model_file, GradcamOptions opt) {
  const auto windows = select_split(load_windows(run, data), "test");
  const auto model = convnet::load_checkpoint(model_file);
  if (run.doc.contains("gradcam")) {
    const auto& s = run.doc["gradcam"];
    check_keys(s, {{"per_gesture", 0}, {"decades", 0}}, "gradcam");
    opt.per_gesture = s.value("per_gesture", opt.per_gesture);
    opt.decades = s.value("decades", opt.decades);
  }
  if (opt.per_gesture < 1) throw ConfigError("per_gesture must be at least 1");
  run.resolved["gradcam"] = {{"per_gesture", opt.per_gesture}, {"decades", opt.decades}};
  run.resolved["model"] = model_file.string();
  fs::create_directories(run.dir / "relevance");
  const auto cmp = interpret::compare_with_noise(model, windows, opt.per_gesture, run.seed);
  json items = json::array();
  for (std::size_t k = 0; k < cmp.windows.size(); ++k) {
    const auto i = cmp.windows[k];
    const std::string stem = "w" + std::to_string(i) + "_g" + std::to_string(windows[i].gesture_id);
    for (const auto& [map, suffix] : {std::pair{&cmp.signal[k], ""}, std::pair{&cmp.noise[k], "_noise"}}) {
      const auto base = run.dir / "relevance" / (stem + suffix);
      interpret::write_relevance_csv(*map, base.string() + ".csv");
      interpret::write_relevance_json(*map, base.string() + ".json");
      interpret::write_relevance_svg(*map, base.string() + ".svg", opt.decades);
    }
    items.push_back({{"window", i},
                     {"gesture", windows[i].gesture_id},
                     {"max_signal", cmp.signal[k].values.maxCoeff()},
                     {"max_noise", cmp.noise[k].values.maxCoeff()}});
  }
  write_json(run.dir / "summary.json", {{"windows", items},
                                        {"noise_sd", cmp.noise_sd},
                                        {"mean_max_signal", cmp.mean_max_signal},
                                        {"mean_max_noise", cmp.mean_max_noise},
                                        {"signal_at_least_twice_noise", cmp.mean_max_signal >= 2.0 * cmp.mean_max_noise}});
  spdlog::info("guided grad-cam: mean max relevance {:.4g} on signal, {:.4g} on noise", cmp.mean_max_signal,
               cmp.mean_max_noise);
}

void cmd_probe(Run& run, const fs::path& data, const fs::path& model_file, const std::string& method, int block) {
  const auto windows = load_windows(run, data);
  const auto model = convnet::load_checkpoint(model_file);
  interpret::ProbeConfig cfg;
  cfg.seed = run.seed;
  cfg = parse_section(run.doc, "probe", cfg);
  if (!run.doc.contains("probe") || !run.doc["probe"].contains("seed")) cfg.seed = run.seed;
  features::method_info(method);
  run.resolved["probe"] = cfg;
  run.resolved["method"] = method;
  run.resolved["model"] = model_file.string();
  const auto train = select_split(windows, "train");
  const auto test = select_split(windows, "test");
  json blocks = json::array();
  const int first = block > 0 ? block : 1;
  const int last = block > 0 ? block : model.arch().blocks;
  for (int b = first; b <= last; ++b) {
    const auto r = interpret::train_regression_probe(model, b, method, train, test, cfg);
    blocks.push_back({{"block", r.block}, {"mse", r.mse}, {"restart_mse", r.restart_mse}});
    spdlog::info("probe {} block {}: mse {:.4f}", method, b, r.mse);
  }
  write_json(run.dir / "probe.json", {{"method", method}, {"blocks", blocks}});
}

void write_report(const fs::path& dir, const std::string& prefix, const evaluate::FeatureEvalReport& report) {
  evaluate::write_feature_scores_csv(report, dir / (prefix + "_scores.csv"));
  evaluate::write_summary_csv(report, dir / (prefix + "_summary.csv"));
  fs::create_directories(dir / "confusion");
  for (const auto& g : report.groups) {
    evaluate::write_confusion_csv(g.confusion, dir / "confusion" / (prefix + "_" + g.id + ".csv"));
    evaluate::write_confusion_json(g.confusion, dir / "confusion" / (prefix + "_" + g.id + ".json"));
  }
}

json report_json(const evaluate::FeatureEvalReport& report) {
  json out = json::array();
  for (const auto& s : report.summary) {
    out.push_back({{"group", s.group},
                   {"features", s.features},
                   {"single_mean", s.single_mean},
                   {"single_sd", s.single_sd},
                   {"group_accuracy", s.group_accuracy}});
  }
  return out;
}

void cmd_lda(Run& run, const fs::path& data, const fs::path& model_file, const std::string& mode_name) {
  const std::map<std::string, evaluate::EvalMode> modes = {
      {"single", evaluate::EvalMode::Single}, {"group", evaluate::EvalMode::Group}, {"both", evaluate::EvalMode::Both}};
  if (!modes.contains(mode_name)) throw ConfigError("lda mode must be single, group or both");
  const auto mode = modes.at(mode_name);
  const auto windows = load_windows(run, data);
  const auto train = select_split(windows, "train");
  const auto test = select_split(windows, "test");
  const auto ytr = evaluate::window_labels(train);
  const auto yte = evaluate::window_labels(test);
  const auto cfg = parse_section(run.doc, "features", features::FeatureConfig{});
  run.resolved["features"] = cfg;
  run.resolved["lda_mode"] = mode_name;
  json summary = json::object();
  const auto hand = evaluate::feature_eval(features::extract_all(train, cfg), ytr, features::extract_all(test, cfg),
                                           yte, mode);
  write_report(run.dir, "handcrafted", hand);
  summary["handcrafted"] = report_json(hand);
  if (!model_file.empty()) {
    const auto model = convnet::load_checkpoint(model_file);
    run.resolved["model"] = model_file.string();
    const auto clouds = evaluate::learned_pc1_clouds(model, train, test);
    const auto learned = evaluate::feature_eval(clouds.train, ytr, clouds.test, yte, mode, model.arch().gestures);
    write_report(run.dir, "learned", learned);
    summary["learned"] = report_json(learned);
  }
  write_json(run.dir / "summary.json", summary);
}

std::vector<std::pair<double, double>> read_pairs(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw LoadError(file.string() + ": cannot read");
  std::vector<std::pair<double, double>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double a = 0.0, b = 0.0;
    if (!(ss >> a >> b)) {
      if (out.empty() && lineno == 1) continue;  // header
      throw LoadError(file.string() + ":" + std::to_string(lineno) + ": expected two numbers");
    }
    out.emplace_back(a, b);
  }
  return out;
}

void cmd_stats(Run& run, const fs::path& pairs_file, int exact_max_n) {
  if (run.doc.contains("stats")) {
    check_keys(run.doc["stats"], {{"exact_max_n", 0}}, "stats");
    exact_max_n = run.doc["stats"].value("exact_max_n", exact_max_n);
  }
  run.resolved["stats"] = {{"exact_max_n", exact_max_n}};
  run.resolved["pairs"] = pairs_file.string();
  const auto pairs = read_pairs(pairs_file);
  std::vector<double> a, b, diff;
  for (const auto& [x, y] : pairs) {
    a.push_back(x);
    b.push_back(y);
    diff.push_back(x - y);
  }
  const auto w = evaluate::wilcoxon_signed_rank(diff, exact_max_n);
  const auto d = evaluate::cohens_d(a, b);
  write_json(run.dir / "stats.json", {{"pairs", pairs.size()},
                                      {"wilcoxon", {{"n", w.n}, {"w_plus", w.w_plus}, {"p_value", w.p_value}, {"exact", w.exact}}},
                                      {"cohens_d", {{"d", d.d}, {"label", d.label}}}});
  spdlog::info("wilcoxon p = {:.6g}, d = {:.3f} ({})", w.p_value, d.d, d.label);
}

// --- Driver --------------------------------------------------------------------

int execute(const std::string& command, const Common& common, const std::function<void(Run&)>& body) {
  Run run;
  run.command = command;
  run.doc = load_config(common.config);
  for (const auto& [key, value] : run.doc.items())
    if (!kSections.contains(key)) throw ConfigError("config: unknown section '" + key + "'");
  run.seed = common.seed ? *common.seed : run.doc.value("seed", std::uint64_t{1});
  if (common.threads > 0) thread_count() = common.threads;
  run.dir = common.out.empty() ? artifacts::timestamped_dir("runs", command) : fs::path(common.out);
  fs::create_directories(run.dir);
  run.resolved["seed"] = run.seed;
  body(run);
  artifacts::write_run_record(run.dir, command, run.resolved, run.seed);
  artifacts::write_manifest(run.dir);
  std::cout << run.dir.string() << '\n';
  return 0;
}

int error_exit(const char* kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("myofeat");
  spdlog::set_default_logger(logger);
  CLI::App app{"sEMG feature pipeline: preprocessing, features, ADANN training, Mapper, interpretation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(artifacts::version()));
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "Seed for every stochastic step");
    sub->add_option("--out", common.out, "Output directory (default runs/<command>-<timestamp>)");
    sub->add_option("--threads", common.threads, "Worker threads (default MYOFEAT_THREADS or 1)")
        ->check(CLI::PositiveNumber);
  };
  std::function<void(Run&)> body;
  std::string chosen;
  auto on = [&](CLI::App* sub, std::function<void(Run&)> fn) {
    add_common(sub);
    sub->callback([&, sub, fn] {
      chosen = sub->get_name();
      body = fn;
    });
  };

  std::string data, model, split = "all", mode, profile = "desk", scenario, hand, learned, method = "MAV";
  std::string lda_mode = "both", pairs;
  int domains = 0, classes = 0, block = 0, exact_max_n = 25;
  bool lodo = false;
  GradcamOptions gopt;

  auto* synth = app.add_subcommand("synth", "Generate the synthetic multi-domain recordings");
  synth->add_option("--domains", domains, "Number of participants")->check(CLI::PositiveNumber);
  synth->add_option("--classes", classes, "Number of gestures")->check(CLI::PositiveNumber);
  on(synth, [&](Run& r) { cmd_synth(r, domains, classes); });

  auto* pre = app.add_subcommand("preprocess", "Filter and segment recordings into windows");
  pre->add_option("--data", data, "Recordings directory or synth output")->required();
  on(pre, [&](Run& r) { cmd_preprocess(r, data); });

  auto* feat = app.add_subcommand("features", "Extract the handcrafted feature cloud");
  feat->add_option("--data", data, "Windows or recordings")->required();
  feat->add_option("--split", split, "all, train or test")->check(CLI::IsMember({"all", "train", "test"}));
  on(feat, [&](Run& r) { cmd_features(r, data, split); });

  auto* train = app.add_subcommand("train", "Train the network");
  train->add_option("--data", data, "Windows or recordings")->required();
  train->add_option("--mode", mode, "standard or adann")->required()->check(CLI::IsMember({"standard", "adann"}));
  train->add_option("--profile", profile, "desk (reduced width) or full defaults")->check(CLI::IsMember({"desk", "full"}));
  train->add_flag("--lodo", lodo, "Leave-one-domain-out evaluation instead of a single model");
  on(train, [&](Run& r) { cmd_train(r, data, mode, profile, lodo); });

  auto* lf = app.add_subcommand("learned-features", "Extract the learned feature cloud");
  lf->add_option("--data", data, "Windows or recordings")->required();
  lf->add_option("--model", model, "Checkpoint")->required()->check(CLI::ExistingFile);
  lf->add_option("--split", split, "all, train or test")->check(CLI::IsMember({"all", "train", "test"}));
  on(lf, [&](Run& r) { cmd_learned(r, data, model, split); });

  auto* mp = app.add_subcommand("mapper", "Build the topological network of a feature cloud");
  mp->add_option("--scenario", scenario, "a, b or c")->required()->check(CLI::IsMember({"a", "b", "c"}));
  mp->add_option("--features", hand, "Handcrafted cloud CSV")->check(CLI::ExistingFile);
  mp->add_option("--learned", learned, "Learned cloud CSV")->check(CLI::ExistingFile);
  on(mp, [&](Run& r) { cmd_mapper(r, scenario, hand, learned); });

  auto* gc = app.add_subcommand("gradcam", "Guided Grad-CAM maps for test windows");
  gc->add_option("--data", data, "Windows or recordings")->required();
  gc->add_option("--model", model, "Checkpoint")->required()->check(CLI::ExistingFile);
  gc->add_option("--per-gesture", gopt.per_gesture, "Windows per gesture");
  on(gc, [&](Run& r) { cmd_gradcam(r, data, model, gopt); });

  auto* pr = app.add_subcommand("probe", "Regression probes from block activations to a feature");
  pr->add_option("--data", data, "Windows or recordings")->required();
  pr->add_option("--model", model, "Checkpoint")->required()->check(CLI::ExistingFile);
  pr->add_option("--method", method, "Feature method, e.g. MAV");
  pr->add_option("--block", block, "Block 1..6 (default all)");
  on(pr, [&](Run& r) { cmd_probe(r, data, model, method, block); });

  auto* ld = app.add_subcommand("lda", "LDA accuracy of single and grouped features");
  ld->add_option("--data", data, "Windows or recordings")->required();
  ld->add_option("--model", model, "Checkpoint for learned features")->check(CLI::ExistingFile);
  ld->add_option("--mode", lda_mode, "single, group or both")->check(CLI::IsMember({"single", "group", "both"}));
  on(ld, [&](Run& r) { cmd_lda(r, data, model, lda_mode); });

  auto* st = app.add_subcommand("stats", "Wilcoxon signed-rank test and Cohen's d on paired scores");
  st->add_option("--pairs", pairs, "CSV with two columns of paired scores")->required()->check(CLI::ExistingFile);
  st->add_option("--exact-max-n", exact_max_n, "Largest n for the exact null distribution");
  on(st, [&](Run& r) { cmd_stats(r, pairs, exact_max_n); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  try {
    return execute(chosen, common, body);
  } catch (const ConfigError& e) {
    return error_exit("config", e.what());
  } catch (const LoadError& e) {
    return error_exit("load", e.what());
  } catch (const NumericError& e) {
    return error_exit("numeric", e.what());
  } catch (const Error& e) {
    return error_exit("error", e.what());
  } catch (const std::exception& e) {
    return error_exit("internal", e.what());
  }
}

}  // namespace myofeat::cli

int main(int argc, char** argv) { return myofeat::cli::main(argc, argv); }
