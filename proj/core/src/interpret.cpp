#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include <json.hpp>

#include "myofeat/error.hpp"
#include "myofeat/features.hpp"
#include "myofeat/interpret.hpp"

namespace myofeat::interpret {

using convnet::ConvNet;
using convnet::Mat;

namespace {

template <class T>
Mat<T> to_input(const ConvNet<T>& model, const Eigen::MatrixXd& input) {
  const auto& a = model.arch();
  if (input.rows() != a.channels || input.cols() != a.length) {
    throw ConfigError("input must be " + std::to_string(a.channels) + "x" + std::to_string(a.length));
  }
  Mat<T> x(1, input.size());
  for (Eigen::Index r = 0; r < input.rows(); ++r)
    for (Eigen::Index t = 0; t < input.cols(); ++t) x(0, r * input.cols() + t) = static_cast<T>(input(r, t));
  return x;
}

template <class T>
void check_gesture(const ConvNet<T>& model, int gesture) {
  if (gesture < 0 || gesture >= model.arch().gestures) {
    throw ConfigError("gesture index " + std::to_string(gesture) + " outside [0," +
                      std::to_string(model.arch().gestures - 1) + "]");
  }
}

template <class T>
Mat<T> one_hot(const ConvNet<T>& model, int gesture) {
  Mat<T> d = Mat<T>::Zero(model.arch().gestures, 1);
  d(gesture, 0) = T(1);
  return d;
}

}  // namespace

template <class T>
Eigen::MatrixXd guided_backprop(const ConvNet<T>& model, const Eigen::MatrixXd& input, int gesture,
                                int domain) {
  check_gesture(model, gesture);
  const auto tape = model.infer(to_input(model, input), 1, domain);
  std::vector<T> grad(model.parameter_count(), T(0));
  convnet::BackwardOptions bo;
  bo.guided = true;
  bo.input_gradient = true;
  convnet::BackwardExtras<T> extras;
  model.backward(tape, one_hot(model, gesture), nullptr, grad, bo, &extras);
  const auto& a = model.arch();
  Eigen::MatrixXd out(a.channels, a.length);
  for (int r = 0; r < a.channels; ++r)
    for (int t = 0; t < a.length; ++t)
      out(r, t) = static_cast<double>(extras.input_gradient(0, static_cast<Eigen::Index>(r) * a.length + t));
  return out;
}

template <class T>
Eigen::MatrixXd grad_cam(const ConvNet<T>& model, const Eigen::MatrixXd& input, int gesture, int domain) {
  check_gesture(model, gesture);
  const auto& a = model.arch();
  const auto tape = model.infer(to_input(model, input), 1, domain);
  std::vector<T> grad(model.parameter_count(), T(0));
  convnet::BackwardOptions bo;
  bo.capture_block = a.blocks;
  convnet::BackwardExtras<T> extras;
  model.backward(tape, one_hot(model, gesture), nullptr, grad, bo, &extras);
  // F and dF are maps x (channels * L_last); the weights average over the
  // spatial extent (channels x L_last) of each map.
  const Eigen::MatrixXd f = tape.act.back().template cast<double>();
  const Eigen::MatrixXd df = extras.captured.template cast<double>();
  const Eigen::VectorXd w = df.rowwise().mean();
  const Eigen::RowVectorXd cam = (w.transpose() * f).cwiseMax(0.0);
  const int len = a.block_length(a.blocks);
  Eigen::MatrixXd out(a.channels, len);
  for (int r = 0; r < a.channels; ++r)
    for (int t = 0; t < len; ++t) out(r, t) = cam(static_cast<Eigen::Index>(r) * len + t);
  return out;
}

template <class T>
RelevanceMap guided_grad_cam(const ConvNet<T>& model, const Eigen::MatrixXd& input, int gesture,
                             int domain, int window_id) {
  const Eigen::MatrixXd cam = grad_cam(model, input, gesture, domain);
  const Eigen::MatrixXd guided = guided_backprop(model, input, gesture, domain);
  RelevanceMap map;
  map.target_gesture = gesture;
  map.window_id = window_id;
  map.values.resize(guided.rows(), guided.cols());
  const auto len = cam.cols();
  for (Eigen::Index r = 0; r < guided.rows(); ++r) {
    for (Eigen::Index t = 0; t < guided.cols(); ++t) {
      const Eigen::Index c = std::min(len - 1, t * len / guided.cols());
      map.values(r, t) = cam(r, c) * std::max(0.0, guided(r, t));
    }
  }
  return map;
}

template Eigen::MatrixXd guided_backprop<float>(const ConvNet<float>&, const Eigen::MatrixXd&, int, int);
template Eigen::MatrixXd guided_backprop<double>(const ConvNet<double>&, const Eigen::MatrixXd&, int, int);
template Eigen::MatrixXd grad_cam<float>(const ConvNet<float>&, const Eigen::MatrixXd&, int, int);
template Eigen::MatrixXd grad_cam<double>(const ConvNet<double>&, const Eigen::MatrixXd&, int, int);
template RelevanceMap guided_grad_cam<float>(const ConvNet<float>&, const Eigen::MatrixXd&, int, int, int);
template RelevanceMap guided_grad_cam<double>(const ConvNet<double>&, const Eigen::MatrixXd&, int, int, int);

NoiseComparison compare_with_noise(const ConvNet<float>& model, std::span<const dataio::Window> windows,
                                   int per_gesture, std::uint64_t seed) {
  if (per_gesture < 1) throw ConfigError("per_gesture must be at least 1");
  NoiseComparison out;
  std::map<int, int> taken;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (taken[windows[i].gesture_id]++ < per_gesture) out.windows.push_back(i);
  }
  if (out.windows.empty()) throw ConfigError("no windows to explain");
  double sum = 0.0, sumsq = 0.0, count = 0.0;
  for (auto i : out.windows) {
    sum += windows[i].data.sum();
    sumsq += windows[i].data.squaredNorm();
    count += static_cast<double>(windows[i].data.size());
  }
  const double mean = sum / count;
  out.noise_sd = std::sqrt(std::max(0.0, sumsq / count - mean * mean));
  Rng rng(seed);
  for (auto i : out.windows) {
    const auto& w = windows[i];
    const int domain = model.has_stats(w.participant_id) ? w.participant_id : convnet::kSharedDomain;
    Eigen::MatrixXd noise(w.data.rows(), w.data.cols());
    for (Eigen::Index k = 0; k < noise.size(); ++k) noise.data()[k] = rng.normal(0.0, out.noise_sd);
    out.signal.push_back(guided_grad_cam(model, w.data, w.gesture_id, domain, static_cast<int>(i)));
    out.noise.push_back(guided_grad_cam(model, noise, w.gesture_id, domain, static_cast<int>(i)));
    out.mean_max_signal += out.signal.back().values.maxCoeff();
    out.mean_max_noise += out.noise.back().values.maxCoeff();
  }
  out.mean_max_signal /= static_cast<double>(out.windows.size());
  out.mean_max_noise /= static_cast<double>(out.windows.size());
  return out;
}

// ---------------------------------------------------------------------------

void write_relevance_csv(const RelevanceMap& map, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw LoadError(file.string() + ": cannot write");
  out.precision(17);
  for (Eigen::Index r = 0; r < map.values.rows(); ++r) {
    for (Eigen::Index t = 0; t < map.values.cols(); ++t) out << (t ? "," : "") << map.values(r, t);
    out << '\n';
  }
}

void write_relevance_json(const RelevanceMap& map, const std::filesystem::path& file) {
  nlohmann::json cells = nlohmann::json::array();
  for (Eigen::Index r = 0; r < map.values.rows(); ++r) {
    for (Eigen::Index t = 0; t < map.values.cols(); ++t) {
      const double v = map.values(r, t);
      cells.push_back({{"channel", r},
                       {"time", t},
                       {"value", v},
                       {"log10_value", v > 0.0 ? nlohmann::json(std::log10(v)) : nlohmann::json()}});
    }
  }
  nlohmann::json doc = {{"target_gesture", map.target_gesture}, {"window", map.window_id}, {"cells", cells}};
  std::ofstream out(file);
  if (!out) throw LoadError(file.string() + ": cannot write");
  out << doc.dump(1) << '\n';
}

namespace {

// Piecewise-linear dark-blue to yellow ramp.
std::string ramp(double u) {
  static const double stops[5][3] = {
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  u = std::clamp(u, 0.0, 1.0) * 4.0;
  const int i = std::min(3, static_cast<int>(u));
  const double f = u - i;
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                static_cast<int>(std::lround(stops[i][0] + f * (stops[i + 1][0] - stops[i][0]))),
                static_cast<int>(std::lround(stops[i][1] + f * (stops[i + 1][1] - stops[i][1]))),
                static_cast<int>(std::lround(stops[i][2] + f * (stops[i + 1][2] - stops[i][2]))));
  return buf;
}

}  // namespace

void write_relevance_svg(const RelevanceMap& map, const std::filesystem::path& file, double decades) {
  if (!(decades > 0.0)) throw ConfigError("decades must be positive");
  const int cell_w = 4, cell_h = 20;
  const auto rows = map.values.rows(), cols = map.values.cols();
  const double vmax = map.values.maxCoeff();
  const double top = vmax > 0.0 ? std::log10(vmax) : 0.0;
  std::ofstream out(file);
  if (!out) throw LoadError(file.string() + ": cannot write");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << cols * cell_w << "\" height=\""
      << rows * cell_h << "\" shape-rendering=\"crispEdges\">\n";
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index t = 0; t < cols; ++t) {
      const double v = map.values(r, t);
      const double u = v > 0.0 && vmax > 0.0 ? 1.0 + (std::log10(v) - top) / decades : 0.0;
      out << "<rect x=\"" << t * cell_w << "\" y=\"" << r * cell_h << "\" width=\"" << cell_w
          << "\" height=\"" << cell_h << "\" fill=\"" << ramp(u) << "\"/>\n";
    }
  }
  out << "</svg>\n";
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd probe_inputs(const ConvNet<float>& model, std::span<const dataio::Window> windows,
                             int block, std::span<const int> domains, const ProbeConfig& config) {
  const auto& a = model.arch();
  if (block < 1 || block > a.blocks) {
    throw ConfigError("block id " + std::to_string(block) + " outside 1.." + std::to_string(a.blocks));
  }
  if (domains.size() != windows.size()) throw ConfigError("one domain per window expected");
  if (config.channels.empty()) throw ConfigError("probe needs at least one channel");
  for (int c : config.channels)
    if (c < 0 || c >= a.channels) throw ConfigError("probe channel out of range");
  const int len = a.block_length(block);
  const auto per_window = static_cast<Eigen::Index>(config.channels.size());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(windows.size()) * per_window,
                    static_cast<Eigen::Index>(a.maps) * len);
  // Contiguous runs of windows sharing a domain are evaluated together.
  std::size_t start = 0;
  while (start < windows.size()) {
    std::size_t end = start;
    while (end < windows.size() && domains[end] == domains[start]) ++end;
    convnet::for_each_chunk<float>(
        model, windows.subspan(start, end - start), domains[start], config.chunk,
        [&](std::size_t first, const convnet::Tape<float>& tape) {
          const auto& act = tape.act[static_cast<std::size_t>(block)];
          for (int n = 0; n < tape.batch; ++n) {
            for (std::size_t k = 0; k < config.channels.size(); ++k) {
              const Eigen::Index s = static_cast<Eigen::Index>(n) * a.channels + config.channels[k];
              const Eigen::Index row =
                  static_cast<Eigen::Index>(start + first + static_cast<std::size_t>(n)) * per_window +
                  static_cast<Eigen::Index>(k);
              for (int m = 0; m < a.maps; ++m)
                for (int t = 0; t < len; ++t)
                  x(row, static_cast<Eigen::Index>(m) * len + t) = act(m, s * len + t);
            }
          }
        });
    start = end;
  }
  return x;
}

ProbeTargets probe_targets(std::string_view method, std::span<const dataio::Window> train,
                           std::span<const dataio::Window> test, const ProbeConfig& config) {
  const auto& info = features::method_info(method);
  auto raw = [&](std::span<const dataio::Window> windows) {
    Eigen::MatrixXd y(static_cast<Eigen::Index>(windows.size() * config.channels.size()), info.outputs);
    Eigen::Index row = 0;
    std::vector<double> samples(dataio::kWindowLength);
    for (const auto& w : windows) {
      for (int c : config.channels) {
        for (int t = 0; t < dataio::kWindowLength; ++t) samples[static_cast<std::size_t>(t)] = w.data(c, t);
        const auto v = features::extract_method(method, samples);
        for (int j = 0; j < info.outputs; ++j) y(row, j) = std::isfinite(v[static_cast<std::size_t>(j)]) ? v[static_cast<std::size_t>(j)] : 0.0;
        ++row;
      }
    }
    return y;
  };
  const Eigen::MatrixXd ytr = raw(train), yte = raw(test);
  ProbeTargets out;
  if (info.outputs == 1) {
    out.train = ytr.col(0);
    out.test = yte.col(0);
    return out;
  }
  const Eigen::RowVectorXd mean = ytr.colwise().mean();
  const Eigen::RowVectorXd sd =
      ((ytr.rowwise() - mean).array().square().colwise().mean()).sqrt().max(1e-12).matrix();
  const Eigen::MatrixXd ztr = (ytr.rowwise() - mean).array().rowwise() / sd.array();
  const Eigen::MatrixXd zte = (yte.rowwise() - mean).array().rowwise() / sd.array();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ztr.transpose() * ztr);
  Eigen::VectorXd pc = eig.eigenvectors().col(eig.eigenvectors().cols() - 1);
  Eigen::Index arg = 0;
  pc.cwiseAbs().maxCoeff(&arg);
  if (pc[arg] < 0.0) pc = -pc;
  out.train = ztr * pc;
  out.test = zte * pc;
  return out;
}

ProbeResult train_regression_probe(const Eigen::MatrixXd& train_x, const Eigen::VectorXd& train_y,
                                   const Eigen::MatrixXd& test_x, const Eigen::VectorXd& test_y,
                                   const ProbeConfig& config) {
  if (train_x.rows() != train_y.size() || test_x.rows() != test_y.size() || train_x.cols() != test_x.cols()) {
    throw ConfigError("probe inputs and targets do not line up");
  }
  if (train_x.rows() < 2 || test_x.rows() < 1) throw ConfigError("probe needs training and test samples");
  if (config.restarts < 1 || config.epochs < 1 || config.batch_size < 1) {
    throw ConfigError("probe restarts, epochs and batch size must be positive");
  }
  const Eigen::Index d = train_x.cols();
  const Eigen::RowVectorXd mx = train_x.colwise().mean();
  Eigen::RowVectorXd sx = ((train_x.rowwise() - mx).array().square().colwise().mean()).sqrt().matrix();
  for (Eigen::Index j = 0; j < d; ++j) sx[j] = sx[j] > 1e-12 ? sx[j] : 1.0;
  const Eigen::MatrixXd xtr = (train_x.rowwise() - mx).array().rowwise() / sx.array();
  const Eigen::MatrixXd xte = (test_x.rowwise() - mx).array().rowwise() / sx.array();
  const double my = train_y.mean();
  const double sy_raw = std::sqrt((train_y.array() - my).square().mean());
  const double sy = sy_raw > 1e-12 ? sy_raw : 1.0;
  const Eigen::VectorXd ytr = (train_y.array() - my) / sy;
  const Eigen::VectorXd yte = (test_y.array() - my) / sy;

  ProbeResult result;
  Rng master(config.seed);
  const auto n = static_cast<std::size_t>(xtr.rows());
  for (int r = 0; r < config.restarts; ++r) {
    Rng rng = master.split(static_cast<std::uint64_t>(r) + 1);
    std::vector<double> params(static_cast<std::size_t>(d) + 1);
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    for (auto& p : params) p = rng.uniform(-bound, bound);
    convnet::Adam<double> adam(params.size());
    std::vector<double> grad(params.size());
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (int e = 0; e < config.epochs; ++e) {
      rng.shuffle(order);
      for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
        const std::size_t end = std::min(n, start + static_cast<std::size_t>(config.batch_size));
        Eigen::Map<const Eigen::VectorXd> w(params.data(), d);
        std::fill(grad.begin(), grad.end(), 0.0);
        Eigen::Map<Eigen::VectorXd> gw(grad.data(), d);
        const double scale = 2.0 / static_cast<double>(end - start);
        for (std::size_t k = start; k < end; ++k) {
          const auto i = static_cast<Eigen::Index>(order[k]);
          const double err = xtr.row(i).dot(w) + params.back() - ytr[i];
          gw += scale * err * xtr.row(i).transpose();
          grad.back() += scale * err;
        }
        if (config.l2 > 0.0) gw += 2.0 * config.l2 * w;
        adam.step(params, grad, config.lr);
      }
    }
    Eigen::Map<const Eigen::VectorXd> w(params.data(), d);
    const double mse = ((xte * w).array() + params.back() - yte.array()).square().mean();
    result.restart_mse.push_back(mse);
  }
  for (double m : result.restart_mse) result.mse += m;
  result.mse /= static_cast<double>(result.restart_mse.size());
  return result;
}

ProbeResult train_regression_probe(const ConvNet<float>& model, int block, std::string_view method,
                                   std::span<const dataio::Window> train,
                                   std::span<const dataio::Window> test, const ProbeConfig& config) {
  auto domains = [&](std::span<const dataio::Window> windows) {
    std::vector<int> out;
    for (const auto& w : windows)
      out.push_back(model.has_stats(w.participant_id) ? w.participant_id : convnet::kSharedDomain);
    return out;
  };
  const auto dtr = domains(train), dte = domains(test);
  const Eigen::MatrixXd xtr = probe_inputs(model, train, block, dtr, config);
  const Eigen::MatrixXd xte = probe_inputs(model, test, block, dte, config);
  const auto targets = probe_targets(method, train, test, config);
  auto result = train_regression_probe(xtr, targets.train, xte, targets.test, config);
  result.block = block;
  return result;
}

}  // namespace myofeat::interpret
