#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "myofeat/error.hpp"
#include "myofeat/interpret.hpp"
#include "oracles.hpp"

using namespace myofeat;
using namespace myofeat::interpret;
using convnet::ConvNet;
using convnet::Mat;

namespace {

Eigen::MatrixXd random_window(int rows, int cols, Rng& rng, double scale = 1.0) {
  Eigen::MatrixXd x(rows, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal(0.0, scale);
  return x;
}

ConvNet<double> calibrated(const convnet::Architecture& arch, std::uint64_t seed) {
  ConvNet<double> net(arch, seed);
  Rng rng(seed + 100);
  const auto x = oracle::random_input<double>(arch, 8, rng);
  net.estimate_stats(convnet::kSharedDomain, x, 8);
  return net;
}

}  // namespace

TEST_CASE("guided backprop through one block follows the rectifier rule by hand") {
  auto arch = oracle::tiny_arch();
  arch.blocks = 1;
  const auto net = calibrated(arch, 3);
  Rng rng(4);
  const auto input = random_window(arch.channels, arch.length, rng);
  const int g = 2;
  const auto guided = guided_backprop(net, input, g, convnet::kSharedDomain);

  Mat<double> x(1, input.size());
  for (int r = 0; r < arch.channels; ++r)
    for (int t = 0; t < arch.length; ++t) x(0, r * arch.length + t) = input(r, t);
  const auto tape = net.infer(x, 1, convnet::kSharedDomain);
  Mat<double> onehot = Mat<double>::Zero(arch.gestures, 1);
  onehot(g, 0) = 1.0;
  std::vector<double> grad(net.parameter_count(), 0.0);
  convnet::BackwardOptions bo;
  bo.capture_block = 1;
  convnet::BackwardExtras<double> extras;
  net.backward(tape, onehot, nullptr, grad, bo, &extras);
  const Mat<double>& up = extras.captured;  // d logit / d block output
  const auto& stats = net.stats(convnet::kSharedDomain);
  const int len = arch.block_length(1);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(arch.channels, arch.length);
  for (int m = 0; m < arch.maps; ++m) {
    const double s = net.bn_scale(1)(m) / std::sqrt(stats.var[0](m) + arch.bn_eps);
    for (int r = 0; r < arch.channels; ++r) {
      for (int t = 0; t < len; ++t) {
        const double gu = up(m, r * len + t);
        const double a = tape.act[1](m, r * len + t);
        const double gz = (a > 0.0 && gu > 0.0) ? gu * s : 0.0;
        for (int k = 0; k < arch.kernel; ++k) expected(r, t + k) += net.conv_weight(1)(m, k) * gz;
      }
    }
  }
  CHECK((guided - expected).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + expected.cwiseAbs().maxCoeff()));
}

TEST_CASE("grad-cam is non-negative and responds to the gesture weights only") {
  auto arch = oracle::tiny_arch();
  auto net = calibrated(arch, 5);
  Rng rng(6);
  const auto input = random_window(arch.channels, arch.length, rng);
  const auto cam = grad_cam(net, input, 1, convnet::kSharedDomain);
  CHECK(cam.rows() == arch.channels);
  CHECK(cam.cols() == arch.block_length(arch.blocks));
  CHECK(cam.minCoeff() >= 0.0);
  net.gesture_bias()(1) += 5.0;
  CHECK((grad_cam(net, input, 1, convnet::kSharedDomain) - cam).cwiseAbs().maxCoeff() < 1e-12);
  net.gesture_weight().row(1) *= 3.0;
  CHECK((grad_cam(net, input, 1, convnet::kSharedDomain) - 3.0 * cam).cwiseAbs().maxCoeff() <
        1e-10 * (1.0 + cam.maxCoeff()));
  net.gesture_weight().row(1) *= -1.0;
  const auto flipped = grad_cam(net, input, 1, convnet::kSharedDomain);
  // relu(-v) and relu(v) never overlap.
  CHECK((flipped.array() * cam.array()).maxCoeff() == 0.0);
  CHECK_THROWS_AS(grad_cam(net, input, arch.gestures, convnet::kSharedDomain), ConfigError);
  CHECK_THROWS_AS(grad_cam(net, Eigen::MatrixXd::Zero(2, 2), 0, convnet::kSharedDomain), ConfigError);
}

TEST_CASE("guided grad-cam combines both maps element-wise") {
  auto arch = oracle::tiny_arch();
  const auto net = calibrated(arch, 7);
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const auto input = random_window(arch.channels, arch.length, rng);
    const int g = trial % arch.gestures;
    const auto map = guided_grad_cam(net, input, g, convnet::kSharedDomain, trial);
    const auto cam = grad_cam(net, input, g, convnet::kSharedDomain);
    const auto guided = guided_backprop(net, input, g, convnet::kSharedDomain);
    CHECK(map.window_id == trial);
    CHECK(map.target_gesture == g);
    CHECK(map.values.minCoeff() >= 0.0);
    const int len = static_cast<int>(cam.cols());
    for (int r = 0; r < arch.channels; ++r) {
      for (int t = 0; t < arch.length; ++t) {
        const int c = std::min(len - 1, t * len / arch.length);
        CHECK(map.values(r, t) == doctest::Approx(cam(r, c) * std::max(0.0, guided(r, t))));
      }
    }
  }
}

TEST_CASE("relevance exports") {
  RelevanceMap map;
  map.values = Eigen::MatrixXd::Zero(10, 151);
  map.values(3, 7) = 0.01;
  map.values(0, 0) = 1.0;
  const auto dir = std::filesystem::temp_directory_path() / "myofeat_relevance";
  std::filesystem::create_directories(dir);
  write_relevance_csv(map, dir / "r.csv");
  write_relevance_json(map, dir / "r.json");
  write_relevance_svg(map, dir / "r.svg");
  std::ifstream csv(dir / "r.csv");
  std::string line;
  int lines = 0;
  while (std::getline(csv, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 150);
    ++lines;
  }
  CHECK(lines == 10);
  std::ifstream js(dir / "r.json");
  const auto doc = nlohmann::json::parse(js);
  CHECK(doc.at("cells").size() == 1510);
  CHECK(doc.at("cells")[3 * 151 + 7].at("log10_value").get<double>() == doctest::Approx(-2.0));
  CHECK(doc.at("cells")[1].at("log10_value").is_null());
  std::ifstream svg(dir / "r.svg");
  std::getline(svg, line);
  CHECK(line.find("<svg") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("regression probe fits a linear target and not noise") {
  Rng rng(9);
  const int n = 600, d = 8;
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  Eigen::VectorXd beta(d);
  for (int j = 0; j < d; ++j) beta(j) = rng.normal();
  Eigen::VectorXd y = x * beta, noise(n);
  for (int i = 0; i < n; ++i) noise(i) = rng.normal();
  ProbeConfig config;
  config.restarts = 3;
  config.epochs = 60;
  config.lr = 0.02;
  const auto fit = train_regression_probe(x.topRows(400), y.head(400), x.bottomRows(200), y.tail(200), config);
  CHECK(fit.restart_mse.size() == 3);
  CHECK(fit.mse < 0.02);
  const auto none =
      train_regression_probe(x.topRows(400), noise.head(400), x.bottomRows(200), noise.tail(200), config);
  CHECK(none.mse > 0.8);
}

TEST_CASE("probe inputs and block range") {
  convnet::Architecture arch;
  arch.maps = 2;
  ConvNet<float> net(arch, 2);
  Rng rng(10);
  const auto windows = oracle::noise_windows(4, 2, rng);
  net.estimate_stats(convnet::kSharedDomain, convnet::pack_windows<float>(windows), 4);
  ProbeConfig config;
  config.channels = {0, 4};
  const std::vector<int> domains(windows.size(), convnet::kSharedDomain);
  const auto x = probe_inputs(net, windows, 2, domains, config);
  CHECK(x.rows() == 8);
  CHECK(x.cols() == 2 * arch.block_length(2));
  const auto tape = net.infer(convnet::pack_windows<float>(windows), 4, convnet::kSharedDomain);
  const int len = arch.block_length(2);
  // Sample 3 is window 1, channel 4; column m * len + t.
  CHECK(x(3, len + 5) == doctest::Approx(tape.act[2](1, (1 * 10 + 4) * len + 5)).epsilon(1e-5));
  CHECK_THROWS_AS(probe_inputs(net, windows, 7, domains, config), ConfigError);
  CHECK_THROWS_AS(probe_inputs(net, windows, 0, domains, config), ConfigError);
}

TEST_CASE("probe targets reduce multi-output methods to one component") {
  Rng rng(11);
  const auto train = oracle::noise_windows(12, 2, rng);
  const auto test = oracle::noise_windows(5, 2, rng);
  ProbeConfig config;
  const auto mav = probe_targets("MAV", train, test, config);
  CHECK(mav.train.size() == 12);
  CHECK(mav.test.size() == 5);
  double expected = train[3].data.row(0).cwiseAbs().mean();
  CHECK(mav.train(3) == doctest::Approx(expected));
  const auto ar = probe_targets("AR", train, test, config);
  CHECK(ar.train.size() == 12);
  CHECK(std::abs(ar.train.mean()) < 1e-9);
  CHECK_THROWS_AS(probe_targets("NOPE", train, test, config), ConfigError);
}
