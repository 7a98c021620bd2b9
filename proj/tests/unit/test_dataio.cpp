#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "myofeat/dataio.hpp"
#include "myofeat/error.hpp"
#include "myofeat/evaluate.hpp"
#include "myofeat/features.hpp"
#include "oracles.hpp"

using namespace myofeat;
using namespace myofeat::dataio;
namespace fs = std::filesystem;

namespace {

double steady_gain(double hz, const FilterSpec& spec = {}) {
  std::vector<double> x(6000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / spec.sample_rate);
  const auto y = bandpass_filter(x, spec);
  double ss = 0.0;
  for (std::size_t i = 4000; i < y.size(); ++i) ss += y[i] * y[i];
  return std::sqrt(2.0 * ss / 2000.0);
}

double db(double g) { return 20.0 * std::log10(g); }

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("myofeat_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("butterworth magnitude matches the closed form") {
  for (double hz : {5.0, 20.0, 60.0, 100.0, 250.0, 400.0, 495.0}) {
    const double expected = oracle::butterworth_bandpass_gain(hz, 20.0, 495.0, 4, 1000.0);
    const ButterworthBandpass filter(FilterSpec{});
    CHECK(std::abs(filter.response(hz)) == doctest::Approx(expected).epsilon(1e-9));
  }
  CHECK(std::abs(db(steady_gain(100.0)) - db(oracle::butterworth_bandpass_gain(100.0, 20, 495, 4, 1000))) < 0.5);
  CHECK(std::abs(db(steady_gain(20.0)) + 3.0) < 1.0);
  CHECK(db(steady_gain(5.0)) <= -20.0);
}

TEST_CASE("butterworth poles are stable and the filter is linear") {
  const ButterworthBandpass filter(FilterSpec{});
  CHECK(filter.sections().size() == 4);
  for (auto p : filter.poles()) CHECK(std::abs(p) < 1.0);
  Rng rng(3);
  std::vector<double> x(500), ax(500);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = rng.normal();
    ax[i] = -3.5 * x[i];
  }
  const auto y = filter.apply(x), ay = filter.apply(ax);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(ay[i] == doctest::Approx(-3.5 * y[i]).epsilon(1e-9));
}

TEST_CASE("constant input decays to zero") {
  const std::vector<double> ones(3000, 1.0);
  const auto y = bandpass_filter(ones);
  for (std::size_t i = 2000; i < y.size(); ++i) CHECK(std::abs(y[i]) < 1e-3);
}

TEST_CASE("filter spec validation") {
  CHECK_THROWS_AS(FilterSpec({500.0, 400.0, 4, 1000.0}).validate(), ConfigError);
  CHECK_THROWS_AS(FilterSpec({20.0, 500.0, 4, 1000.0}).validate(), ConfigError);
  CHECK_THROWS_AS(bandpass_filter(std::vector<double>(5, 0.0)), ConfigError);
}

TEST_CASE("segment counts and tiling") {
  CHECK(window_count(151) == 1);
  CHECK(window_count(150) == 0);
  CHECK(window_count(5000) == 96);
  Eigen::MatrixXd s(10, 400);
  for (int c = 0; c < 10; ++c)
    for (int t = 0; t < 400; ++t) s(c, t) = c * 1000 + t;
  const auto w = segment(s);
  REQUIRE(w.size() == static_cast<std::size_t>(window_count(400)));
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(w[i](3, 0) == 3000 + 51.0 * static_cast<double>(i));
  CHECK(segment(Eigen::MatrixXd::Zero(10, 150)).empty());
}

TEST_CASE("filter-then-segment equals slicing the filtered recording") {
  Rng rng(9);
  Recording r;
  r.participant_id = 2;
  r.cycle_id = 5;
  r.gesture_id = 3;
  r.samples.resize(10, 700);
  for (Eigen::Index i = 0; i < r.samples.size(); ++i) r.samples.data()[i] = rng.normal(0.0, 40.0);
  const auto windows = preprocess(r);
  const ButterworthBandpass filter(FilterSpec{});
  const Eigen::MatrixXd filtered = filter.apply_rows(r.samples);
  REQUIRE(windows.size() == static_cast<std::size_t>(window_count(700)));
  for (std::size_t i = 0; i < windows.size(); ++i) {
    CHECK(windows[i].participant_id == 2);
    CHECK(windows[i].gesture_id == 3);
    CHECK(windows[i].window_index == static_cast<int>(i));
    CHECK((windows[i].data - filtered.middleCols(static_cast<Eigen::Index>(51 * i), 151)).cwiseAbs().maxCoeff() == 0.0);
  }
  const auto alt = preprocess(r, {}, PreprocessOrder::SegmentThenFilter);
  CHECK(alt.size() == windows.size());
  CHECK((alt[1].data - windows[1].data).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("recording CSV round trip and errors") {
  const auto dir = temp_dir("dataio_csv");
  CHECK(load_recordings(dir).empty());
  Recording r;
  r.participant_id = 4;
  r.cycle_id = 2;
  r.gesture_id = 10;
  r.samples = Eigen::MatrixXd::Random(10, 160) * 100.0;
  write_recordings(std::span(&r, 1), dir);
  CHECK(fs::exists(dir / recording_file_name(4, 2, 10)));
  const auto loaded = load_recordings(dir);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].gesture_id == 10);
  CHECK((loaded[0].samples - r.samples).cwiseAbs().maxCoeff() < 1e-9);

  const auto bad = dir / "p1_c1_g0.csv";
  {
    std::ofstream out(bad);
    for (int i = 0; i < 3; ++i) out << "1,2,3,4,5,6,7,8,9\n";
  }
  try {
    load_recording_csv(bad);
    FAIL("expected a load error");
  } catch (const LoadError& e) {
    CHECK(std::string(e.what()).find("expected 10 channels") != std::string::npos);
    CHECK(std::string(e.what()).find("p1_c1_g0.csv:1") != std::string::npos);
  }
  {
    std::ofstream out(bad);
    out << "1,2,3,4,5,6,7,8,9,x\n";
  }
  CHECK_THROWS_WITH_AS(load_recording_csv(bad), doctest::Contains("non-numeric"), LoadError);
  fs::remove_all(dir);
}

TEST_CASE("window block round trip") {
  const auto dir = temp_dir("dataio_windows");
  Rng rng(1);
  auto windows = oracle::noise_windows(5, 3, rng);
  write_windows(windows, dir / "w.bin", dir / "w.json");
  const auto back = read_windows(dir / "w.bin", dir / "w.json");
  REQUIRE(back.size() == windows.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].gesture_id == windows[i].gesture_id);
    CHECK(back[i].participant_id == windows[i].participant_id);
    CHECK((back[i].data - windows[i].data.cast<float>().cast<double>()).cwiseAbs().maxCoeff() == 0.0);
  }
  fs::remove_all(dir);
}

TEST_CASE("synthetic generator") {
  CHECK_THROWS_AS(synth_generate(1, 5, 1), ConfigError);
  const auto a = synth_generate(4, 5, 11);
  const auto b = synth_generate(4, 5, 11);
  REQUIRE(a.size() == 4u * 8u * 5u);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK((a[i].samples.array() == b[i].samples.array()).all());
  const auto c = synth_generate(4, 5, 12);
  CHECK((a[0].samples.array() != c[0].samples.array()).any());
}

TEST_CASE("synthetic classes are separable within a domain by MAV") {
  const auto windows = preprocess_all(synth_generate(4, 5, 7));
  double total = 0.0;
  for (int p = 1; p <= 4; ++p) {
    std::vector<Window> train, test;
    for (const auto& w : windows) {
      if (w.participant_id != p) continue;
      (is_training_cycle(w.cycle_id) ? train : test).push_back(w);
    }
    const auto rows_of = [](const std::vector<Window>& ws) {
      Eigen::MatrixXd x(static_cast<Eigen::Index>(ws.size()), 10);
      for (std::size_t i = 0; i < ws.size(); ++i)
        for (int c = 0; c < 10; ++c) x(static_cast<Eigen::Index>(i), c) = ws[i].data.row(c).cwiseAbs().mean();
      return x;
    };
    const auto ytr = evaluate::window_labels(train), yte = evaluate::window_labels(test);
    const auto model = evaluate::lda_fit(rows_of(train), ytr);
    total += evaluate::accuracy(yte, evaluate::lda_predict(model, rows_of(test)));
  }
  CHECK(total / 4.0 >= 0.8);
}
