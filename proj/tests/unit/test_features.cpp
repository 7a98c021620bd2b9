#include <doctest.h>

#include <filesystem>
#include <map>

#include "myofeat/error.hpp"
#include "myofeat/features.hpp"
#include "oracles.hpp"

using namespace myofeat;
using namespace myofeat::features;

namespace {

std::vector<double> padded(std::initializer_list<double> head) {
  std::vector<double> x(head);
  x.resize(151, 0.0);
  return x;
}

double one(std::string_view method, std::span<const double> x, const FeatureConfig& cfg = {}) {
  return extract_method(method, x, cfg).at(0);
}

std::vector<double> random_channel(Rng& rng, double scale = 30.0) {
  std::vector<double> x(151);
  for (auto& v : x) v = rng.normal(0.0, scale);
  return x;
}

}  // namespace

TEST_CASE("registry counts") {
  const auto methods = method_registry();
  CHECK(methods.size() == 56);
  std::map<Group, int> per_group;
  int expanded = 0;
  for (const auto& m : methods) {
    ++per_group[m.group];
    expanded += m.outputs;
  }
  CHECK(per_group[Group::SAP] == 25);
  CHECK(per_group[Group::FI] == 5);
  CHECK(per_group[Group::NLC] == 6);
  CHECK(per_group[Group::TSM] == 7);
  CHECK(per_group[Group::UNI] == 13);
  CHECK(expanded == 79);
  const auto reg = feature_registry();
  CHECK(reg.size() == 79);
  const std::map<std::string, int> multi = {{"AR", 4},  {"CC", 4},  {"DAR", 4}, {"DCC", 4},
                                            {"HIST", 3}, {"MHW", 3}, {"MTW", 3}, {"TDPSD", 6}};
  int singles = 0;
  for (const auto& m : methods) {
    const auto it = multi.find(std::string(m.name));
    if (it == multi.end()) {
      CHECK(m.outputs == 1);
      ++singles;
    } else {
      CHECK(m.outputs == it->second);
    }
  }
  CHECK(singles == 48);
  CHECK(reg[0].id() == std::string(methods[0].name));
  CHECK_THROWS_AS(method_info("NOPE"), ConfigError);
}

TEST_CASE("descriptor ids") {
  int ar = 0;
  for (const auto& d : feature_registry()) {
    if (d.method == "AR") CHECK(d.id() == "AR" + std::to_string(++ar));
    if (d.method == "MAV") CHECK(d.id() == "MAV");
  }
  CHECK(ar == 4);
}

TEST_CASE("hand-computed amplitude features") {
  CHECK(one("MAV", padded({1, -1, 2, -2})) == doctest::Approx(6.0 / 151.0));
  CHECK(one("WL", padded({0, 1, 3, 2})) == doctest::Approx(6.0));
  CHECK(one("IEMG", padded({1, -1, 2, -2})) == doctest::Approx(6.0));
  std::vector<double> alt(151);
  for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = i % 2 == 0 ? 1.0 : -1.0;
  FeatureConfig zero;
  zero.zc_threshold = 0.0;
  zero.ssc_threshold = 0.0;
  CHECK(one("ZC", alt, zero) == 150.0);
  const std::vector<double> zeros(151, 0.0);
  CHECK(one("RMS", zeros) == 0.0);
  CHECK(one("SAMPEN", zeros) == 0.0);
  CHECK(one("APEN", zeros) == 0.0);
}

TEST_CASE("scale behaviour") {
  Rng rng(4);
  const auto x = random_channel(rng);
  std::vector<double> y(x.size());
  FeatureConfig zero;
  zero.zc_threshold = 0.0;
  zero.ssc_threshold = 0.0;
  for (double a : {2.5, -0.7}) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = a * x[i];
    for (const char* m : {"MAV", "RMS", "WL", "IEMG"}) CHECK(one(m, y) == doctest::Approx(std::abs(a) * one(m, x)));
  }
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = 3.0 * x[i];
  CHECK(one("ZC", y, zero) == one("ZC", x, zero));
  CHECK(one("SSC", y, zero) == one("SSC", x, zero));
}

TEST_CASE("difference identities") {
  Rng rng(5);
  const auto x = random_channel(rng);
  std::vector<double> d(x.size() - 1);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) d[i] = x[i + 1] - x[i];
  // The first difference has 150 samples, so compare with the plain formulas.
  double mav = 0.0, ss = 0.0;
  for (double v : d) {
    mav += std::abs(v);
    ss += v * v;
  }
  CHECK(one("DAMV", x) == doctest::Approx(mav / static_cast<double>(d.size())));
  CHECK(one("DVARV", x) == doctest::Approx(ss / static_cast<double>(d.size() - 1)));
  CHECK(one("VAR", d) == doctest::Approx(one("DVARV", x)));
  CHECK(one("MAV", d) == doctest::Approx(one("DAMV", x)));
  const auto dar = extract_method("DAR", x);
  const auto ar = extract_method("AR", d);
  for (std::size_t i = 0; i < 4; ++i) CHECK(dar[i] == doctest::Approx(ar[i]));
}

TEST_CASE("histogram conserves samples") {
  Rng rng(6);
  for (int k = 0; k < 20; ++k) {
    auto x = random_channel(rng);
    x[7] = 1e4;  // an outlier beyond three standard deviations
    const auto h = extract_method("HIST", x);
    CHECK(h[0] + h[1] + h[2] == 151.0);
  }
}

TEST_CASE("AR(4) recovers an AR(2) process") {
  Rng rng(8);
  double a1 = 0.0, a2 = 0.0;
  for (int w = 0; w < 100; ++w) {
    std::vector<double> x(151 + 200, 0.0);
    for (std::size_t t = 2; t < x.size(); ++t) x[t] = 0.5 * x[t - 1] - 0.3 * x[t - 2] + rng.normal();
    const std::vector<double> win(x.end() - 151, x.end());
    const auto c = extract_method("AR", win);
    a1 += c[0] / 100.0;
    a2 += c[1] / 100.0;
  }
  CHECK(std::abs(a1 - 0.5) <= 0.1);
  CHECK(std::abs(a2 + 0.3) <= 0.1);
}

TEST_CASE("every descriptor is finite on random and degenerate windows") {
  Rng rng(10);
  for (int k = 0; k < 1000; ++k) {
    const double scale = std::pow(10.0, rng.uniform(-2.0, 3.0));
    const auto x = random_channel(rng, scale);
    const auto f = extract_channel(x);
    REQUIRE(f.size() == 79);
    for (double v : f) REQUIRE(std::isfinite(v));
  }
  for (double c : {0.0, 5.0, -2.0}) {
    const std::vector<double> x(151, c);
    for (double v : extract_channel(x)) CHECK(std::isfinite(v));
  }
}

TEST_CASE("point cloud layout") {
  Rng rng(12);
  const auto windows = oracle::noise_windows(3, 2, rng);
  const auto cloud = extract_all(std::span(windows).first(1));
  CHECK(cloud.points() == 79);
  CHECK(cloud.dims() == 10);
  const auto three = extract_all(windows);
  CHECK(three.dims() == 30);
  CHECK(three.column_labels[12] == std::pair{1, 2});
  std::vector<double> row(151);
  for (int t = 0; t < 151; ++t) row[static_cast<std::size_t>(t)] = windows[1].data(2, t);
  const auto f = extract_channel(row);
  for (int r = 0; r < 79; ++r) CHECK(three.values(r, 12) == doctest::Approx(f[static_cast<std::size_t>(r)]));
  CHECK(three.row_groups.front() == "SAP");
  CHECK(three.row_groups.back() == "UNI");
}

TEST_CASE("constant windows give constant SAP rows") {
  std::vector<dataio::Window> windows(4);
  for (auto& w : windows) w.data = Eigen::MatrixXd::Constant(10, 151, 3.0);
  const auto cloud = extract_all(windows);
  for (Eigen::Index r = 0; r < cloud.points(); ++r) {
    if (cloud.row_groups[static_cast<std::size_t>(r)] != "SAP") continue;
    CHECK(cloud.values.row(r).maxCoeff() == cloud.values.row(r).minCoeff());
  }
}

TEST_CASE("standardisation, selection and concatenation") {
  Rng rng(13);
  const auto windows = oracle::noise_windows(6, 2, rng);
  const auto cloud = extract_all(windows);
  const auto z = cloud.standardized();
  for (Eigen::Index r = 0; r < z.points(); ++r) {
    const double m = z.values.row(r).mean();
    CHECK(std::abs(m) < 1e-9);
    const double var = (z.values.row(r).array() - m).square().mean();
    CHECK((var == doctest::Approx(1.0).epsilon(1e-9) || var == 0.0));
  }
  const std::vector<int> rows = {0, 5};
  const auto sel = cloud.select_rows(rows);
  CHECK(sel.points() == 2);
  CHECK(sel.row_labels[1] == cloud.row_labels[5]);
  const auto both = FeaturePointCloud::concat(cloud, sel);
  CHECK(both.points() == 81);
  CHECK_THROWS_AS(FeaturePointCloud::concat(cloud, extract_all(std::span(windows).first(2))), ConfigError);
}

TEST_CASE("cloud CSV round trip") {
  Rng rng(14);
  const auto windows = oracle::noise_windows(2, 2, rng);
  const auto cloud = extract_all(windows);
  const auto file = std::filesystem::temp_directory_path() / "myofeat_cloud.csv";
  write_cloud_csv(cloud, file);
  const auto back = read_cloud_csv(file);
  CHECK(back.row_labels == cloud.row_labels);
  CHECK(back.row_groups == cloud.row_groups);
  CHECK(back.column_labels == cloud.column_labels);
  CHECK((back.values - cloud.values).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + cloud.values.cwiseAbs().maxCoeff()));
  std::filesystem::remove(file);
}
