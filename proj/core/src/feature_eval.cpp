#include <cmath>
#include <fstream>
#include <functional>
#include <map>

#include <Eigen/Eigenvalues>

#include "myofeat/error.hpp"
#include "myofeat/evaluate.hpp"
#include "myofeat/parallel.hpp"

namespace myofeat::evaluate {

namespace {

int cloud_channels(const features::FeaturePointCloud& cloud) {
  int c = 0;
  for (const auto& [w, ch] : cloud.column_labels) c = std::max(c, ch + 1);
  return c > 0 ? c : dataio::kChannels;
}

FeatureScore score_rows(const features::FeaturePointCloud& train, std::span<const int> train_labels,
                        const features::FeaturePointCloud& test, std::span<const int> test_labels,
                        std::span<const int> rows, std::string id, std::string group, int classes) {
  const Eigen::MatrixXd xtr = cloud_inputs(train, rows);
  const Eigen::MatrixXd xte = cloud_inputs(test, rows);
  const auto model = lda_fit(xtr, train_labels);
  const auto predicted = lda_predict(model, xte);
  FeatureScore s;
  s.id = std::move(id);
  s.group = std::move(group);
  s.dims = static_cast<int>(xtr.cols());
  s.confusion = confusion_matrix(test_labels, predicted, classes);
  s.accuracy = s.confusion.accuracy();
  return s;
}

}  // namespace

Eigen::MatrixXd cloud_inputs(const features::FeaturePointCloud& cloud, std::span<const int> rows) {
  if (rows.empty()) throw ConfigError("feature subset is empty");
  const int c = cloud_channels(cloud);
  if (cloud.dims() % c != 0) throw ConfigError("cloud columns are not a whole number of windows");
  const Eigen::Index n = cloud.dims() / c;
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(rows.size()) * c);
  for (std::size_t f = 0; f < rows.size(); ++f) {
    if (rows[f] < 0 || rows[f] >= cloud.points()) throw ConfigError("feature row out of range");
    for (Eigen::Index w = 0; w < n; ++w)
      for (int ch = 0; ch < c; ++ch) x(w, static_cast<Eigen::Index>(f) * c + ch) = cloud.values(rows[f], w * c + ch);
  }
  return x;
}

std::vector<int> window_labels(std::span<const dataio::Window> windows) {
  std::vector<int> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(w.gesture_id);
  return out;
}

FeatureEvalReport feature_eval(const features::FeaturePointCloud& train, std::span<const int> train_labels,
                               const features::FeaturePointCloud& test, std::span<const int> test_labels,
                               std::span<const int> rows, EvalMode mode, int classes) {
  if (rows.empty()) throw ConfigError("feature subset is empty");
  if (train.points() != test.points()) throw ConfigError("train and test clouds have different rows");
  const int c = cloud_channels(train);
  if (static_cast<std::size_t>(train.dims()) != train_labels.size() * static_cast<std::size_t>(c) ||
      static_cast<std::size_t>(test.dims()) != test_labels.size() * static_cast<std::size_t>(c)) {
    throw ConfigError("labels do not match the cloud columns");
  }
  FeatureEvalReport report;
  std::vector<std::string> order;
  std::map<std::string, std::vector<int>> members;
  for (int r : rows) {
    if (r < 0 || r >= train.points()) throw ConfigError("feature row out of range");
    const auto& g = train.row_groups[static_cast<std::size_t>(r)];
    if (!members.contains(g)) order.push_back(g);
    members[g].push_back(r);
  }
  if (mode != EvalMode::Group) {
    report.singles.resize(rows.size());
    parallel_for(rows.size(), [&](std::size_t i) {
      const int r = rows[i];
      const int one[] = {r};
      report.singles[i] = score_rows(train, train_labels, test, test_labels, one,
                                     train.row_labels[static_cast<std::size_t>(r)],
                                     train.row_groups[static_cast<std::size_t>(r)], classes);
    });
  }
  if (mode != EvalMode::Single) {
    report.groups.resize(order.size());
    parallel_for(order.size(), [&](std::size_t i) {
      report.groups[i] = score_rows(train, train_labels, test, test_labels, members[order[i]], order[i],
                                    order[i], classes);
    });
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    GroupSummary s;
    s.group = order[i];
    s.features = static_cast<int>(members[order[i]].size());
    std::vector<double> acc;
    for (const auto& f : report.singles)
      if (f.group == s.group) acc.push_back(f.accuracy);
    if (!acc.empty()) {
      double sum = 0.0;
      for (double a : acc) sum += a;
      s.single_mean = sum / static_cast<double>(acc.size());
      double ss = 0.0;
      for (double a : acc) ss += (a - s.single_mean) * (a - s.single_mean);
      s.single_sd = acc.size() > 1 ? std::sqrt(ss / static_cast<double>(acc.size() - 1)) : 0.0;
    }
    if (!report.groups.empty()) s.group_accuracy = report.groups[i].accuracy;
    report.summary.push_back(s);
  }
  return report;
}

FeatureEvalReport feature_eval(const features::FeaturePointCloud& train, std::span<const int> train_labels,
                               const features::FeaturePointCloud& test, std::span<const int> test_labels,
                               EvalMode mode, int classes) {
  std::vector<int> rows(static_cast<std::size_t>(train.points()));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
  return feature_eval(train, train_labels, test, test_labels, rows, mode, classes);
}

// --- Learned map summaries -----------------------------------------------------

namespace {

using ChunkFn = std::function<void(std::span<const std::size_t>, const convnet::Tape<float>&)>;

// Runs the model over windows grouped by the statistics set they use; fn sees
// the original indices of the windows in each chunk.
void visit_by_domain(const convnet::ConvNet<float>& model, std::span<const dataio::Window> windows, int chunk,
                     const ChunkFn& fn) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const int p = windows[i].participant_id;
    groups[model.has_stats(p) ? p : convnet::kSharedDomain].push_back(i);
  }
  for (const auto& [domain, idx] : groups) {
    std::vector<dataio::Window> subset;
    subset.reserve(idx.size());
    for (auto i : idx) subset.push_back(windows[i]);
    convnet::for_each_chunk<float>(model, subset, domain, chunk,
                                   [&](std::size_t first, const convnet::Tape<float>& tape) {
                                     fn(std::span(idx).subspan(first, static_cast<std::size_t>(tape.batch)), tape);
                                   });
  }
}

// Series of map m in a block activation as an L x S matrix, one column per
// (window, channel) sample.
Eigen::MatrixXd map_series(const convnet::Mat<float>& act, int m, int len) {
  const Eigen::Index s = act.cols() / len;
  Eigen::MatrixXd out(len, s);
  for (Eigen::Index j = 0; j < s; ++j)
    for (int t = 0; t < len; ++t) out(t, j) = act(m, j * len + t);
  return out;
}

features::FeaturePointCloud empty_cloud(const convnet::Architecture& arch, std::size_t windows) {
  features::FeaturePointCloud cloud;
  cloud.values.resize(arch.blocks * arch.maps, static_cast<Eigen::Index>(windows) * arch.channels);
  for (int b = 1; b <= arch.blocks; ++b) {
    for (int m = 0; m < arch.maps; ++m) {
      cloud.row_labels.push_back("B" + std::to_string(b) + "M" + std::to_string(m));
      cloud.row_groups.push_back("B" + std::to_string(b));
    }
  }
  for (std::size_t n = 0; n < windows; ++n)
    for (int ch = 0; ch < arch.channels; ++ch) cloud.column_labels.emplace_back(static_cast<int>(n), ch);
  return cloud;
}

}  // namespace

LearnedClouds learned_pc1_clouds(const convnet::ConvNet<float>& model, std::span<const dataio::Window> train,
                                 std::span<const dataio::Window> test, int chunk) {
  if (train.empty() || test.empty()) throw ConfigError("learned feature evaluation needs train and test windows");
  const auto& arch = model.arch();
  const auto rows = static_cast<std::size_t>(arch.blocks * arch.maps);
  std::vector<Eigen::VectorXd> sum(rows);
  std::vector<Eigen::MatrixXd> gram(rows);
  for (int b = 1; b <= arch.blocks; ++b) {
    const int len = arch.block_length(b);
    for (int m = 0; m < arch.maps; ++m) {
      const auto r = static_cast<std::size_t>((b - 1) * arch.maps + m);
      sum[r] = Eigen::VectorXd::Zero(len);
      gram[r] = Eigen::MatrixXd::Zero(len, len);
    }
  }
  double samples = 0.0;
  visit_by_domain(model, train, chunk, [&](std::span<const std::size_t>, const convnet::Tape<float>& tape) {
    for (int b = 1; b <= arch.blocks; ++b) {
      const int len = arch.block_length(b);
      const auto& act = tape.act[static_cast<std::size_t>(b)];
      for (int m = 0; m < arch.maps; ++m) {
        const auto r = static_cast<std::size_t>((b - 1) * arch.maps + m);
        const Eigen::MatrixXd x = map_series(act, m, len);
        sum[r] += x.rowwise().sum();
        gram[r].noalias() += x * x.transpose();
      }
    }
    samples += static_cast<double>(tape.batch) * arch.channels;
  });

  std::vector<Eigen::VectorXd> mean(rows), axis(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    mean[r] = sum[r] / samples;
    const Eigen::MatrixXd cov = gram[r] / samples - mean[r] * mean[r].transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericError("learned map PCA failed");
    Eigen::VectorXd v = eig.eigenvectors().col(cov.rows() - 1);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) v = -v;
    axis[r] = v;
  }

  auto project = [&](std::span<const dataio::Window> windows) {
    auto cloud = empty_cloud(arch, windows.size());
    visit_by_domain(model, windows, chunk, [&](std::span<const std::size_t> ids, const convnet::Tape<float>& tape) {
      for (int b = 1; b <= arch.blocks; ++b) {
        const int len = arch.block_length(b);
        const auto& act = tape.act[static_cast<std::size_t>(b)];
        for (int m = 0; m < arch.maps; ++m) {
          const auto r = static_cast<std::size_t>((b - 1) * arch.maps + m);
          const Eigen::VectorXd score =
              (map_series(act, m, len).colwise() - mean[r]).transpose() * axis[r];
          for (std::size_t w = 0; w < ids.size(); ++w)
            for (int ch = 0; ch < arch.channels; ++ch)
              cloud.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(ids[w]) * arch.channels + ch) =
                  score[static_cast<Eigen::Index>(w) * arch.channels + ch];
        }
      }
    });
    return cloud;
  };
  return {project(train), project(test)};
}

// --- Tables ------------------------------------------------------------------

void write_feature_scores_csv(const FeatureEvalReport& report, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw LoadError(file.string() + ": cannot write");
  out.precision(10);
  out << "feature,group,dims,accuracy\n";
  for (const auto& s : report.singles) out << s.id << ',' << s.group << ',' << s.dims << ',' << s.accuracy << '\n';
  for (const auto& s : report.groups) out << s.id << "*," << s.group << ',' << s.dims << ',' << s.accuracy << '\n';
}

void write_summary_csv(const FeatureEvalReport& report, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw LoadError(file.string() + ": cannot write");
  out.precision(6);
  out << std::fixed << "group,features,single_mean,single_sd,group_accuracy\n";
  for (const auto& s : report.summary) {
    out << s.group << ',' << s.features << ',' << 100.0 * s.single_mean << ',' << 100.0 * s.single_sd << ','
        << 100.0 * s.group_accuracy << '\n';
  }
}

}  // namespace myofeat::evaluate
