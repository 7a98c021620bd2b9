#include <algorithm>
#include <fstream>
#include <map>

#include <json.hpp>

#include "myofeat/error.hpp"
#include "myofeat/evaluate.hpp"

namespace myofeat::evaluate {

LdaModel lda_fit(const Eigen::MatrixXd& x, std::span<const int> y, double ridge) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw ConfigError("LDA needs one label per row");
  if (x.cols() < 1) throw ConfigError("LDA needs at least one input dimension");
  if (!x.allFinite()) throw NumericError("LDA inputs contain non-finite values");
  std::map<int, std::vector<Eigen::Index>> rows;
  for (std::size_t i = 0; i < y.size(); ++i) rows[y[i]].push_back(static_cast<Eigen::Index>(i));
  if (rows.size() < 2) throw ConfigError("LDA needs at least 2 classes");
  const auto d = x.cols();
  const auto k = static_cast<Eigen::Index>(rows.size());
  LdaModel model;
  model.means.resize(k, d);
  model.priors.resize(k);
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
  Eigen::Index c = 0;
  for (const auto& [label, idx] : rows) {
    if (idx.size() < 2) throw ConfigError("LDA class " + std::to_string(label) + " has fewer than 2 samples");
    model.classes.push_back(label);
    Eigen::MatrixXd block(static_cast<Eigen::Index>(idx.size()), d);
    for (std::size_t i = 0; i < idx.size(); ++i) block.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
    model.means.row(c) = block.colwise().mean();
    const Eigen::MatrixXd centred = block.rowwise() - model.means.row(c);
    scatter.noalias() += centred.transpose() * centred;
    model.priors[c] = static_cast<double>(idx.size()) / static_cast<double>(x.rows());
    ++c;
  }
  const auto dof = std::max<Eigen::Index>(1, x.rows() - k);
  model.covariance = scatter / static_cast<double>(dof);
  const double scale = model.covariance.trace() / static_cast<double>(d);
  // A constant input has zero trace; fall back to an absolute ridge.
  model.covariance.diagonal().array() += ridge * (scale > 0.0 ? scale : 1.0);
  const Eigen::LLT<Eigen::MatrixXd> llt(model.covariance);
  if (llt.info() != Eigen::Success) throw NumericError("LDA covariance is not positive definite");
  model.weights = llt.solve(model.means.transpose());
  model.bias.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    model.bias[j] = -0.5 * model.means.row(j).dot(model.weights.col(j)) + std::log(model.priors[j]);
  }
  return model;
}

Eigen::MatrixXd lda_scores(const LdaModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.dims()) {
    throw ConfigError("LDA expects " + std::to_string(model.dims()) + " inputs, got " + std::to_string(x.cols()));
  }
  return (x * model.weights).rowwise() + model.bias.transpose();
}

std::vector<int> lda_predict(const LdaModel& model, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd s = lda_scores(model, x);
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    // Classes are sorted, so a strict comparison keeps the lower id on ties.
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < s.cols(); ++j)
      if (s(i, j) > s(i, best)) best = j;
    out[static_cast<std::size_t>(i)] = model.classes[static_cast<std::size_t>(best)];
  }
  return out;
}

double ConfusionMatrix::accuracy() const {
  const long t = total();
  return t == 0 ? 0.0 : static_cast<double>(counts.trace()) / static_cast<double>(t);
}

Eigen::MatrixXd ConfusionMatrix::normalized() const {
  Eigen::MatrixXd out = counts.cast<double>();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double s = out.row(i).sum();
    if (s > 0.0) out.row(i) /= s;
  }
  return out;
}

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted, int classes) {
  if (truth.size() != predicted.size()) throw ConfigError("confusion matrix needs paired labels");
  if (classes < 1) throw ConfigError("confusion matrix needs at least one class");
  ConfusionMatrix cm;
  cm.counts = Eigen::MatrixXi::Zero(classes, classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= classes || predicted[i] < 0 || predicted[i] >= classes) {
      throw ConfigError("label outside 0.." + std::to_string(classes - 1));
    }
    ++cm.counts(truth[i], predicted[i]);
  }
  return cm;
}

double accuracy(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw ConfigError("accuracy needs paired labels");
  if (truth.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += truth[i] == predicted[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

void write_confusion_csv(const ConfusionMatrix& cm, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw LoadError(file.string() + ": cannot write");
  out << "true";
  for (int j = 0; j < cm.classes(); ++j) out << ",p" << j;
  out << '\n';
  for (int i = 0; i < cm.classes(); ++i) {
    out << i;
    for (int j = 0; j < cm.classes(); ++j) out << ',' << cm.counts(i, j);
    out << '\n';
  }
}

void write_confusion_json(const ConfusionMatrix& cm, const std::filesystem::path& file) {
  nlohmann::json counts = nlohmann::json::array();
  nlohmann::json normalized = nlohmann::json::array();
  const Eigen::MatrixXd norm = cm.normalized();
  for (int i = 0; i < cm.classes(); ++i) {
    nlohmann::json c = nlohmann::json::array();
    nlohmann::json n = nlohmann::json::array();
    for (int j = 0; j < cm.classes(); ++j) {
      c.push_back(cm.counts(i, j));
      n.push_back(norm(i, j));
    }
    counts.push_back(c);
    normalized.push_back(n);
  }
  const nlohmann::json doc = {
      {"classes", cm.classes()}, {"accuracy", cm.accuracy()}, {"counts", counts}, {"normalized", normalized}};
  std::ofstream out(file);
  if (!out) throw LoadError(file.string() + ": cannot write");
  out << doc.dump(1) << '\n';
}

}  // namespace myofeat::evaluate
