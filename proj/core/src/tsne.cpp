#include <cmath>
#include <limits>

#include "myofeat/error.hpp"
#include "myofeat/mapper.hpp"
#include "myofeat/parallel.hpp"
#include "myofeat/rng.hpp"

namespace myofeat::mapper {

namespace {

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x) {
  const Eigen::VectorXd sq = x.rowwise().squaredNorm();
  Eigen::MatrixXd d = (-2.0 * x * x.transpose()).colwise() + sq;
  d.rowwise() += sq.transpose();
  d = d.cwiseMax(0.0);
  d.diagonal().setZero();
  return d;
}

}  // namespace

Eigen::MatrixXd tsne_affinities(const Eigen::MatrixXd& points, double perplexity) {
  const Eigen::Index m = points.rows();
  if (!(perplexity > 0.0)) throw ConfigError("perplexity must be positive");
  const Eigen::MatrixXd d = squared_distances(points);
  const double target = std::log(perplexity);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(m, m);
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t ui) {
    const auto i = static_cast<Eigen::Index>(ui);
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    // Distances are shifted by the nearest neighbour so exp() never underflows
    // to an all-zero row; the shift cancels in the normalisation.
    double dmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < m; ++j)
      if (j != i) dmin = std::min(dmin, d(i, j));
    Eigen::VectorXd row(m);
    for (int iter = 0; iter < 200; ++iter) {
      double sum = 0.0, weighted = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        const double v = j == i ? 0.0 : std::exp(-(d(i, j) - dmin) * beta);
        row[j] = v;
        sum += v;
        weighted += v * (d(i, j) - dmin);
      }
      const double entropy = std::log(sum) + beta * weighted / sum;
      row /= sum;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0.0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
    }
    p.row(i) = row.transpose();
  });
  // eval() avoids the aliasing of p with its own transpose.
  Eigen::MatrixXd joint = ((p + p.transpose()) / (2.0 * static_cast<double>(m))).eval();
  joint = joint.cwiseMax(1e-12 / static_cast<double>(m * m));
  joint.diagonal().setZero();
  return joint;
}

double tsne_kl(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y) {
  const Eigen::Index m = y.rows();
  const Eigen::MatrixXd d = squared_distances(y);
  double z = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (i != j) z += 1.0 / (1.0 + d(i, j));
  double kl = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i == j || p(i, j) <= 0.0) continue;
      const double q = 1.0 / (1.0 + d(i, j)) / z;
      kl += p(i, j) * std::log(p(i, j) / q);
    }
  }
  return kl;
}

namespace {

// 4 * sum_j (p_ij - mass * q_ij) (y_i - y_j) / (1 + |y_i - y_j|^2). With mass
// equal to the total of p this is the exact KL gradient; the optimiser uses
// mass 1 so that early exaggeration follows the usual (alpha*p - q) form.
Eigen::MatrixXd kl_gradient(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y, double mass) {
  const Eigen::MatrixXd d = squared_distances(y);
  Eigen::MatrixXd num = (1.0 + d.array()).inverse().matrix();
  num.diagonal().setZero();
  const double z = num.sum();
  Eigen::MatrixXd w = (p - (mass / z) * num).cwiseProduct(num);
  w.diagonal().setZero();
  const Eigen::VectorXd row_sum = w.rowwise().sum();
  return 4.0 * (row_sum.asDiagonal() * y - w * y);
}

}  // namespace

Eigen::MatrixXd tsne_kl_gradient(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y) {
  return kl_gradient(p, y, p.sum() - p.diagonal().sum());
}

Lens tsne_embed(const Eigen::MatrixXd& points, const TsneConfig& config) {
  const Eigen::Index m = points.rows();
  if (m < 5) throw ConfigError("t-SNE needs at least 5 points");
  const double bound = static_cast<double>(m - 1) / 3.0;
  if (!(config.perplexity < bound)) {
    throw ConfigError("perplexity " + std::to_string(config.perplexity) + " too large for " +
                      std::to_string(m) + " points; must be < (M-1)/3 = " + std::to_string(bound));
  }
  if (config.iterations < 1) throw ConfigError("t-SNE needs at least one iteration");
  const Eigen::MatrixXd p = tsne_affinities(points, config.perplexity);

  Rng rng(config.seed);
  Eigen::MatrixXd y(m, 2);
  for (Eigen::Index i = 0; i < m; ++i)
    for (int c = 0; c < 2; ++c) y(i, c) = rng.normal(0.0, config.init_stddev);
  Eigen::MatrixXd update = Eigen::MatrixXd::Zero(m, 2);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(m, 2);
  const Eigen::MatrixXd p_exaggerated = p * config.exaggeration;

  for (int it = 0; it < config.iterations; ++it) {
    const bool early = it < config.exaggeration_iterations;
    const Eigen::MatrixXd grad = kl_gradient(early ? p_exaggerated : p, y, 1.0);
    const double momentum = it < config.momentum_switch ? config.momentum_initial : config.momentum_final;
    for (Eigen::Index i = 0; i < grad.size(); ++i) {
      double& g = gains.data()[i];
      const bool same_sign = (grad.data()[i] > 0.0) == (update.data()[i] > 0.0);
      g = same_sign ? g * 0.8 : g + 0.2;
      g = std::max(g, config.min_gain);
      update.data()[i] = momentum * update.data()[i] - config.learning_rate * g * grad.data()[i];
    }
    y += update;
    y.rowwise() -= y.colwise().mean();
    if (!y.allFinite()) throw NumericError("t-SNE diverged");
  }
  return {y, tsne_kl(p, y)};
}

}  // namespace myofeat::mapper
