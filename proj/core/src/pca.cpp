#include <Eigen/Eigenvalues>

#include "myofeat/error.hpp"
#include "myofeat/mapper.hpp"

namespace myofeat::mapper {

PcaResult pca_reduce(const Eigen::MatrixXd& points, double variance_target) {
  const Eigen::Index m = points.rows();
  if (m < 2) throw ConfigError("PCA needs at least 2 points");
  if (!(variance_target > 0.0 && variance_target <= 1.0)) {
    throw ConfigError("variance target must be in (0, 1]");
  }
  const Eigen::MatrixXd centred = points.rowwise() - points.colwise().mean();
  // The Gram matrix is M x M, which is small next to the column count here.
  const Eigen::MatrixXd gram = centred * centred.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) throw NumericError("PCA eigendecomposition failed");
  const Eigen::VectorXd values = eig.eigenvalues().reverse().cwiseMax(0.0);
  const Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
  const double total = values.sum();
  if (!(total > 1e-24 * (1.0 + points.squaredNorm()))) {
    throw NumericError("degenerate cloud: zero total variance");
  }
  PcaResult out;
  out.explained = values / total;
  const Eigen::Index max_z = m - 1;
  double cum = 0.0;
  int z = 0;
  while (z < max_z) {
    cum += out.explained[z];
    ++z;
    if (cum >= variance_target - 1e-12) break;
  }
  out.components = z;
  // Scores of the Gram eigenvectors: u_i * sqrt(lambda_i).
  out.scores = vectors.leftCols(z) * values.head(z).cwiseSqrt().asDiagonal();
  // Sign convention: the largest-magnitude score of each component is positive.
  for (int j = 0; j < z; ++j) {
    Eigen::Index arg = 0;
    out.scores.col(j).cwiseAbs().maxCoeff(&arg);
    if (out.scores(arg, j) < 0.0) out.scores.col(j) *= -1.0;
  }
  return out;
}

}  // namespace myofeat::mapper
