#pragma once

// Reference implementations used only by the tests. They are written from
// the textbook definitions and share no code with the library.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "myofeat/convnet.hpp"
#include "myofeat/dataio.hpp"
#include "myofeat/rng.hpp"

namespace oracle {

/// Central finite difference of f at x along coordinate i.
inline double central_difference(const std::function<double()>& f, double& x, double h) {
  const double keep = x;
  x = keep + h;
  const double up = f();
  x = keep - h;
  const double down = f();
  x = keep;
  return (up - down) / (2.0 * h);
}

/// |a - b| / max(|a|, |b|, floor).
inline double relative_error(double a, double b, double floor = 1e-7) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Digital Butterworth band-pass magnitude through the bilinear transform
/// with prewarped edges: |H| = 1 / sqrt(1 + ((W^2 - W0^2) / (W * B))^(2N)).
inline double butterworth_bandpass_gain(double hz, double low, double high, int order, double fs) {
  const auto warp = [fs](double f) { return std::tan(std::numbers::pi * f / fs); };
  const double w = warp(hz), wl = warp(low), wh = warp(high);
  const double x = (w * w - wl * wh) / (w * (wh - wl));
  return 1.0 / std::sqrt(1.0 + std::pow(x * x, order));
}

/// Two-sided signed-rank p-value by enumerating every sign assignment of
/// the given positive ranks; w_plus is the observed sum of positive ranks.
inline double wilcoxon_brute_force(const std::vector<double>& ranks, double w_plus) {
  const int n = static_cast<int>(ranks.size());
  const long total = 1L << n;
  long lower = 0, upper = 0;
  for (long mask = 0; mask < total; ++mask) {
    double w = 0.0;
    for (int i = 0; i < n; ++i)
      if (mask & (1L << i)) w += ranks[static_cast<std::size_t>(i)];
    if (w <= w_plus + 1e-9) ++lower;
    if (w >= w_plus - 1e-9) ++upper;
  }
  return std::min(1.0, 2.0 * static_cast<double>(std::min(lower, upper)) / static_cast<double>(total));
}

/// Naive Ward agglomeration: at each step recompute the merge cost of every
/// pair of clusters from their centroids, sqrt(2 na nb / (na + nb)) |ma - mb|.
struct NaiveMerge {
  std::vector<int> members;
  double height;
};

inline std::vector<NaiveMerge> ward_naive(const Eigen::MatrixXd& x) {
  std::vector<std::vector<int>> clusters;
  for (int i = 0; i < x.rows(); ++i) clusters.push_back({i});
  std::vector<NaiveMerge> out;
  auto centroid = [&](const std::vector<int>& c) {
    Eigen::RowVectorXd m = Eigen::RowVectorXd::Zero(x.cols());
    for (int i : c) m += x.row(i);
    return Eigen::RowVectorXd(m / static_cast<double>(c.size()));
  };
  while (clusters.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        const double na = static_cast<double>(clusters[i].size()), nb = static_cast<double>(clusters[j].size());
        const double cost = std::sqrt(2.0 * na * nb / (na + nb)) * (centroid(clusters[i]) - centroid(clusters[j])).norm();
        if (cost < best) {
          best = cost;
          bi = i;
          bj = j;
        }
      }
    }
    auto merged = clusters[bi];
    merged.insert(merged.end(), clusters[bj].begin(), clusters[bj].end());
    std::sort(merged.begin(), merged.end());
    out.push_back({merged, best});
    clusters.erase(clusters.begin() + static_cast<long>(bj));
    clusters[bi] = merged;
  }
  return out;
}

/// Euclidean silhouette averaged over points with integer labels.
inline double silhouette(const Eigen::MatrixXd& x, const std::vector<int>& labels) {
  const int n = static_cast<int>(x.rows());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double own = 0.0, other = std::numeric_limits<double>::infinity();
    std::vector<double> sum(16, 0.0);
    std::vector<int> count(16, 0);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      sum[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])] += (x.row(i) - x.row(j)).norm();
      ++count[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])];
    }
    const auto li = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
    own = count[li] > 0 ? sum[li] / count[li] : 0.0;
    for (std::size_t l = 0; l < sum.size(); ++l)
      if (l != li && count[l] > 0) other = std::min(other, sum[l] / count[l]);
    total += (other - own) / std::max(own, other);
  }
  return total / n;
}

/// Small architecture whose every layer is exercised in a few milliseconds.
inline myofeat::convnet::Architecture tiny_arch() {
  myofeat::convnet::Architecture a;
  a.channels = 3;
  a.length = 14;
  a.maps = 3;
  a.kernel = 4;
  a.blocks = 3;
  a.gestures = 4;
  return a;
}

/// Random input in the forward-pass layout.
template <class T>
myofeat::convnet::Mat<T> random_input(const myofeat::convnet::Architecture& a, int batch, myofeat::Rng& rng,
                                      double scale = 1.0) {
  myofeat::convnet::Mat<T> x(1, batch * a.channels * a.length);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(0, i) = static_cast<T>(rng.normal(0.0, scale));
  return x;
}

/// Windows of Gaussian noise with labels cycling over classes.
inline std::vector<myofeat::dataio::Window> noise_windows(int n, int classes, myofeat::Rng& rng) {
  std::vector<myofeat::dataio::Window> out;
  for (int i = 0; i < n; ++i) {
    myofeat::dataio::Window w;
    w.data.resize(myofeat::dataio::kChannels, myofeat::dataio::kWindowLength);
    for (Eigen::Index k = 0; k < w.data.size(); ++k) w.data.data()[k] = rng.normal(0.0, 50.0);
    w.gesture_id = i % classes;
    w.participant_id = 1 + i % 2;
    w.cycle_id = 1 + i % 8;
    w.window_index = i;
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace oracle
