#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "myofeat/error.hpp"
#include "myofeat/mapper.hpp"

namespace myofeat::mapper {

std::vector<Merge> ward_linkage(const Eigen::MatrixXd& points) {
  const auto n = static_cast<int>(points.rows());
  std::vector<Merge> merges;
  if (n < 2) return merges;
  // d holds squared Ward distances between active clusters; Lance-Williams
  // updates keep it exact for Ward's criterion.
  Eigen::MatrixXd d(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) d(i, j) = (points.row(i) - points.row(j)).squaredNorm();
  std::vector<int> size(static_cast<std::size_t>(n), 1);
  std::vector<int> id(static_cast<std::size_t>(n));
  std::iota(id.begin(), id.end(), 0);
  std::vector<bool> active(static_cast<std::size_t>(n), true);
  for (int step = 0; step < n - 1; ++step) {
    double best = std::numeric_limits<double>::infinity();
    int bi = -1, bj = -1;
    for (int i = 0; i < n; ++i) {
      if (!active[static_cast<std::size_t>(i)]) continue;
      for (int j = i + 1; j < n; ++j) {
        if (active[static_cast<std::size_t>(j)] && d(i, j) < best) {
          best = d(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    const int ni = size[static_cast<std::size_t>(bi)], nj = size[static_cast<std::size_t>(bj)];
    for (int k = 0; k < n; ++k) {
      if (!active[static_cast<std::size_t>(k)] || k == bi || k == bj) continue;
      const double nk = size[static_cast<std::size_t>(k)];
      const double v = ((ni + nk) * d(k, bi) + (nj + nk) * d(k, bj) - nk * d(bi, bj)) / (ni + nj + nk);
      d(k, bi) = d(bi, k) = v;
    }
    const int a = std::min(id[static_cast<std::size_t>(bi)], id[static_cast<std::size_t>(bj)]);
    const int b = std::max(id[static_cast<std::size_t>(bi)], id[static_cast<std::size_t>(bj)]);
    merges.push_back({a, b, std::sqrt(std::max(0.0, best)), ni + nj});
    active[static_cast<std::size_t>(bj)] = false;
    size[static_cast<std::size_t>(bi)] = ni + nj;
    id[static_cast<std::size_t>(bi)] = n + step;
  }
  return merges;
}

std::vector<int> cut_first_gap(std::span<const Merge> merges, int n, int bins) {
  if (bins < 1) throw ConfigError("gap histogram needs at least one bin");
  if (n < 0 || static_cast<std::size_t>(std::max(0, n - 1)) != merges.size()) {
    throw ConfigError("merge list does not match the point count");
  }
  double threshold = std::numeric_limits<double>::infinity();
  if (!merges.empty()) {
    double lo = merges.front().height, hi = lo;
    for (const auto& m : merges) {
      lo = std::min(lo, m.height);
      hi = std::max(hi, m.height);
    }
    if (hi > lo) {
      const double width = (hi - lo) / bins;
      std::vector<int> counts(static_cast<std::size_t>(bins), 0);
      for (const auto& m : merges) {
        const int b = std::min(bins - 1, static_cast<int>((m.height - lo) / width));
        ++counts[static_cast<std::size_t>(b)];
      }
      for (int b = 0; b < bins; ++b) {
        if (counts[static_cast<std::size_t>(b)] == 0) {
          threshold = lo + b * width;
          break;
        }
      }
    }
  }
  // Union-find over the merges that fall below the threshold.
  std::vector<int> parent(static_cast<std::size_t>(2 * std::max(n, 1)));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  for (std::size_t s = 0; s < merges.size(); ++s) {
    const int node = n + static_cast<int>(s);
    if (merges[s].height < threshold) {
      parent[static_cast<std::size_t>(find(merges[s].a))] = node;
      parent[static_cast<std::size_t>(find(merges[s].b))] = node;
    }
  }
  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  std::vector<int> root_label(parent.size(), -1);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    const int r = find(i);
    if (root_label[static_cast<std::size_t>(r)] < 0) root_label[static_cast<std::size_t>(r)] = next++;
    labels[static_cast<std::size_t>(i)] = root_label[static_cast<std::size_t>(r)];
  }
  return labels;
}

std::vector<std::vector<int>> cluster_region(const Eigen::MatrixXd& space, std::span<const int> members,
                                             int bins) {
  std::vector<std::vector<int>> clusters;
  if (members.empty()) return clusters;
  Eigen::MatrixXd sub(static_cast<Eigen::Index>(members.size()), space.cols());
  for (std::size_t i = 0; i < members.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = space.row(members[i]);
  const auto merges = ward_linkage(sub);
  const auto labels = cut_first_gap(merges, static_cast<int>(members.size()), bins);
  const int count = *std::max_element(labels.begin(), labels.end()) + 1;
  clusters.resize(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < members.size(); ++i) clusters[static_cast<std::size_t>(labels[i])].push_back(members[i]);
  for (auto& c : clusters) std::sort(c.begin(), c.end());
  return clusters;
}

}  // namespace myofeat::mapper
