#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "myofeat/error.hpp"
#include "myofeat/mapper.hpp"
#include "myofeat/parallel.hpp"

namespace myofeat::mapper {

// --- Cover -------------------------------------------------------------------

bool Cover::contains(std::size_t region, const Eigen::VectorXd& point) const {
  const auto& r = regions.at(region);
  for (Eigen::Index a = 0; a < point.size(); ++a) {
    const double v = point[a] - origin[a];
    if (v < r.lo[a] || v > r.hi[a]) return false;
  }
  return true;
}

std::vector<int> Cover::members(std::size_t region, const Eigen::MatrixXd& lens) const {
  std::vector<int> out;
  for (Eigen::Index i = 0; i < lens.rows(); ++i)
    if (contains(region, lens.row(i).transpose())) out.push_back(static_cast<int>(i));
  return out;
}

Cover build_cover(const Eigen::MatrixXd& lens, int k, double overlap, CoverMode mode) {
  if (lens.rows() < 1 || lens.cols() < 1) throw ConfigError("cover needs a nonempty lens");
  if (k < 1) throw ConfigError("cover needs k >= 1");
  if (!(overlap >= 0.0 && overlap < 1.0)) throw ConfigError("overlap must lie in [0, 1)");
  const auto w = lens.cols();
  Cover cover;
  cover.k = k;
  cover.overlap = overlap;
  cover.origin = lens.colwise().minCoeff().transpose();
  const Eigen::VectorXd range = lens.colwise().maxCoeff().transpose() - cover.origin;
  cover.inner_width.resize(w);
  cover.outer_width.resize(w);
  for (Eigen::Index a = 0; a < w; ++a) {
    // A flat axis still gets regions of positive width.
    const double r = range[a] > 0.0 ? range[a] : 1.0;
    cover.inner_width[a] = r / k;
    cover.outer_width[a] = cover.inner_width[a] / (1.0 - overlap);
  }
  const int per_axis = mode == CoverMode::CellCentred ? k : k + 1;
  std::vector<int> idx(static_cast<std::size_t>(w), 0);
  while (true) {
    Region region;
    region.index = idx;
    region.lo.resize(w);
    region.hi.resize(w);
    for (Eigen::Index a = 0; a < w; ++a) {
      const int i = idx[static_cast<std::size_t>(a)];
      const double h = cover.inner_width[a];
      const double centre = mode == CoverMode::CellCentred ? (i + 0.5) * h : i * h;
      double lo = centre - 0.5 * cover.outer_width[a];
      double hi = centre + 0.5 * cover.outer_width[a];
      if (i == 0) lo = std::min(lo, 0.0);
      if (i == per_axis - 1) hi = std::max(hi, range[a]);
      region.lo[a] = lo;
      region.hi[a] = hi;
    }
    cover.regions.push_back(std::move(region));
    // Odometer over the grid, first axis fastest.
    Eigen::Index a = 0;
    while (a < w && ++idx[static_cast<std::size_t>(a)] == per_axis) idx[static_cast<std::size_t>(a++)] = 0;
    if (a == w) break;
  }
  return cover;
}

// --- Graph -------------------------------------------------------------------

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  void unite(int a, int b) { parent[static_cast<std::size_t>(find(a))] = find(b); }
};

}  // namespace

int TopologicalNetwork::components() const {
  UnionFind uf(nodes.size());
  for (const auto& [a, b] : edges) uf.unite(a, b);
  int count = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) count += uf.find(static_cast<int>(i)) == static_cast<int>(i);
  return count;
}

int TopologicalNetwork::cycle_rank() const {
  return static_cast<int>(edges.size()) - static_cast<int>(nodes.size()) + components();
}

TopologicalNetwork assemble_graph(std::span<const RegionClusters> clusters) {
  TopologicalNetwork net;
  for (const auto& rc : clusters) {
    for (const auto& c : rc.clusters) {
      if (c.empty()) continue;
      Node node;
      node.id = static_cast<int>(net.nodes.size());
      node.region = rc.region;
      node.members = c;
      std::sort(node.members.begin(), node.members.end());
      node.members.erase(std::unique(node.members.begin(), node.members.end()), node.members.end());
      net.nodes.push_back(std::move(node));
    }
  }
  for (std::size_t i = 0; i < net.nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < net.nodes.size(); ++j) {
      const auto& a = net.nodes[i].members;
      const auto& b = net.nodes[j].members;
      // Sorted-list intersection test.
      std::size_t p = 0, q = 0;
      bool shared = false;
      while (p < a.size() && q < b.size() && !shared) {
        if (a[p] == b[q]) {
          shared = true;
        } else if (a[p] < b[q]) {
          ++p;
        } else {
          ++q;
        }
      }
      if (shared) net.edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
  }
  return net;
}

void annotate_composition(TopologicalNetwork& network, std::span<const std::string> labels) {
  for (auto& node : network.nodes) {
    std::map<std::string, int> counts;
    for (int m : node.members) {
      if (m < 0 || static_cast<std::size_t>(m) >= labels.size() || labels[static_cast<std::size_t>(m)].empty()) {
        throw ConfigError("unlabeled point " + std::to_string(m));
      }
      ++counts[labels[static_cast<std::size_t>(m)]];
    }
    node.composition.clear();
    node.dominant.clear();
    int best = -1;
    for (const auto& [label, c] : counts) {
      node.composition[label] = 100.0 * c / static_cast<double>(node.members.size());
      if (c > best) {
        best = c;
        node.dominant = label;
      }
    }
  }
}

// --- Pipeline ----------------------------------------------------------------

TopologicalNetwork mapper_graph(const Eigen::MatrixXd& space, const Eigen::MatrixXd& lens,
                                std::span<const std::string> labels, const MapperConfig& config,
                                Cover* cover_out) {
  if (space.rows() != lens.rows()) throw ConfigError("space and lens must have the same points");
  Cover cover = build_cover(lens, config.k, config.overlap, config.cover_mode);
  std::vector<RegionClusters> clusters(cover.regions.size());
  parallel_for(cover.regions.size(), [&](std::size_t r) {
    const auto members = cover.members(r, lens);
    clusters[r] = {static_cast<int>(r), cluster_region(space, members, config.gap_bins)};
  });
  auto net = assemble_graph(clusters);
  if (!labels.empty()) annotate_composition(net, labels);
  if (cover_out != nullptr) *cover_out = std::move(cover);
  return net;
}

MapperResult run_mapper(const features::FeaturePointCloud& cloud, const MapperConfig& config) {
  const auto input = config.standardize ? cloud.standardized() : cloud;
  MapperResult result;
  result.pca = pca_reduce(input.values, config.variance_target);
  result.lens = tsne_embed(result.pca.scores, config.tsne);
  result.network = mapper_graph(result.pca.scores, result.lens.points, cloud.row_groups, config, &result.cover);
  return result;
}

double dominant_share(const TopologicalNetwork& network, std::span<const std::string> labels,
                      const std::string& label) {
  std::vector<bool> placed(labels.size(), false);
  for (const auto& node : network.nodes) {
    if (node.dominant != label) continue;
    for (int m : node.members) placed[static_cast<std::size_t>(m)] = true;
  }
  int total = 0, hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != label) continue;
    ++total;
    hit += placed[i];
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / total;
}

std::vector<int> purity_histogram(const TopologicalNetwork& network, int bins) {
  if (bins < 1) throw ConfigError("purity histogram needs at least one bin");
  std::vector<int> hist(static_cast<std::size_t>(bins), 0);
  for (const auto& node : network.nodes) {
    if (node.composition.empty()) continue;
    double top = 0.0;
    for (const auto& [label, pct] : node.composition) top = std::max(top, pct / 100.0);
    const int b = std::min(bins - 1, static_cast<int>(top * bins));
    ++hist[static_cast<std::size_t>(b)];
  }
  return hist;
}

// --- Exports -----------------------------------------------------------------

void write_graph_json(const TopologicalNetwork& network, std::span<const std::string> point_ids,
                      const std::filesystem::path& file) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& node : network.nodes) {
    nlohmann::json members = nlohmann::json::array();
    for (int m : node.members) {
      if (point_ids.empty()) {
        members.push_back(m);
      } else {
        members.push_back(point_ids[static_cast<std::size_t>(m)]);
      }
    }
    nodes.push_back({{"id", node.id},
                     {"region", node.region},
                     {"members", members},
                     {"sizes", node.members.size()},
                     {"composition", node.composition},
                     {"dominant", node.dominant}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [a, b] : network.edges) edges.push_back({a, b});
  const nlohmann::json doc = {{"nodes", nodes},
                              {"edges", edges},
                              {"components", network.components()},
                              {"cycle_rank", network.cycle_rank()}};
  std::ofstream out(file);
  if (!out) throw LoadError(file.string() + ": cannot write");
  out << doc.dump(1) << '\n';
}

namespace {

std::string group_colour(const std::string& group) {
  static const std::map<std::string, std::string> palette = {
      {"SAP", "#e41a1c"}, {"FI", "#377eb8"}, {"NLC", "#4daf4a"}, {"TSM", "#984ea3"},
      {"UNI", "#ff7f00"}, {"B1", "#fde725"}, {"B2", "#7ad151"}, {"B3", "#22a884"},
      {"B4", "#2a788e"},  {"B5", "#414487"}, {"B6", "#440154"}};
  const auto it = palette.find(group);
  return it == palette.end() ? "#bbbbbb" : it->second;
}

}  // namespace

void write_graph_dot(const TopologicalNetwork& network, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw LoadError(file.string() + ": cannot write");
  out << "graph mapper {\n  node [style=filled, shape=circle, fontsize=8];\n";
  for (const auto& node : network.nodes) {
    out << "  n" << node.id << " [label=\"" << node.members.size() << "\", fillcolor=\""
        << group_colour(node.dominant) << "\", tooltip=\"" << node.dominant << "\"];\n";
  }
  for (const auto& [a, b] : network.edges) out << "  n" << a << " -- n" << b << ";\n";
  out << "}\n";
}

void write_lens_csv(const Lens& lens, std::span<const std::string> point_ids,
                    std::span<const std::string> labels, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw LoadError(file.string() + ": cannot write");
  out.precision(17);
  out << "# kl=" << lens.kl_divergence << '\n' << "point,label,x,y\n";
  for (Eigen::Index i = 0; i < lens.points.rows(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    out << (u < point_ids.size() ? point_ids[u] : std::to_string(i)) << ','
        << (u < labels.size() ? labels[u] : "") << ',' << lens.points(i, 0) << ',' << lens.points(i, 1)
        << '\n';
  }
}

}  // namespace myofeat::mapper
