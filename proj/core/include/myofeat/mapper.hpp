#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "myofeat/features.hpp"

namespace myofeat::mapper {

// --- PCA -------------------------------------------------------------------

struct PcaResult {
  Eigen::MatrixXd scores;     // M x Z, rows are the input points
  Eigen::VectorXd explained;  // variance ratio per component, descending
  int components = 0;
};

/// Centres the rows and keeps the smallest number of components whose
/// cumulative variance ratio reaches `variance_target` (at most M-1).
PcaResult pca_reduce(const Eigen::MatrixXd& points, double variance_target = 0.99);

// --- t-SNE -----------------------------------------------------------------

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  int exaggeration_iterations = 250;
  double exaggeration = 12.0;
  double learning_rate = 200.0;
  double momentum_initial = 0.5;
  double momentum_final = 0.8;
  int momentum_switch = 250;
  double min_gain = 0.01;
  double init_stddev = 1e-4;
  std::uint64_t seed = 0;
};

struct Lens {
  Eigen::MatrixXd points;  // M x 2
  double kl_divergence = 0.0;
};

/// Symmetric joint affinities P (sums to 1) with per-point bandwidths found
/// by binary search on the perplexity.
Eigen::MatrixXd tsne_affinities(const Eigen::MatrixXd& points, double perplexity);
/// KL(P || Q) for the Student-t kernel on the embedding y.
double tsne_kl(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y);
/// Exact gradient of tsne_kl with respect to y.
Eigen::MatrixXd tsne_kl_gradient(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y);

/// Exact t-SNE to two dimensions. Requires M >= 5 and
/// perplexity < (M-1)/3.
Lens tsne_embed(const Eigen::MatrixXd& points, const TsneConfig& config = {});

// --- Cover -----------------------------------------------------------------

enum class CoverMode {
  CellCentred,   // k^W regions centred on the cells of the subdivision
  VertexCentred  // (k+1)^W regions centred on the subdivision vertices
};

struct Region {
  std::vector<int> index;  // grid position per axis
  Eigen::VectorXd lo, hi;  // closed bounds, relative to the lens minimum
};

struct Cover {
  std::vector<Region> regions;
  Eigen::VectorXd origin;       // per-axis lens minimum
  Eigen::VectorXd inner_width;  // H per axis
  Eigen::VectorXd outer_width;  // D per axis
  int k = 0;
  double overlap = 0.0;

  bool contains(std::size_t region, const Eigen::VectorXd& point) const;
  /// Row indices of lens points inside the region.
  std::vector<int> members(std::size_t region, const Eigen::MatrixXd& lens) const;
};

/// Per axis H = range/k and D = H/(1-overlap); outermost bounds always reach
/// the lens extremes. Overlap must lie in [0, 1).
Cover build_cover(const Eigen::MatrixXd& lens, int k = 5, double overlap = 0.65,
                  CoverMode mode = CoverMode::CellCentred);

// --- Ward clustering ---------------------------------------------------------

struct Merge {
  int a = 0;  // cluster ids: 0..n-1 are points, n+i is merge i
  int b = 0;
  double height = 0.0;  // sqrt(2 * increase in within-cluster sum of squares)
  int size = 0;
};

/// Agglomerative Ward linkage (Lance-Williams on squared distances).
std::vector<Merge> ward_linkage(const Eigen::MatrixXd& points);

/// Flat labels from the first-gap rule: histogram the merge heights into
/// `bins` bins and apply only merges below the first empty bin. Without a gap
/// every point ends in one cluster. Labels are numbered by first member.
std::vector<int> cut_first_gap(std::span<const Merge> merges, int n, int bins = 10);

/// Clusters of a region's members in the original space; returns global ids.
std::vector<std::vector<int>> cluster_region(const Eigen::MatrixXd& space, std::span<const int> members,
                                             int bins = 10);

// --- Graph -------------------------------------------------------------------

struct Node {
  int id = 0;
  int region = 0;
  std::vector<int> members;  // sorted global point ids
  std::map<std::string, double> composition;  // label -> percent
  std::string dominant;
};

struct TopologicalNetwork {
  std::vector<Node> nodes;
  std::vector<std::pair<int, int>> edges;  // i < j, sorted

  int components() const;
  /// E - V + components: independent cycles of the graph.
  int cycle_rank() const;
};

struct RegionClusters {
  int region = 0;
  std::vector<std::vector<int>> clusters;
};

/// Nodes in region order; an edge joins two nodes iff they share a member.
TopologicalNetwork assemble_graph(std::span<const RegionClusters> clusters);

/// Attaches per-node label percentages and the dominant label (ties go to the
/// lexicographically smaller label).
void annotate_composition(TopologicalNetwork& network, std::span<const std::string> labels);

// --- Pipeline ----------------------------------------------------------------

struct MapperConfig {
  double variance_target = 0.99;
  TsneConfig tsne;
  int k = 5;
  double overlap = 0.65;
  CoverMode cover_mode = CoverMode::CellCentred;
  int gap_bins = 10;
  bool standardize = true;
};

struct MapperResult {
  PcaResult pca;
  Lens lens;
  Cover cover;
  TopologicalNetwork network;
};

/// Standardise rows, PCA, t-SNE lens, cover, per-region Ward clustering in
/// PCA space, graph, composition by the cloud's row groups.
MapperResult run_mapper(const features::FeaturePointCloud& cloud, const MapperConfig& config = {});

/// Cover, clustering and graph for a given space and lens.
TopologicalNetwork mapper_graph(const Eigen::MatrixXd& space, const Eigen::MatrixXd& lens,
                                std::span<const std::string> labels, const MapperConfig& config,
                                Cover* cover_out = nullptr);

/// Fraction of points labelled `label` that lie in at least one node whose
/// dominant label is `label`.
double dominant_share(const TopologicalNetwork& network, std::span<const std::string> labels,
                      const std::string& label);

/// Histogram of node purity (share of the dominant label) in `bins` bins.
std::vector<int> purity_histogram(const TopologicalNetwork& network, int bins = 10);

void write_graph_json(const TopologicalNetwork& network, std::span<const std::string> point_ids,
                      const std::filesystem::path& file);
void write_graph_dot(const TopologicalNetwork& network, const std::filesystem::path& file);
/// CSV "point,label,x,y" with a "# kl=<value>" header comment.
void write_lens_csv(const Lens& lens, std::span<const std::string> point_ids,
                    std::span<const std::string> labels, const std::filesystem::path& file);

}  // namespace myofeat::mapper
