#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "myofeat/dataio.hpp"
#include "myofeat/features.hpp"
#include "myofeat/rng.hpp"

namespace myofeat::convnet {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// Domain key for the single shared statistics set used by standard training.
inline constexpr int kSharedDomain = -1;

/// Network shape. Defaults give the 6-block, 543,629-parameter model; smaller
/// shapes are used for exhaustive gradient checks.
struct Architecture {
  int channels = dataio::kChannels;  // EMG rows, convolved independently
  int length = dataio::kWindowLength;
  int maps = 64;
  int kernel = 26;
  int blocks = 6;
  int gestures = dataio::kGestures;
  int domain_outputs = 2;
  double leak = 0.1;
  double dropout = 0.35;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;

  void validate() const;
  int block_inputs(int b) const { return b == 1 ? 1 : maps; }
  /// Output time length of block b (1-based).
  int block_length(int b) const { return length - b * (kernel - 1); }
  int head_inputs() const { return channels * maps * block_length(blocks); }
  std::size_t parameter_count(bool with_domain_head = true) const;
  std::uint64_t hash() const;
  bool operator==(const Architecture&) const = default;
};

enum class Mode { Train, Eval };

/// Where batch normalisation takes its statistics from in train mode.
enum class BnSource { Batch, Stored };

struct ParamGroup {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Running mean and variance per block (index b-1), one entry per map.
template <class T>
struct BnStats {
  std::vector<Vec<T>> mean;
  std::vector<Vec<T>> var;
};

/// Activations retained by a forward pass for the backward pass.
/// Activation matrices are maps x (batch*channels*time) with column index
/// (n*channels + r)*time + t.
template <class T>
struct Tape {
  int batch = 0;
  Mode mode = Mode::Eval;
  bool batch_stats = false;
  std::vector<Mat<T>> act;   // act[0] input, act[b] output of block b
  std::vector<Mat<T>> xhat;  // normalised conv output, per block
  std::vector<Mat<T>> pre;   // BN output before the rectifier
  std::vector<Mat<T>> mask;  // inverted-dropout factors; empty when inactive
  std::vector<Vec<T>> inv_std;
  Mat<T> gesture_logits;  // gestures x batch
  Mat<T> domain_logits;   // domain_outputs x batch; empty unless requested

  bool empty() const { return batch == 0; }
};

struct ForwardOptions {
  Mode mode = Mode::Eval;
  int domain = kSharedDomain;
  BnSource bn = BnSource::Batch;  // train mode only
  bool update_stats = true;       // train mode with batch statistics only
  bool domain_head = false;
  Rng* rng = nullptr;  // dropout masks; required in train mode when dropout > 0
};

struct BackwardOptions {
  /// Multiplies the domain-loss gradient where it leaves the domain head.
  double reversal = 1.0;
  /// Guided backpropagation at every rectifier.
  bool guided = false;
  bool input_gradient = false;
  /// Block (1-based) whose output gradient is captured; 0 for none.
  int capture_block = 0;
};

template <class T>
struct BackwardExtras {
  Mat<T> input_gradient;  // 1 x (batch*channels*length)
  Mat<T> captured;        // gradient w.r.t. act[capture_block]
};

template <class T>
class ConvNet {
 public:
  explicit ConvNet(const Architecture& arch = {}, std::uint64_t seed = 0);

  const Architecture& arch() const { return arch_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
  std::span<T> parameters() { return {params_.data(), static_cast<std::size_t>(params_.size())}; }
  std::span<const T> parameters() const {
    return {params_.data(), static_cast<std::size_t>(params_.size())};
  }
  void set_parameters(std::span<const T> values);
  const std::vector<ParamGroup>& groups() const { return groups_; }
  const ParamGroup& group(const std::string& name) const;

  Eigen::Map<const Mat<T>> conv_weight(int b) const;  // maps x (kernel*inputs), column k*inputs+i
  Eigen::Map<const Vec<T>> conv_bias(int b) const;
  Eigen::Map<const Vec<T>> bn_scale(int b) const;
  Eigen::Map<const Vec<T>> bn_shift(int b) const;
  Eigen::Map<const Mat<T>> gesture_weight() const;  // gestures x head_inputs
  Eigen::Map<const Vec<T>> gesture_bias() const;
  Eigen::Map<const Mat<T>> domain_weight() const;
  Eigen::Map<const Vec<T>> domain_bias() const;
  Eigen::Map<Mat<T>> conv_weight(int b);
  Eigen::Map<Vec<T>> conv_bias(int b);
  Eigen::Map<Vec<T>> bn_scale(int b);
  Eigen::Map<Vec<T>> bn_shift(int b);
  Eigen::Map<Mat<T>> gesture_weight();
  Eigen::Map<Vec<T>> gesture_bias();
  Eigen::Map<Mat<T>> domain_weight();
  Eigen::Map<Vec<T>> domain_bias();

  bool has_stats(int domain) const { return stats_.count(domain) != 0; }
  const BnStats<T>& stats(int domain) const;
  void set_stats(int domain, BnStats<T> stats);
  void clear_stats(int domain) { stats_.erase(domain); }
  std::vector<int> stat_domains() const;

  /// input: 1 x (batch*channels*length). Train mode may update running stats.
  Tape<T> forward(const Mat<T>& input, int batch, const ForwardOptions& options);
  /// Eval-mode pass with stored statistics; never mutates the model.
  Tape<T> infer(const Mat<T>& input, int batch, int domain, bool domain_head = false) const;

  /// Accumulates parameter gradients into grad (length parameter_count()).
  /// d_gesture and d_domain are loss gradients w.r.t. the logits; d_domain
  /// may be null when the domain head is not part of the loss.
  void backward(const Tape<T>& tape, const Mat<T>& d_gesture, const Mat<T>* d_domain,
                std::span<T> grad, const BackwardOptions& options = {},
                BackwardExtras<T>* extras = nullptr) const;

  /// Estimates a domain's statistics block by block from unlabeled input,
  /// normalising earlier blocks with the estimates already made.
  void estimate_stats(int domain, const Mat<T>& input, int batch, int chunk = 32);

 private:
  Mat<T> convolve(int b, const Mat<T>& in, int rows) const;
  void add_group(const std::string& name, std::size_t size);

  Architecture arch_;
  Vec<T> params_;
  std::vector<ParamGroup> groups_;
  std::map<int, BnStats<T>> stats_;
};

extern template class ConvNet<float>;
extern template class ConvNet<double>;

template <class To, class From>
ConvNet<To> convnet_cast(const ConvNet<From>& src) {
  ConvNet<To> out(src.arch(), 0);
  std::vector<To> values(src.parameters().begin(), src.parameters().end());
  out.set_parameters(values);
  for (int d : src.stat_domains()) {
    const auto& s = src.stats(d);
    BnStats<To> c;
    for (const auto& m : s.mean) c.mean.push_back(m.template cast<To>());
    for (const auto& v : s.var) c.var.push_back(v.template cast<To>());
    out.set_stats(d, std::move(c));
  }
  return out;
}

/// Packs windows into the forward-pass input layout.
template <class T>
Mat<T> pack_windows(std::span<const dataio::Window> windows);
template <class T>
Mat<T> pack_windows(std::span<const dataio::Window* const> windows);

/// Mean softmax cross-entropy over the batch; writes d loss / d logits.
template <class T>
double softmax_cross_entropy(const Mat<T>& logits, std::span<const int> labels, Mat<T>& d_logits);

/// Column-wise argmax with ties resolved to the lower index.
template <class T>
std::vector<int> argmax_columns(const Mat<T>& logits);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
class Adam {
 public:
  explicit Adam(std::size_t size, AdamConfig config = {})
      : config_(config), m_(size, 0.0), v_(size, 0.0) {}

  /// One bias-corrected update. Throws NumericError naming the parameter
  /// group of the first non-finite gradient; parameters are left untouched.
  void step(std::span<T> params, std::span<const T> grads, double lr,
            std::span<const ParamGroup> groups = {});
  long steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<double> m_, v_;
  long steps_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

/// Runs the model in eval mode over windows in chunks and calls fn with the
/// index of the first window in the chunk and the chunk's tape.
template <class T>
void for_each_chunk(const ConvNet<T>& model, std::span<const dataio::Window> windows, int domain,
                    int chunk, const std::function<void(std::size_t, const Tape<T>&)>& fn);

/// 384-row cloud: row (b-1)*maps + m holds the time average of block b's
/// rectified map m, columns n*10 + c as in the handcrafted cloud.
features::FeaturePointCloud extract_learned_features(const ConvNet<float>& model,
                                                     std::span<const dataio::Window> windows,
                                                     int domain, int chunk = 32);

// Checkpoints: binary file with header (magic, architecture hash, domain
// count), little-endian float32 weights, per-domain BN statistics; plus a
// JSON manifest alongside.
void save_checkpoint(const ConvNet<float>& model, const std::filesystem::path& file);
ConvNet<float> load_checkpoint(const std::filesystem::path& file);

}  // namespace myofeat::convnet
