#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "myofeat/convnet.hpp"
#include "myofeat/dataio.hpp"

namespace myofeat::interpret {

/// Non-negative relevance over the input window (channels x time).
struct RelevanceMap {
  Eigen::MatrixXd values;
  int target_gesture = 0;
  int window_id = 0;
};

/// Input-space gradient of logit g with guided rectifiers: at every
/// rectification point the backward signal is kept only where the forward
/// activation and the incoming gradient are both positive.
/// `input` is one window, channels x length. Eval mode with `domain`'s stats.
template <class T>
Eigen::MatrixXd guided_backprop(const convnet::ConvNet<T>& model, const Eigen::MatrixXd& input,
                                int gesture, int domain);

/// Grad-CAM at the rectified output of the last block: channels x L_last
/// (10 x 1 for the default architecture). Element-wise non-negative.
template <class T>
Eigen::MatrixXd grad_cam(const convnet::ConvNet<T>& model, const Eigen::MatrixXd& input, int gesture,
                         int domain);

/// CAM broadcast along time (nearest neighbour) times the positive part of
/// guided backpropagation.
template <class T>
RelevanceMap guided_grad_cam(const convnet::ConvNet<T>& model, const Eigen::MatrixXd& input,
                             int gesture, int domain, int window_id = 0);

extern template Eigen::MatrixXd guided_backprop<float>(const convnet::ConvNet<float>&,
                                                       const Eigen::MatrixXd&, int, int);
extern template Eigen::MatrixXd guided_backprop<double>(const convnet::ConvNet<double>&,
                                                        const Eigen::MatrixXd&, int, int);
extern template Eigen::MatrixXd grad_cam<float>(const convnet::ConvNet<float>&, const Eigen::MatrixXd&,
                                                int, int);
extern template Eigen::MatrixXd grad_cam<double>(const convnet::ConvNet<double>&,
                                                 const Eigen::MatrixXd&, int, int);
extern template RelevanceMap guided_grad_cam<float>(const convnet::ConvNet<float>&,
                                                    const Eigen::MatrixXd&, int, int, int);
extern template RelevanceMap guided_grad_cam<double>(const convnet::ConvNet<double>&,
                                                     const Eigen::MatrixXd&, int, int, int);

/// Relevance for each window's own gesture on the window and on a Gaussian
/// noise input (mean 0) asked for the same gesture. The noise standard
/// deviation is the pooled signal scale of all explained windows. Each window
/// uses its participant's statistics when the model has them.
struct NoiseComparison {
  std::vector<std::size_t> windows;  // indices into the input span
  std::vector<RelevanceMap> signal;
  std::vector<RelevanceMap> noise;
  double noise_sd = 0.0;
  double mean_max_signal = 0.0;
  double mean_max_noise = 0.0;
};

/// Explains up to `per_gesture` windows of every gesture, in input order.
NoiseComparison compare_with_noise(const convnet::ConvNet<float>& model, std::span<const dataio::Window> windows,
                                   int per_gesture, std::uint64_t seed);

/// CSV: one row per channel, 151 comma-separated values.
void write_relevance_csv(const RelevanceMap& map, const std::filesystem::path& file);
/// JSON array of {channel, time, value, log10_value} (log10 of 0 is null).
void write_relevance_json(const RelevanceMap& map, const std::filesystem::path& file);
/// Heatmap with a logarithmic colour scale spanning `decades` below the max.
void write_relevance_svg(const RelevanceMap& map, const std::filesystem::path& file,
                         double decades = 4.0);

// ---------------------------------------------------------------------------
// Regression probes

struct ProbeConfig {
  int restarts = 20;
  int epochs = 100;
  double lr = 0.01;
  int batch_size = 64;
  double l2 = 0.0;
  std::uint64_t seed = 0;
  /// EMG channel rows used as probe samples; the default is the first row.
  std::vector<int> channels = {0};
  int chunk = 32;
};

struct ProbeResult {
  int block = 0;
  double mse = 0.0;                 // mean test MSE over restarts
  std::vector<double> restart_mse;  // per restart
};

/// Head inputs for block b: one row per (window, channel) sample holding the
/// channel's maps x L_b rectified activations, map-major.
Eigen::MatrixXd probe_inputs(const convnet::ConvNet<float>& model, std::span<const dataio::Window> windows,
                             int block, std::span<const int> domains, const ProbeConfig& config);

/// Targets for one feature method at the probe samples. Multi-output methods
/// are reduced to their first principal component, fitted on `fit` (rows are
/// samples) and applied to `apply`; the largest loading is made positive.
struct ProbeTargets {
  Eigen::VectorXd train;
  Eigen::VectorXd test;
};
ProbeTargets probe_targets(std::string_view method, std::span<const dataio::Window> train,
                           std::span<const dataio::Window> test, const ProbeConfig& config);

/// Trains `restarts` affine heads with Adam on squared error. Inputs and
/// targets are standardised with training statistics; the reported MSE is
/// on the standardised test targets.
ProbeResult train_regression_probe(const Eigen::MatrixXd& train_x, const Eigen::VectorXd& train_y,
                                   const Eigen::MatrixXd& test_x, const Eigen::VectorXd& test_y,
                                   const ProbeConfig& config);

/// Full probe for one block and feature method with a frozen trunk. Each
/// window is evaluated with its participant's statistics when present,
/// otherwise with the shared set.
ProbeResult train_regression_probe(const convnet::ConvNet<float>& model, int block,
                                   std::string_view method, std::span<const dataio::Window> train,
                                   std::span<const dataio::Window> test, const ProbeConfig& config);

}  // namespace myofeat::interpret
