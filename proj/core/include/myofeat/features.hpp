#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "myofeat/dataio.hpp"

namespace myofeat::features {

/// Functional groups of handcrafted features.
enum class Group { SAP, FI, NLC, TSM, UNI };

std::string_view group_name(Group g);

/// One feature extraction method (a mnemonic such as "MAV" or "AR").
struct MethodInfo {
  std::string_view name;
  Group group;
  int outputs;
};

/// One scalar feature: a method output. Multi-output methods expand to
/// several descriptors (AR1..AR4, HIST1..HIST3, ...).
struct FeatureDescriptor {
  std::string method;
  int output_index = 0;
  Group group = Group::SAP;
  int outputs = 1;

  /// "MAV" for single-output methods, "AR2" (1-based) for the others.
  std::string id() const;
};

/// Tunable constants of the feature formulas. Defaults are documented in
/// docs/features.md.
struct FeatureConfig {
  double zc_threshold = 10.0;
  double ssc_threshold = 10.0;
  double wamp_threshold = 10.0;
  int ar_order = 4;
  int cc_order = 4;
  int entropy_dimension = 2;           // SampEn/ApEn embedding m
  double entropy_tolerance = 0.2;      // r = tolerance * std
  double fr_split_hz = 247.0;          // FR low band [20, split), high band [split, 495]
  double fr_low_hz = 20.0;
  double fr_high_hz = 495.0;
  double psr_half_width_hz = 20.0;     // PSR band around the spectral peak
  double snr_noise_hz = 400.0;         // SNR noise band starts here
  double smr_artifact_hz = 20.0;       // SMR motion-artefact band is [0, this)
  int dpr_smoothing_bins = 5;
  double v_order = 3.0;                // V and DV
  double tdpsd_lambda = 0.1;
  int afb_window = 32;
  double log_epsilon = 1e-12;          // LD, DLD and other log terms
  double sample_rate = dataio::kSampleRate;
};

/// The 56 extraction methods in registry order (grouped SAP, FI, NLC, TSM, UNI).
std::span<const MethodInfo> method_registry();

/// The 79 scalar feature descriptors, in registry order.
std::vector<FeatureDescriptor> feature_registry();

const MethodInfo& method_info(std::string_view method);

/// Evaluates one method on a single channel of one window. The output length
/// equals the method's expansion count. Degenerate (constant) inputs return
/// finite values and never throw.
std::vector<double> extract_method(std::string_view method, std::span<const double> samples,
                                   const FeatureConfig& config = {});

/// All 79 features of one channel, in registry order.
std::vector<double> extract_channel(std::span<const double> samples,
                                    const FeatureConfig& config = {});

/// Rows are features (points), columns are window-channel evaluations with
/// column index n * C + c (window-major, channel-minor).
struct FeaturePointCloud {
  Eigen::MatrixXd values;
  std::vector<std::string> row_labels;
  std::vector<std::string> row_groups;  // "SAP".."UNI" or "B1".."B6"
  std::vector<std::pair<int, int>> column_labels;  // (window, channel)

  Eigen::Index points() const { return values.rows(); }
  Eigen::Index dims() const { return values.cols(); }

  /// Copy with every row z-scored across columns; constant rows become 0.
  FeaturePointCloud standardized() const;

  /// Row subset, preserving labels.
  FeaturePointCloud select_rows(std::span<const int> rows) const;

  /// Stacks two clouds with identical column layouts.
  static FeaturePointCloud concat(const FeaturePointCloud& top, const FeaturePointCloud& bottom);
};

/// Handcrafted point cloud over all windows: 79 rows x (N*10) columns of raw
/// values. Non-finite values are replaced by 0 and logged.
FeaturePointCloud extract_all(std::span<const dataio::Window> windows,
                              const FeatureConfig& config = {});

/// CSV export: header "feature,group,w0c0,w0c1,...", one row per feature.
void write_cloud_csv(const FeaturePointCloud& cloud, const std::filesystem::path& file);
FeaturePointCloud read_cloud_csv(const std::filesystem::path& file);

/// JSON sidecar describing the handcrafted descriptors and their groups.
void write_registry_json(const std::filesystem::path& file);

}  // namespace myofeat::features
