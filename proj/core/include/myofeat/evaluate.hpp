#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "myofeat/convnet.hpp"
#include "myofeat/dataio.hpp"
#include "myofeat/features.hpp"

namespace myofeat::evaluate {

// --- LDA -------------------------------------------------------------------

struct LdaModel {
  std::vector<int> classes;    // sorted class ids
  Eigen::MatrixXd means;       // K x d
  Eigen::MatrixXd covariance;  // pooled, regularised, d x d
  Eigen::VectorXd priors;      // K
  Eigen::MatrixXd weights;     // d x K discriminant weights
  Eigen::VectorXd bias;        // K

  int dims() const { return static_cast<int>(means.cols()); }
};

/// Linear discriminant with a pooled within-class covariance plus a ridge of
/// ridge * trace / d. Every class needs at least 2 samples.
LdaModel lda_fit(const Eigen::MatrixXd& x, std::span<const int> y, double ridge = 1e-6);
/// n x K discriminant scores.
Eigen::MatrixXd lda_scores(const LdaModel& model, const Eigen::MatrixXd& x);
/// Class with the largest score; ties go to the lower class id.
std::vector<int> lda_predict(const LdaModel& model, const Eigen::MatrixXd& x);

struct ConfusionMatrix {
  Eigen::MatrixXi counts;  // row = true class, column = predicted

  int classes() const { return static_cast<int>(counts.rows()); }
  long total() const { return counts.cast<long>().sum(); }
  double accuracy() const;
  /// Rows divided by their sums; empty rows stay zero.
  Eigen::MatrixXd normalized() const;
};

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted, int classes);
double accuracy(std::span<const int> truth, std::span<const int> predicted);

void write_confusion_csv(const ConfusionMatrix& cm, const std::filesystem::path& file);
void write_confusion_json(const ConfusionMatrix& cm, const std::filesystem::path& file);

// --- Statistics ----------------------------------------------------------------

struct WilcoxonResult {
  int n = 0;              // nonzero differences
  double w_plus = 0.0;    // sum of positive ranks
  double p_value = 1.0;   // two-sided
  bool exact = false;
};

/// Two-sided signed-rank test on paired differences. Zero differences are
/// dropped and tied magnitudes get average ranks. The null distribution is
/// enumerated exactly for n <= exact_max_n, otherwise a normal approximation
/// with tie and continuity corrections is used. Needs n >= 5.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences, int exact_max_n = 25);

struct EffectSize {
  double d = 0.0;
  std::string label;  // Sawilowsky scale on |d|
};

/// (mean_a - mean_b) / pooled standard deviation with df weighting.
EffectSize cohens_d(std::span<const double> a, std::span<const double> b);
/// "very small", "small", "medium", "large", "very large" or "huge".
std::string effect_label(double d);

// --- Feature evaluation --------------------------------------------------------

enum class EvalMode { Single, Group, Both };

struct FeatureScore {
  std::string id;
  std::string group;
  int dims = 0;
  double accuracy = 0.0;
  ConfusionMatrix confusion;
};

struct GroupSummary {
  std::string group;
  int features = 0;
  double single_mean = 0.0;  // over the group's single-feature accuracies
  double single_sd = 0.0;    // sample standard deviation
  double group_accuracy = 0.0;
};

struct FeatureEvalReport {
  std::vector<FeatureScore> singles;
  std::vector<FeatureScore> groups;
  std::vector<GroupSummary> summary;  // groups in first-appearance order
};

/// LDA inputs for a set of cloud rows: one row per window, columns
/// row-major over (feature, channel), so a single feature gives 10 columns.
Eigen::MatrixXd cloud_inputs(const features::FeaturePointCloud& cloud, std::span<const int> rows);

/// Window labels in cloud column order.
std::vector<int> window_labels(std::span<const dataio::Window> windows);

/// Fits on the train cloud and scores the test cloud (same row layout) for
/// the given rows. Single mode scores each row on its own, group mode pools
/// the selected rows of each group. Rows are evaluated in parallel.
FeatureEvalReport feature_eval(const features::FeaturePointCloud& train, std::span<const int> train_labels,
                               const features::FeaturePointCloud& test, std::span<const int> test_labels,
                               std::span<const int> rows, EvalMode mode, int classes = dataio::kGestures);
/// All rows.
FeatureEvalReport feature_eval(const features::FeaturePointCloud& train, std::span<const int> train_labels,
                               const features::FeaturePointCloud& test, std::span<const int> test_labels,
                               EvalMode mode, int classes = dataio::kGestures);

struct LearnedClouds {
  features::FeaturePointCloud train;
  features::FeaturePointCloud test;
};

/// Single-value summaries of every learned map for LDA. For block b and map
/// m each (window, channel) gives an L_b activation series; a principal axis
/// per map is fitted on the training series and the first component score
/// becomes the cloud entry. Windows use their participant's statistics when
/// the model has them, otherwise the shared set.
LearnedClouds learned_pc1_clouds(const convnet::ConvNet<float>& model, std::span<const dataio::Window> train,
                                 std::span<const dataio::Window> test, int chunk = 32);

/// Per-feature table: "feature,group,dims,accuracy".
void write_feature_scores_csv(const FeatureEvalReport& report, const std::filesystem::path& file);
/// Category table: "group,features,single_mean,single_sd,group_accuracy"
/// with accuracies in percent.
void write_summary_csv(const FeatureEvalReport& report, const std::filesystem::path& file);

}  // namespace myofeat::evaluate
