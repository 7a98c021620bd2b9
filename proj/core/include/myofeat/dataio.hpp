#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace myofeat::dataio {

inline constexpr int kChannels = 10;
inline constexpr int kGestures = 11;
inline constexpr int kWindowLength = 151;
inline constexpr int kWindowStep = 51;  // 151-sample frames overlapping by 100
inline constexpr double kSampleRate = 1000.0;

/// One continuous multi-channel recording of a single gesture.
/// `samples` is channels x time.
struct Recording {
  int participant_id = 0;
  int cycle_id = 0;
  int gesture_id = 0;
  Eigen::MatrixXd samples;
  double sample_rate = kSampleRate;
};

/// A 10 x 151 frame, the unit of classification and feature extraction.
struct Window {
  Eigen::MatrixXd data;
  int participant_id = 0;
  int cycle_id = 0;
  int gesture_id = 0;
  int window_index = 0;  // position of the frame within its recording
};

/// Throws LoadError unless the window is exactly 10 x 151 and finite.
void validate_window(const Window& w);

// ---------------------------------------------------------------------------
// Band-pass filtering

struct FilterSpec {
  double low_hz = 20.0;
  double high_hz = 495.0;
  int order = 4;  // order of the low-pass prototype; the band-pass has 2x poles
  double sample_rate = kSampleRate;

  void validate() const;
};

/// Second-order section, normalised so that a0 == 1.
struct Biquad {
  double b0, b1, b2, a1, a2;
};

/// Digital Butterworth band-pass built from the analog prototype with
/// prewarped band edges and the bilinear transform, stored as a cascade of
/// biquads. Filtering is causal and starts from a zero state.
class ButterworthBandpass {
 public:
  explicit ButterworthBandpass(const FilterSpec& spec);

  const FilterSpec& spec() const { return spec_; }
  std::span<const Biquad> sections() const { return sections_; }
  std::span<const std::complex<double>> poles() const { return poles_; }

  /// Complex frequency response of the cascade at `hz`.
  std::complex<double> response(double hz) const;

  /// Single forward pass. Requires at least 3 * order samples.
  std::vector<double> apply(std::span<const double> signal) const;

  /// Filters every row of a channels x time matrix independently.
  Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& signal) const;

 private:
  FilterSpec spec_;
  std::vector<Biquad> sections_;
  std::vector<std::complex<double>> poles_;
  double gain_ = 1.0;
};

/// Convenience wrapper around ButterworthBandpass::apply.
std::vector<double> bandpass_filter(std::span<const double> signal,
                                    const FilterSpec& spec = {});

// ---------------------------------------------------------------------------
// Segmentation

/// Number of frames produced by segment() for a signal of `samples` length.
int window_count(int samples, int window_len = kWindowLength,
                 int step = kWindowStep);

/// Slices a channels x S signal into frames starting at 0, step, 2*step, ...
/// Returns an empty sequence when S < window_len.
std::vector<Eigen::MatrixXd> segment(const Eigen::MatrixXd& signal,
                                     int window_len = kWindowLength,
                                     int step = kWindowStep);

enum class PreprocessOrder {
  FilterThenSegment,  // default: filter the whole recording once
  SegmentThenFilter,  // filter each frame on its own (edge transients)
};

/// Filters and segments one recording into labelled windows.
std::vector<Window> preprocess(const Recording& recording,
                               const FilterSpec& spec = {},
                               PreprocessOrder order =
                                   PreprocessOrder::FilterThenSegment);

std::vector<Window> preprocess_all(std::span<const Recording> recordings,
                                   const FilterSpec& spec = {},
                                   PreprocessOrder order =
                                       PreprocessOrder::FilterThenSegment);

// ---------------------------------------------------------------------------
// Recording files
//
// One CSV per participant/cycle/gesture named p<participant>_c<cycle>_g<gesture>.csv,
// ten numeric columns (channels), one row per sample, optional header row.

/// Loads every recording in `directory`, sorted by (participant, cycle,
/// gesture). An empty directory yields an empty sequence and a warning.
std::vector<Recording> load_recordings(const std::filesystem::path& directory);

Recording load_recording_csv(const std::filesystem::path& file);

void write_recording_csv(const Recording& recording,
                         const std::filesystem::path& file);

/// Writes all recordings using the canonical file name pattern.
void write_recordings(std::span<const Recording> recordings,
                      const std::filesystem::path& directory);

std::string recording_file_name(int participant, int cycle, int gesture);

// Cycles 1-4 form the training dataset, 5-8 the test dataset. Within the
// training dataset cycles 1-3 train the network and cycle 4 validates it.
inline bool is_training_cycle(int cycle) { return cycle >= 1 && cycle <= 4; }
inline bool is_test_cycle(int cycle) { return cycle >= 5 && cycle <= 8; }
inline bool is_validation_cycle(int cycle) { return cycle == 4; }

// ---------------------------------------------------------------------------
// Window blocks: little-endian float32 row-major 10x151 frames back to back,
// plus a JSON index with one label record per frame.

void write_windows(std::span<const Window> windows,
                   const std::filesystem::path& bin_file,
                   const std::filesystem::path& index_file);

std::vector<Window> read_windows(const std::filesystem::path& bin_file,
                                 const std::filesystem::path& index_file);

// ---------------------------------------------------------------------------
// Synthetic multi-domain surrogate data

struct SynthConfig {
  int n_domains = 4;
  int n_classes = 5;
  int n_cycles = 8;
  int samples_per_recording = 1000;
  double amplitude = 150.0;       // microvolt scale of an active channel
  double noise_floor = 4.0;       // additive white noise std
  double max_rotation = 0.6;      // armband rotation, in electrode spacings
  double min_gain = 0.35;         // per-domain gain is log-uniform in
  double max_gain = 2.8;          // [min_gain, max_gain]
  double cycle_jitter = 0.1;      // relative amplitude change per cycle
  std::uint64_t seed = 7;
};

/// Per-domain distortion applied by synth_generate (exposed for tests).
struct DomainDistortion {
  double rotation = 0.0;  // fractional circular channel shift
  double gain = 1.0;
};

std::vector<DomainDistortion> synth_domains(const SynthConfig& config);

/// Generates n_domains x n_cycles x n_classes recordings. Participant ids are
/// 1..n_domains, cycles 1..n_cycles, gestures 0..n_classes-1. Each class has a
/// distinct channel amplitude pattern and spectral band; each domain applies a
/// fixed channel rotation and gain. Deterministic given the seed.
std::vector<Recording> synth_generate(const SynthConfig& config);

std::vector<Recording> synth_generate(int n_domains, int n_classes,
                                      std::uint64_t seed);

}  // namespace myofeat::dataio
