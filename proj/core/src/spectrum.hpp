#pragma once

#include <span>
#include <vector>

namespace myofeat::features::detail {

/// One-sided periodogram without zero padding: power[k] = |X_k|^2 / N for
/// k = 0..N/2, at frequency k * fs / N.
struct Spectrum {
  std::vector<double> power;
  std::vector<double> freq;

  double total() const;
  /// Sum of power over bins with lo <= f < hi.
  double band(double lo, double hi) const;
  /// Spectral moment sum_k f_k^order P_k.
  double moment(int order) const;
};

Spectrum periodogram(std::span<const double> x, double sample_rate);

}  // namespace myofeat::features::detail
