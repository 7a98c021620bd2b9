#include "spectrum.hpp"

#include <cmath>
#include <numbers>

namespace myofeat::features::detail {

double Spectrum::total() const {
  double s = 0.0;
  for (double p : power) s += p;
  return s;
}

double Spectrum::band(double lo, double hi) const {
  double s = 0.0;
  for (std::size_t k = 0; k < power.size(); ++k)
    if (freq[k] >= lo && freq[k] < hi) s += power[k];
  return s;
}

double Spectrum::moment(int order) const {
  double s = 0.0;
  for (std::size_t k = 0; k < power.size(); ++k) s += std::pow(freq[k], order) * power[k];
  return s;
}

Spectrum periodogram(std::span<const double> x, double sample_rate) {
  const std::size_t n = x.size();
  // Twiddle table for the most recent length; windows are almost always 151.
  thread_local std::vector<double> cos_table, sin_table;
  if (cos_table.size() != n) {
    cos_table.resize(n);
    sin_table.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
      cos_table[i] = std::cos(a);
      sin_table[i] = std::sin(a);
    }
  }
  Spectrum s;
  const std::size_t bins = n / 2 + 1;
  s.power.resize(bins);
  s.freq.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    double re = 0.0, im = 0.0;
    std::size_t idx = 0;
    for (std::size_t t = 0; t < n; ++t) {
      re += x[t] * cos_table[idx];
      im -= x[t] * sin_table[idx];
      idx += k;
      if (idx >= n) idx -= n;
    }
    s.power[k] = (re * re + im * im) / static_cast<double>(n);
    s.freq[k] = static_cast<double>(k) * sample_rate / static_cast<double>(n);
  }
  return s;
}

}  // namespace myofeat::features::detail
