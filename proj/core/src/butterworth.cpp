#include <algorithm>
#include <cmath>
#include <numbers>

#include "myofeat/dataio.hpp"
#include "myofeat/error.hpp"

namespace myofeat::dataio {

namespace {

using cplx = std::complex<double>;

constexpr double kImagTolerance = 1e-12;

}  // namespace

void FilterSpec::validate() const {
  if (order < 1) throw ConfigError("filter order must be >= 1");
  if (sample_rate <= 0.0) throw ConfigError("sample rate must be positive");
  if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < sample_rate / 2.0)) {
    throw ConfigError("band edges must satisfy 0 < low < high < sample_rate/2");
  }
}

ButterworthBandpass::ButterworthBandpass(const FilterSpec& spec) : spec_(spec) {
  spec_.validate();
  const int n = spec_.order;
  const double fs = spec_.sample_rate;
  const double pi = std::numbers::pi;

  // Prewarped analog band edges (rad/s).
  const double wl = 2.0 * fs * std::tan(pi * spec_.low_hz / fs);
  const double wh = 2.0 * fs * std::tan(pi * spec_.high_hz / fs);
  const double bw = wh - wl;
  const double w0sq = wl * wh;

  // Low-pass prototype poles on the unit circle, mapped to the band-pass
  // plane (two poles each) and then through the bilinear transform.
  for (int k = 1; k <= n; ++k) {
    const cplx p = std::polar(1.0, pi * (2.0 * k + n - 1) / (2.0 * n));
    const cplx pb = p * bw;
    const cplx disc = std::sqrt(pb * pb - 4.0 * w0sq);
    for (const cplx s : {(pb + disc) / 2.0, (pb - disc) / 2.0}) {
      const cplx z = (2.0 * fs + s) / (2.0 * fs - s);
      if (std::abs(z) >= 1.0) {
        throw DesignError("Butterworth design is unstable: pole radius " +
                          std::to_string(std::abs(z)) + " >= 1");
      }
      poles_.push_back(z);
    }
  }

  // Group poles into second-order sections: conjugate pairs first, then the
  // remaining real poles two at a time.
  std::vector<cplx> upper;
  std::vector<double> real;
  for (const cplx& z : poles_) {
    if (z.imag() > kImagTolerance) {
      upper.push_back(z);
    } else if (std::abs(z.imag()) <= kImagTolerance) {
      real.push_back(z.real());
    }
  }
  std::sort(upper.begin(), upper.end(),
            [](const cplx& a, const cplx& b) { return std::abs(a) < std::abs(b); });
  std::sort(real.begin(), real.end());
  if (2 * upper.size() + real.size() != poles_.size() || real.size() % 2 != 0) {
    throw DesignError("could not pair Butterworth poles into sections");
  }
  // Every section carries one zero at z = 1 and one at z = -1.
  for (const cplx& z : upper) {
    sections_.push_back({1.0, 0.0, -1.0, -2.0 * z.real(), std::norm(z)});
  }
  for (std::size_t i = 0; i < real.size(); i += 2) {
    sections_.push_back(
        {1.0, 0.0, -1.0, -(real[i] + real[i + 1]), real[i] * real[i + 1]});
  }

  // Unit gain at the digital image of the analog centre frequency.
  const double center_hz = std::atan(std::sqrt(w0sq) / (2.0 * fs)) * fs / pi;
  gain_ = 1.0;
  const double g = 1.0 / std::abs(response(center_hz));
  const double per_section = std::pow(g, 1.0 / static_cast<double>(sections_.size()));
  for (Biquad& s : sections_) {
    s.b0 *= per_section;
    s.b1 *= per_section;
    s.b2 *= per_section;
  }
}

std::complex<double> ButterworthBandpass::response(double hz) const {
  const double w = 2.0 * std::numbers::pi * hz / spec_.sample_rate;
  const cplx zi = std::polar(1.0, -w);  // z^-1
  const cplx zi2 = zi * zi;
  cplx h = gain_;
  for (const Biquad& s : sections_) {
    h *= (s.b0 + s.b1 * zi + s.b2 * zi2) / (1.0 + s.a1 * zi + s.a2 * zi2);
  }
  return h;
}

std::vector<double> ButterworthBandpass::apply(std::span<const double> signal) const {
  if (signal.size() < static_cast<std::size_t>(3 * spec_.order)) {
    throw ConfigError("signal shorter than 3 x filter order");
  }
  std::vector<double> out(signal.begin(), signal.end());
  // Transposed direct form II, one section at a time.
  for (const Biquad& s : sections_) {
    double z1 = 0.0;
    double z2 = 0.0;
    for (double& x : out) {
      const double y = s.b0 * x + z1;
      z1 = s.b1 * x - s.a1 * y + z2;
      z2 = s.b2 * x - s.a2 * y;
      x = y;
    }
  }
  return out;
}

Eigen::MatrixXd ButterworthBandpass::apply_rows(const Eigen::MatrixXd& signal) const {
  Eigen::MatrixXd out(signal.rows(), signal.cols());
  std::vector<double> row(static_cast<std::size_t>(signal.cols()));
  for (Eigen::Index r = 0; r < signal.rows(); ++r) {
    for (Eigen::Index c = 0; c < signal.cols(); ++c) row[c] = signal(r, c);
    const auto filtered = apply(row);
    for (Eigen::Index c = 0; c < signal.cols(); ++c) out(r, c) = filtered[c];
  }
  return out;
}

std::vector<double> bandpass_filter(std::span<const double> signal,
                                    const FilterSpec& spec) {
  return ButterworthBandpass(spec).apply(signal);
}

}  // namespace myofeat::dataio
