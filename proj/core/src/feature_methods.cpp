// Formulas for the handcrafted feature methods. Each function writes exactly
// `MethodInfo::outputs` values. The formula choices (thresholds, orders, bin
// edges) are listed in docs/features.md.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>

#include "feature_methods.hpp"
#include "myofeat/error.hpp"
#include "spectrum.hpp"

namespace myofeat::features::detail {

namespace {

using Samples = std::span<const double>;

// Lazily computed quantities shared by several methods of one channel.
class Context {
 public:
  Context(Samples x, const FeatureConfig& config) : x_(x), config_(config) {}

  Samples x() const { return x_; }
  const FeatureConfig& config() const { return config_; }

  Samples diff() {
    if (!diff_) diff_ = difference(x_);
    return *diff_;
  }
  Samples diff2() {
    if (!diff2_) diff2_ = difference(diff());
    return *diff2_;
  }
  const Spectrum& spectrum() {
    if (!spectrum_) spectrum_ = periodogram(x_, config_.sample_rate);
    return *spectrum_;
  }
  bool constant() const { return is_constant(x_); }

  static std::vector<double> difference(Samples v) {
    std::vector<double> d;
    if (v.size() < 2) return d;
    d.resize(v.size() - 1);
    for (std::size_t i = 0; i + 1 < v.size(); ++i) d[i] = v[i + 1] - v[i];
    return d;
  }

  static bool is_constant(Samples v) {
    if (v.empty()) return true;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo <= 1e-12 * std::max(1.0, std::abs(*hi));
  }

 private:
  Samples x_;
  const FeatureConfig& config_;
  std::optional<std::vector<double>> diff_, diff2_;
  std::optional<Spectrum> spectrum_;
};

double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

double mean(Samples v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double central_moment(Samples v, int order) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += std::pow(x - m, order);
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double population_std(Samples v) { return std::sqrt(central_moment(v, 2)); }

// --- amplitude primitives (reused by the difference variants) --------------

double mav(Samples v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double var_emg(Samples v) {
  // Zero-mean EMG variance: sum x^2 / (N - 1).
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += x * x;
  return s / static_cast<double>(v.size() - 1);
}

double v_order(Samples v, double order) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += std::pow(std::abs(x), order);
  return std::pow(s / static_cast<double>(v.size()), 1.0 / order);
}

double log_detector(Samples v, double eps) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += std::log(eps + std::abs(x));
  return std::exp(s / static_cast<double>(v.size()));
}

double temporal_moment3(Samples v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x * x * x;
  return std::abs(s / static_cast<double>(v.size()));
}

double sum_squares(Samples v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

// Yule-Walker estimate via Levinson-Durbin on the demeaned signal, with
// coefficients in the convention x_t = sum_i phi_i x_{t-i} + e_t.
std::vector<double> yule_walker(Samples v, int order) {
  std::vector<double> phi(static_cast<std::size_t>(order), 0.0);
  const std::size_t n = v.size();
  if (n <= static_cast<std::size_t>(order)) return phi;
  const double m = mean(v);
  std::vector<double> r(static_cast<std::size_t>(order) + 1, 0.0);
  for (int k = 0; k <= order; ++k) {
    double s = 0.0;
    for (std::size_t t = 0; t + k < n; ++t) s += (v[t] - m) * (v[t + k] - m);
    r[static_cast<std::size_t>(k)] = s / static_cast<double>(n);
  }
  if (r[0] <= 0.0) return phi;
  double err = r[0];
  std::vector<double> prev;
  for (int k = 1; k <= order; ++k) {
    double acc = r[static_cast<std::size_t>(k)];
    for (int j = 1; j < k; ++j) acc -= phi[static_cast<std::size_t>(j - 1)] * r[static_cast<std::size_t>(k - j)];
    const double reflection = acc / err;
    prev.assign(phi.begin(), phi.end());
    phi[static_cast<std::size_t>(k - 1)] = reflection;
    for (int j = 1; j < k; ++j) {
      phi[static_cast<std::size_t>(j - 1)] =
          prev[static_cast<std::size_t>(j - 1)] - reflection * prev[static_cast<std::size_t>(k - j - 1)];
    }
    err *= (1.0 - reflection * reflection);
    if (err <= 1e-14 * r[0]) break;  // perfectly predictable; higher orders stay 0
  }
  return phi;
}

// Cepstrum of the all-pole model 1 / (1 - sum phi_k z^-k).
std::vector<double> lpc_cepstrum(const std::vector<double>& phi, int order) {
  std::vector<double> c(static_cast<std::size_t>(order), 0.0);
  for (int n = 1; n <= order; ++n) {
    double v = n <= static_cast<int>(phi.size()) ? phi[static_cast<std::size_t>(n - 1)] : 0.0;
    for (int k = 1; k < n; ++k) {
      const int idx = n - k;
      const double a = idx <= static_cast<int>(phi.size()) ? phi[static_cast<std::size_t>(idx - 1)] : 0.0;
      v += (static_cast<double>(k) / n) * c[static_cast<std::size_t>(k - 1)] * a;
    }
    c[static_cast<std::size_t>(n - 1)] = v;
  }
  return c;
}

std::vector<double> hamming(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n < 2) return w;
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
  return w;
}

std::vector<double> trapezoid(std::size_t n) {
  std::vector<double> w(n, 1.0);
  const std::size_t ramp = std::max<std::size_t>(1, n / 4);
  for (std::size_t i = 0; i < n; ++i) {
    const double up = static_cast<double>(i + 1) / static_cast<double>(ramp + 1);
    const double down = static_cast<double>(n - i) / static_cast<double>(ramp + 1);
    w[i] = std::min({1.0, up, down});
  }
  return w;
}

template <typename WindowFn>
void segment_energies(Samples x, WindowFn make, std::span<double> out) {
  const std::size_t segments = out.size();
  const std::size_t n = x.size();
  for (std::size_t s = 0; s < segments; ++s) {
    const std::size_t begin = s * n / segments;
    const std::size_t end = (s + 1) * n / segments;
    const auto w = make(end - begin);
    double e = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const double v = w[i - begin] * x[i];
      e += v * v;
    }
    out[s] = e;
  }
}

// Least-squares slope of y on x.
double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

// Template-match counts for sample entropy (no self matches) with the same
// N - m templates for lengths m and m + 1.
std::pair<double, double> sampen_counts(Samples x, int m, double r) {
  const std::size_t n = x.size();
  const std::size_t templates = n - static_cast<std::size_t>(m);
  double b = 0.0, a = 0.0;
  for (std::size_t i = 0; i < templates; ++i) {
    for (std::size_t j = i + 1; j < templates; ++j) {
      bool match = true;
      for (int k = 0; k < m && match; ++k) match = std::abs(x[i + k] - x[j + k]) <= r;
      if (!match) continue;
      b += 1.0;
      if (i + m < n && j + m < n && std::abs(x[i + m] - x[j + m]) <= r) a += 1.0;
    }
  }
  return {a, b};
}

double apen_phi(Samples x, int m, double r) {
  const std::size_t n = x.size();
  const std::size_t count = n - static_cast<std::size_t>(m) + 1;
  double phi = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t c = 0;
    for (std::size_t j = 0; j < count; ++j) {
      bool match = true;
      for (int k = 0; k < m && match; ++k) match = std::abs(x[i + k] - x[j + k]) <= r;
      if (match) ++c;
    }
    phi += std::log(static_cast<double>(c) / static_cast<double>(count));
  }
  return phi / static_cast<double>(count);
}

// --- method bodies -----------------------------------------------------------

using Body = std::function<void(Context&, std::span<double>)>;

void afb(Context& c, std::span<double> out) {
  const Samples x = c.x();
  const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(c.config().afb_window), x.size());
  const auto w = hamming(len);
  const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
  std::vector<double> env(x.size() - len + 1);
  for (std::size_t i = 0; i < env.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < len; ++j) s += w[j] * x[i + j] * x[i + j];
    env[i] = std::sqrt(s / wsum);
  }
  // Amplitude of the first local maximum of the smoothed RMS envelope.
  for (std::size_t i = 1; i + 1 < env.size(); ++i) {
    if (env[i] >= env[i - 1] && env[i] > env[i + 1]) {
      out[0] = env[i];
      return;
    }
  }
  out[0] = *std::max_element(env.begin(), env.end());
}

void mmav1(Context& c, std::span<double> out) {
  const Samples x = c.x();
  const double n = static_cast<double>(x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double pos = static_cast<double>(i + 1);
    const double w = (pos >= 0.25 * n && pos <= 0.75 * n) ? 1.0 : 0.5;
    s += w * std::abs(x[i]);
  }
  out[0] = s / n;
}

void mmav2(Context& c, std::span<double> out) {
  const Samples x = c.x();
  const double n = static_cast<double>(x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double pos = static_cast<double>(i + 1);
    double w = 1.0;
    if (pos < 0.25 * n) {
      w = 4.0 * pos / n;
    } else if (pos > 0.75 * n) {
      w = 4.0 * (n - pos) / n;
    }
    s += w * std::abs(x[i]);
  }
  out[0] = s / n;
}

void fr(Context& c, std::span<double> out) {
  const auto& cfg = c.config();
  const auto& s = c.spectrum();
  out[0] = safe_ratio(s.band(cfg.fr_low_hz, cfg.fr_split_hz),
                      s.band(cfg.fr_split_hz, cfg.fr_high_hz + 1e-9));
}

void mdf(Context& c, std::span<double> out) {
  const auto& s = c.spectrum();
  const double total = s.total();
  out[0] = 0.0;
  if (total <= 0.0) return;
  double acc = 0.0;
  for (std::size_t k = 0; k < s.power.size(); ++k) {
    acc += s.power[k];
    if (acc >= 0.5 * total) {
      out[0] = s.freq[k];
      return;
    }
  }
}

void ssc(Context& c, std::span<double> out) {
  const Samples x = c.x();
  double count = 0.0;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    if ((x[i] - x[i - 1]) * (x[i] - x[i + 1]) > c.config().ssc_threshold) count += 1.0;
  }
  out[0] = count;
}

void zc(Context& c, std::span<double> out) {
  const Samples x = c.x();
  double count = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    if (x[i] * x[i + 1] < 0.0 && std::abs(x[i] - x[i + 1]) >= c.config().zc_threshold) count += 1.0;
  }
  out[0] = count;
}

void sampen(Context& c, std::span<double> out) {
  out[0] = 0.0;
  const Samples x = c.x();
  const int m = c.config().entropy_dimension;
  const double sd = population_std(x);
  if (sd <= 0.0 || c.constant() || x.size() <= static_cast<std::size_t>(m + 1)) return;
  const auto [a, b] = sampen_counts(x, m, c.config().entropy_tolerance * sd);
  if (a > 0.0 && b > 0.0) {
    out[0] = -std::log(a / b);
  } else {
    // No matches of length m + 1: report the largest resolvable entropy.
    const double templates = static_cast<double>(x.size() - static_cast<std::size_t>(m));
    out[0] = std::log(templates * (templates - 1.0) / 2.0);
  }
}

void apen(Context& c, std::span<double> out) {
  out[0] = 0.0;
  const Samples x = c.x();
  const int m = c.config().entropy_dimension;
  const double sd = population_std(x);
  if (sd <= 0.0 || c.constant() || x.size() <= static_cast<std::size_t>(m + 1)) return;
  const double r = c.config().entropy_tolerance * sd;
  out[0] = apen_phi(x, m, r) - apen_phi(x, m + 1, r);
}

void wamp(Context& c, std::span<double> out) {
  const Samples d = c.diff();
  double count = 0.0;
  for (double v : d)
    if (std::abs(v) > c.config().wamp_threshold) count += 1.0;
  out[0] = count;
}

void box_counting(Context& c, std::span<double> out) {
  out[0] = 0.0;
  if (c.constant()) return;
  const Samples x = c.x();
  const std::size_t n = x.size();
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  const double lo = *lo_it, range = *hi_it - *lo_it;
  std::vector<double> y(n), t(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = (x[i] - lo) / range;
    t[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  }
  std::vector<double> log_inv_size, log_count;
  const int max_level = static_cast<int>(std::floor(std::log2(static_cast<double>(n - 1))));
  for (int level = 1; level <= max_level; ++level) {
    const double boxes_per_axis = std::ldexp(1.0, level);
    const double eps = 1.0 / boxes_per_axis;
    const auto columns = static_cast<std::size_t>(boxes_per_axis);
    std::vector<double> col_min(columns, 2.0), col_max(columns, -1.0);
    auto touch = [&](std::size_t col, double v) {
      col_min[col] = std::min(col_min[col], v);
      col_max[col] = std::max(col_max[col], v);
    };
    for (std::size_t i = 0; i < n; ++i) {
      const auto col = std::min(columns - 1, static_cast<std::size_t>(t[i] / eps));
      touch(col, y[i]);
      // Connect the curve to its neighbours so each column sees the segment
      // that enters it.
      if (i > 0) touch(col, 0.5 * (y[i] + y[i - 1]));
      if (i + 1 < n) touch(col, 0.5 * (y[i] + y[i + 1]));
    }
    double count = 0.0;
    for (std::size_t col = 0; col < columns; ++col) {
      if (col_max[col] < col_min[col]) continue;
      const double first = std::floor(std::min(col_min[col], 1.0 - 1e-12) / eps);
      const double last = std::floor(std::min(col_max[col], 1.0 - 1e-12) / eps);
      count += last - first + 1.0;
    }
    log_inv_size.push_back(std::log(boxes_per_axis));
    log_count.push_back(std::log(count));
  }
  out[0] = log_inv_size.size() >= 2 ? slope(log_inv_size, log_count) : 0.0;
}

void katz(Context& c, std::span<double> out) {
  out[0] = 0.0;
  if (c.constant()) return;
  const Samples x = c.x();
  double length = 0.0, extent = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    length += std::abs(x[i] - x[i - 1]);
    extent = std::max(extent, std::abs(x[i] - x[0]));
  }
  const double steps = static_cast<double>(x.size() - 1);
  if (length <= 0.0 || extent <= 0.0) return;
  out[0] = std::log10(steps) / (std::log10(steps) + std::log10(extent / length));
}

void mfl(Context& c, std::span<double> out) {
  out[0] = c.constant() ? 0.0
                        : std::log10(c.config().log_epsilon + std::sqrt(sum_squares(c.diff())));
}

void ar(Samples v, const FeatureConfig& cfg, std::span<double> out) {
  const auto phi = yule_walker(v, cfg.ar_order);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i < phi.size() ? phi[i] : 0.0;
}

void cc(Samples v, const FeatureConfig& cfg, std::span<double> out) {
  const auto phi = yule_walker(v, cfg.ar_order);
  const auto cep = lpc_cepstrum(phi, cfg.cc_order);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i < cep.size() ? cep[i] : 0.0;
}

void dfa(Context& c, std::span<double> out) {
  out[0] = 0.0;
  if (c.constant()) return;
  const Samples x = c.x();
  const std::size_t n = x.size();
  const double m = mean(x);
  std::vector<double> profile(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) profile[i] = (acc += x[i] - m);

  std::vector<std::size_t> sizes;
  const double lo = 4.0, hi = std::max(5.0, static_cast<double>(n) / 4.0);
  for (int j = 0; j < 8; ++j) {
    const auto s = static_cast<std::size_t>(std::lround(lo * std::pow(hi / lo, j / 7.0)));
    if (sizes.empty() || sizes.back() != s) sizes.push_back(s);
  }
  std::vector<double> log_n, log_f;
  for (std::size_t s : sizes) {
    const std::size_t boxes = n / s;
    if (boxes == 0) continue;
    double residual = 0.0;
    for (std::size_t b = 0; b < boxes; ++b) {
      // Linear detrend of the profile inside the box.
      double st = 0, sy = 0, stt = 0, sty = 0;
      for (std::size_t i = 0; i < s; ++i) {
        const double tt = static_cast<double>(i), yy = profile[b * s + i];
        st += tt;
        sy += yy;
        stt += tt * tt;
        sty += tt * yy;
      }
      const double ds = static_cast<double>(s);
      const double den = ds * stt - st * st;
      const double k = den != 0.0 ? (ds * sty - st * sy) / den : 0.0;
      const double b0 = (sy - k * st) / ds;
      for (std::size_t i = 0; i < s; ++i) {
        const double e = profile[b * s + i] - (b0 + k * static_cast<double>(i));
        residual += e * e;
      }
    }
    const double f = std::sqrt(residual / static_cast<double>(boxes * s));
    if (f > 0.0) {
      log_n.push_back(std::log(static_cast<double>(s)));
      log_f.push_back(std::log(f));
    }
  }
  out[0] = log_n.size() >= 2 ? slope(log_n, log_f) : 0.0;
}

void psr(Context& c, std::span<double> out) {
  const auto& s = c.spectrum();
  const double total = s.total();
  out[0] = 0.0;
  if (total <= 0.0) return;
  const auto peak = static_cast<std::size_t>(
      std::distance(s.power.begin(), std::max_element(s.power.begin(), s.power.end())));
  const double hw = c.config().psr_half_width_hz;
  out[0] = s.band(s.freq[peak] - hw, s.freq[peak] + hw + 1e-9) / total;
}

void snr(Context& c, std::span<double> out) {
  const auto& cfg = c.config();
  const auto& s = c.spectrum();
  out[0] = safe_ratio(s.band(cfg.fr_low_hz, cfg.snr_noise_hz),
                      s.band(cfg.snr_noise_hz, cfg.sample_rate));
}

// Critical exponent from the scaling of the spectral moments
// I_q(U) = sum_{k<=U} P_k k^q. For P ~ k^-beta the moment exponent
// tau(q) = d log I_q / d log U bends at q = beta - 1 = 2H; the bend is located
// by the maximum of the second difference of tau. Reported as D = 2 - H.
void critical_exponent(Context& c, std::span<double> out) {
  out[0] = 0.0;
  if (c.constant()) return;
  const auto& s = c.spectrum();
  const std::size_t bins = s.power.size() - 1;  // skip DC
  if (bins < 4) return;
  const std::size_t half = bins / 2;
  constexpr double q_lo = -2.0, q_hi = 4.0, dq = 0.02;
  const int steps = static_cast<int>(std::lround((q_hi - q_lo) / dq)) + 1;
  std::vector<double> tau(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    const double q = q_lo + dq * i;
    double full = 0.0, partial = 0.0;
    for (std::size_t k = 1; k <= bins; ++k) {
      const double term = s.power[k] * std::pow(static_cast<double>(k), q);
      full += term;
      if (k <= half) partial += term;
    }
    if (full <= 0.0 || partial <= 0.0) return;
    tau[static_cast<std::size_t>(i)] =
        (std::log(full) - std::log(partial)) / std::log(static_cast<double>(bins) / half);
  }
  int best = 1;
  double best_curv = -std::numeric_limits<double>::infinity();
  for (int i = 1; i + 1 < steps; ++i) {
    const double curv = tau[static_cast<std::size_t>(i + 1)] - 2.0 * tau[static_cast<std::size_t>(i)] +
                        tau[static_cast<std::size_t>(i - 1)];
    if (curv > best_curv) {
      best_curv = curv;
      best = i;
    }
  }
  const double alpha = q_lo + dq * best;
  out[0] = 2.0 - alpha / 2.0;
}

void dpr(Context& c, std::span<double> out) {
  out[0] = 0.0;
  const auto& cfg = c.config();
  const auto& s = c.spectrum();
  std::vector<double> band;
  for (std::size_t k = 0; k < s.power.size(); ++k)
    if (s.freq[k] >= cfg.fr_low_hz && s.freq[k] <= cfg.fr_high_hz) band.push_back(s.power[k]);
  const auto w = static_cast<std::size_t>(std::max(1, cfg.dpr_smoothing_bins));
  if (band.size() < w) return;
  double hi = -1.0, lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + w <= band.size(); ++i) {
    double m = 0.0;
    for (std::size_t j = 0; j < w; ++j) m += band[i + j];
    m /= static_cast<double>(w);
    hi = std::max(hi, m);
    lo = std::min(lo, m);
  }
  if (hi <= 0.0) return;
  out[0] = std::log10(hi / std::max(lo, cfg.log_epsilon * hi));
}

void hist(Context& c, std::span<double> out) {
  const Samples x = c.x();
  const double m = mean(x);
  const double sd = population_std(x);
  std::fill(out.begin(), out.end(), 0.0);
  const auto bins = out.size();
  if (sd <= 0.0 || c.constant()) {
    out[bins / 2] = static_cast<double>(x.size());
    return;
  }
  const double lo = m - 3.0 * sd;
  const double width = 6.0 * sd / static_cast<double>(bins);
  for (double v : x) {
    const double pos = std::floor((v - lo) / width);
    const auto b = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
    out[b] += 1.0;
  }
}

void kurt(Context& c, std::span<double> out) {
  const double m2 = central_moment(c.x(), 2);
  out[0] = (m2 <= 0.0 || c.constant()) ? 0.0 : central_moment(c.x(), 4) / (m2 * m2) - 3.0;
}

void skew(Context& c, std::span<double> out) {
  const double m2 = central_moment(c.x(), 2);
  out[0] = (m2 <= 0.0 || c.constant()) ? 0.0 : central_moment(c.x(), 3) / std::pow(m2, 1.5);
}

void mavs(Context& c, std::span<double> out) {
  const Samples x = c.x();
  const std::size_t half = x.size() / 2;
  out[0] = mav(x.subspan(half)) - mav(x.first(half));
}

void ohm(Context& c, std::span<double> out) {
  const auto& s = c.spectrum();
  const double m0 = s.total(), m1 = s.moment(1), m2 = s.moment(2);
  out[0] = (m0 > 0.0 && m1 > 0.0) ? std::sqrt(m2 / m0) / (m1 / m0) : 0.0;
}

void pkf(Context& c, std::span<double> out) {
  const auto& s = c.spectrum();
  const auto peak = std::distance(s.power.begin(), std::max_element(s.power.begin(), s.power.end()));
  out[0] = s.freq[static_cast<std::size_t>(peak)];
}

void psdfd(Context& c, std::span<double> out) {
  out[0] = 0.0;
  if (c.constant()) return;
  const auto& cfg = c.config();
  const auto& s = c.spectrum();
  std::vector<double> lf, lp;
  for (std::size_t k = 1; k < s.power.size(); ++k) {
    if (s.freq[k] >= cfg.fr_low_hz && s.freq[k] <= cfg.fr_high_hz && s.power[k] > 0.0) {
      lf.push_back(std::log10(s.freq[k]));
      lp.push_back(std::log10(s.power[k]));
    }
  }
  if (lf.size() < 2) return;
  const double beta = -slope(lf, lp);
  out[0] = (5.0 - beta) / 2.0;
}

void smr(Context& c, std::span<double> out) {
  const auto& cfg = c.config();
  const auto& s = c.spectrum();
  out[0] = safe_ratio(s.band(cfg.smr_artifact_hz, cfg.sample_rate), s.band(0.0, cfg.smr_artifact_hz));
}

void tdpsd(Context& c, std::span<double> out) {
  const auto& cfg = c.config();
  const double eps = cfg.log_epsilon;
  const double lambda = cfg.tdpsd_lambda;
  auto normalise = [&](double m) { return std::pow(m, lambda) / lambda; };
  const double m0 = normalise(std::sqrt(sum_squares(c.x())));
  const double m2 = normalise(std::sqrt(sum_squares(c.diff())));
  const double m4 = normalise(std::sqrt(sum_squares(c.diff2())));
  auto slog = [&](double v) { return std::log(eps + std::abs(v)); };
  double wl1 = 0.0, wl2 = 0.0;
  for (double v : c.diff()) wl1 += std::abs(v);
  for (double v : c.diff2()) wl2 += std::abs(v);
  out[0] = slog(m0);
  out[1] = slog(m0 - m2);
  out[2] = slog(m0 - m4);
  out[3] = slog(safe_ratio(m0, std::sqrt(std::abs((m0 - m2) * (m0 - m4)))));
  out[4] = slog(safe_ratio(m2, std::sqrt(m0 * m4)));
  out[5] = slog(safe_ratio(wl1, wl2));
}

void vcf(Context& c, std::span<double> out) {
  const auto& s = c.spectrum();
  const double m0 = s.total();
  if (m0 <= 0.0) {
    out[0] = 0.0;
    return;
  }
  const double f1 = s.moment(1) / m0;
  out[0] = s.moment(2) / m0 - f1 * f1;
}

void vfd(Context& c, std::span<double> out) {
  out[0] = 0.0;
  if (c.constant()) return;
  const Samples x = c.x();
  std::vector<double> lk, lv;
  for (std::size_t lag = 1; lag < x.size() / 2; lag *= 2) {
    std::vector<double> inc(x.size() - lag);
    for (std::size_t i = 0; i + lag < x.size(); ++i) inc[i] = x[i + lag] - x[i];
    const double v = central_moment(inc, 2);
    if (v > 0.0) {
      lk.push_back(std::log(static_cast<double>(lag)));
      lv.push_back(std::log(v));
    }
  }
  if (lk.size() < 2) return;
  const double hurst = slope(lk, lv) / 2.0;
  out[0] = 2.0 - hurst;
}

struct Entry {
  MethodInfo info;
  Body body;
};

Body scalar(std::function<double(Context&)> f) {
  return [f = std::move(f)](Context& c, std::span<double> out) { out[0] = f(c); };
}

const std::vector<Entry>& table() {
  static const std::vector<Entry> entries = [] {
    using G = Group;
    std::vector<Entry> e;
    auto add = [&](std::string_view name, G g, int outputs, Body body) {
      e.push_back({{name, g, outputs}, std::move(body)});
    };
    // SAP
    add("AFB", G::SAP, 1, afb);
    add("DAMV", G::SAP, 1, scalar([](Context& c) { return mav(c.diff()); }));
    add("DASDV", G::SAP, 1, scalar([](Context& c) {
          return std::sqrt(sum_squares(c.diff()) / static_cast<double>(c.diff().size()));
        }));
    add("DLD", G::SAP, 1, scalar([](Context& c) { return log_detector(c.diff(), c.config().log_epsilon); }));
    add("DTM", G::SAP, 1, scalar([](Context& c) { return temporal_moment3(c.diff()); }));
    add("DVARV", G::SAP, 1, scalar([](Context& c) { return var_emg(c.diff()); }));
    add("DV", G::SAP, 1, scalar([](Context& c) { return v_order(c.diff(), c.config().v_order); }));
    add("IEMG", G::SAP, 1, scalar([](Context& c) { return mav(c.x()) * static_cast<double>(c.x().size()); }));
    add("LD", G::SAP, 1, scalar([](Context& c) { return log_detector(c.x(), c.config().log_epsilon); }));
    add("M2", G::SAP, 1, scalar([](Context& c) { return sum_squares(c.diff()); }));
    add("MMAV1", G::SAP, 1, mmav1);
    add("MMAV2", G::SAP, 1, mmav2);
    add("MAV", G::SAP, 1, scalar([](Context& c) { return mav(c.x()); }));
    add("MAX", G::SAP, 1, scalar([](Context& c) {
          double m = 0.0;
          for (double v : c.x()) m = std::max(m, std::abs(v));
          return m;
        }));
    add("MHW", G::SAP, 3, [](Context& c, std::span<double> out) { segment_energies(c.x(), hamming, out); });
    add("MNP", G::SAP, 1, scalar([](Context& c) {
          return c.spectrum().total() / static_cast<double>(c.spectrum().power.size());
        }));
    add("MTW", G::SAP, 3, [](Context& c, std::span<double> out) { segment_energies(c.x(), trapezoid, out); });
    add("RMS", G::SAP, 1, scalar([](Context& c) {
          return std::sqrt(sum_squares(c.x()) / static_cast<double>(c.x().size()));
        }));
    add("SM", G::SAP, 1, scalar([](Context& c) { return c.spectrum().moment(2); }));
    add("SSI", G::SAP, 1, scalar([](Context& c) { return sum_squares(c.x()); }));
    add("TM", G::SAP, 1, scalar([](Context& c) { return temporal_moment3(c.x()); }));
    add("TTP", G::SAP, 1, scalar([](Context& c) { return c.spectrum().total(); }));
    add("VAR", G::SAP, 1, scalar([](Context& c) { return var_emg(c.x()); }));
    add("V", G::SAP, 1, scalar([](Context& c) { return v_order(c.x(), c.config().v_order); }));
    add("WL", G::SAP, 1, scalar([](Context& c) { return mav(c.diff()) * static_cast<double>(c.diff().size()); }));
    // FI
    add("FR", G::FI, 1, fr);
    add("MDF", G::FI, 1, mdf);
    add("MNF", G::FI, 1, scalar([](Context& c) {
          return safe_ratio(c.spectrum().moment(1), c.spectrum().total());
        }));
    add("SSC", G::FI, 1, ssc);
    add("ZC", G::FI, 1, zc);
    // NLC
    add("SAMPEN", G::NLC, 1, sampen);
    add("APEN", G::NLC, 1, apen);
    add("WAMP", G::NLC, 1, wamp);
    add("BC", G::NLC, 1, box_counting);
    add("KATZ", G::NLC, 1, katz);
    add("MFL", G::NLC, 1, mfl);
    // TSM
    add("AR", G::TSM, 4, [](Context& c, std::span<double> out) { ar(c.x(), c.config(), out); });
    add("CC", G::TSM, 4, [](Context& c, std::span<double> out) { cc(c.x(), c.config(), out); });
    add("DAR", G::TSM, 4, [](Context& c, std::span<double> out) { ar(c.diff(), c.config(), out); });
    add("DCC", G::TSM, 4, [](Context& c, std::span<double> out) { cc(c.diff(), c.config(), out); });
    add("DFA", G::TSM, 1, dfa);
    add("PSR", G::TSM, 1, psr);
    add("SNR", G::TSM, 1, snr);
    // UNI
    add("CE", G::UNI, 1, critical_exponent);
    add("DPR", G::UNI, 1, dpr);
    add("HIST", G::UNI, 3, hist);
    add("KURT", G::UNI, 1, kurt);
    add("MAVS", G::UNI, 1, mavs);
    add("OHM", G::UNI, 1, ohm);
    add("PKF", G::UNI, 1, pkf);
    add("PSDFD", G::UNI, 1, psdfd);
    add("SKEW", G::UNI, 1, skew);
    add("SMR", G::UNI, 1, smr);
    add("TDPSD", G::UNI, 6, tdpsd);
    add("VCF", G::UNI, 1, vcf);
    add("VFD", G::UNI, 1, vfd);
    return e;
  }();
  return entries;
}

const Entry& find(std::string_view method) {
  for (const auto& e : table())
    if (e.info.name == method) return e;
  throw ConfigError("unknown feature method '" + std::string(method) + "'");
}

void check_input(Samples samples) {
  if (samples.size() < 8) throw ConfigError("feature extraction needs at least 8 samples");
}

}  // namespace

std::span<const MethodInfo> methods() {
  static const std::vector<MethodInfo> infos = [] {
    std::vector<MethodInfo> v;
    for (const auto& e : table()) v.push_back(e.info);
    return v;
  }();
  return infos;
}

void evaluate_method(std::string_view method, Samples samples, const FeatureConfig& config,
                     std::span<double> out) {
  check_input(samples);
  const auto& e = find(method);
  Context ctx(samples, config);
  e.body(ctx, out.first(static_cast<std::size_t>(e.info.outputs)));
}

void evaluate_all(Samples samples, const FeatureConfig& config, std::span<double> out) {
  check_input(samples);
  Context ctx(samples, config);
  std::size_t offset = 0;
  for (const auto& e : table()) {
    const auto n = static_cast<std::size_t>(e.info.outputs);
    e.body(ctx, out.subspan(offset, n));
    offset += n;
  }
}

}  // namespace myofeat::features::detail
