#include <cmath>
#include <numbers>

#include "myofeat/dataio.hpp"
#include "myofeat/error.hpp"
#include "myofeat/rng.hpp"

namespace myofeat::dataio {

namespace {

struct ClassProfile {
  std::array<double, kChannels> pattern{};
  double center_hz = 100.0;
  double q = 1.5;
};

// Unit-RMS band-limited noise from a constant-peak-gain resonator.
std::vector<double> band_noise(Rng& rng, int samples, double center_hz, double q) {
  constexpr int kWarmup = 200;
  const double w0 = 2.0 * std::numbers::pi * center_hz / kSampleRate;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double b0 = alpha / a0, b2 = -alpha / a0;
  const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
  std::vector<double> out(static_cast<std::size_t>(samples));
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (int t = -kWarmup; t < samples; ++t) {
    const double x = rng.normal();
    const double y = b0 * x + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = y;
    if (t >= 0) out[static_cast<std::size_t>(t)] = y;
  }
  double ss = 0.0;
  for (double v : out) ss += v * v;
  const double rms = std::sqrt(ss / samples);
  if (rms > 0.0)
    for (double& v : out) v /= rms;
  return out;
}

std::vector<ClassProfile> make_classes(Rng& rng, int n_classes) {
  std::vector<ClassProfile> classes(static_cast<std::size_t>(n_classes));
  const double spacing = static_cast<double>(kChannels) / n_classes;
  for (int c = 0; c < n_classes; ++c) {
    auto& p = classes[static_cast<std::size_t>(c)];
    // One dominant muscle site per class spread around the band, plus a
    // weaker secondary site so patterns are not pure rotations of each other.
    const double main_site = c * spacing + rng.uniform(-0.3, 0.3);
    const double second_site = main_site + rng.uniform(2.5, 5.0);
    const double second_weight = rng.uniform(0.25, 0.6);
    const double width = rng.uniform(1.0, 1.8);
    const double level = c == 0 ? 0.25 : rng.uniform(0.6, 1.4);
    for (int ch = 0; ch < kChannels; ++ch) {
      auto bump = [&](double site) {
        double d = std::fmod(std::abs(ch - site), static_cast<double>(kChannels));
        d = std::min(d, kChannels - d);
        return std::exp(-0.5 * d * d / (width * width));
      };
      p.pattern[static_cast<std::size_t>(ch)] =
          level * (0.12 + bump(main_site) + second_weight * bump(second_site));
    }
    p.center_hz = 60.0 + 160.0 * (n_classes > 1 ? static_cast<double>(c) / (n_classes - 1) : 0.5) +
                  rng.uniform(-10.0, 10.0);
    p.q = rng.uniform(1.0, 2.0);
  }
  return classes;
}

// Circular fractional channel shift: output channel ch reads input position
// ch - rotation with linear interpolation between neighbouring electrodes.
Eigen::MatrixXd rotate_channels(const Eigen::MatrixXd& x, double rotation) {
  Eigen::MatrixXd out(x.rows(), x.cols());
  const double floor_r = std::floor(rotation);
  const int k = static_cast<int>(floor_r);
  const double frac = rotation - floor_r;
  for (int ch = 0; ch < kChannels; ++ch) {
    const int a = ((ch - k) % kChannels + kChannels) % kChannels;
    const int b = ((ch - k - 1) % kChannels + kChannels) % kChannels;
    out.row(ch) = (1.0 - frac) * x.row(a) + frac * x.row(b);
  }
  return out;
}

}  // namespace

std::vector<DomainDistortion> synth_domains(const SynthConfig& config) {
  if (config.n_domains < 2) throw ConfigError("synthetic data needs at least 2 domains");
  Rng rng(config.seed ^ 0xD0A1ULL);
  // Stratified log-uniform gains so the domains span the whole gain range.
  std::vector<int> order(static_cast<std::size_t>(config.n_domains));
  for (int i = 0; i < config.n_domains; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);
  const double lo = std::log(config.min_gain), hi = std::log(config.max_gain);
  std::vector<DomainDistortion> out;
  for (int d = 0; d < config.n_domains; ++d) {
    const double u = (order[static_cast<std::size_t>(d)] + rng.uniform()) / config.n_domains;
    out.push_back({rng.uniform(-config.max_rotation, config.max_rotation),
                   std::exp(lo + u * (hi - lo))});
  }
  return out;
}

std::vector<Recording> synth_generate(const SynthConfig& config) {
  if (config.n_domains < 2) throw ConfigError("synthetic data needs at least 2 domains");
  if (config.n_classes < 2 || config.n_classes > kGestures) {
    throw ConfigError("synthetic data needs between 2 and 11 classes");
  }
  if (config.n_cycles < 1) throw ConfigError("synthetic data needs at least one cycle");
  if (config.samples_per_recording < kWindowLength) {
    throw ConfigError("recordings must hold at least one 151-sample window");
  }
  Rng class_rng(config.seed);
  const auto classes = make_classes(class_rng, config.n_classes);
  const auto domains = synth_domains(config);

  Rng rng(config.seed ^ 0x5EEDULL);
  std::vector<Recording> out;
  for (int d = 0; d < config.n_domains; ++d) {
    const auto& dist = domains[static_cast<std::size_t>(d)];
    for (int cycle = 1; cycle <= config.n_cycles; ++cycle) {
      for (int g = 0; g < config.n_classes; ++g) {
        const auto& cls = classes[static_cast<std::size_t>(g)];
        const double cycle_scale = std::max(0.2, 1.0 + config.cycle_jitter * rng.normal());
        Eigen::MatrixXd x(kChannels, config.samples_per_recording);
        for (int ch = 0; ch < kChannels; ++ch) {
          const double amp = config.amplitude * cls.pattern[static_cast<std::size_t>(ch)] *
                             cycle_scale *
                             std::max(0.2, 1.0 + 0.5 * config.cycle_jitter * rng.normal());
          const auto noise = band_noise(rng, config.samples_per_recording, cls.center_hz, cls.q);
          for (int t = 0; t < config.samples_per_recording; ++t) {
            x(ch, t) = amp * noise[static_cast<std::size_t>(t)];
          }
        }
        x = dist.gain * rotate_channels(x, dist.rotation);
        for (int ch = 0; ch < kChannels; ++ch)
          for (int t = 0; t < config.samples_per_recording; ++t)
            x(ch, t) += config.noise_floor * rng.normal();
        out.push_back({d + 1, cycle, g, std::move(x), kSampleRate});
      }
    }
  }
  return out;
}

std::vector<Recording> synth_generate(int n_domains, int n_classes, std::uint64_t seed) {
  SynthConfig config;
  config.n_domains = n_domains;
  config.n_classes = n_classes;
  config.seed = seed;
  return synth_generate(config);
}

}  // namespace myofeat::dataio
