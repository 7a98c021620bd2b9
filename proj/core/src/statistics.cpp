#include <algorithm>
#include <cmath>
#include <numeric>

#include "myofeat/error.hpp"
#include "myofeat/evaluate.hpp"

namespace myofeat::evaluate {

namespace {

// Average ranks (1-based) of the magnitudes, doubled so they stay integral.
std::vector<long> doubled_ranks(const std::vector<double>& magnitude) {
  const std::size_t n = magnitude.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return magnitude[a] < magnitude[b]; });
  std::vector<long> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && magnitude[order[j + 1]] == magnitude[order[i]]) ++j;
    // Positions i..j share the mean rank (i + 1 + j + 1) / 2.
    const long twice = static_cast<long>(i + j + 2);
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = twice;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences, int exact_max_n) {
  std::vector<double> magnitude;
  std::vector<bool> positive;
  for (double d : differences) {
    if (!std::isfinite(d)) throw NumericError("non-finite difference");
    if (d == 0.0) continue;
    magnitude.push_back(std::abs(d));
    positive.push_back(d > 0.0);
  }
  if (magnitude.empty()) throw ConfigError("no signal: all differences are zero");
  const int n = static_cast<int>(magnitude.size());
  if (n < 5) throw ConfigError("signed-rank test needs at least 5 nonzero differences, got " + std::to_string(n));
  const auto ranks = doubled_ranks(magnitude);
  long w2 = 0;  // doubled W+
  for (int i = 0; i < n; ++i)
    if (positive[static_cast<std::size_t>(i)]) w2 += ranks[static_cast<std::size_t>(i)];
  const long total2 = std::accumulate(ranks.begin(), ranks.end(), 0L);

  WilcoxonResult result;
  result.n = n;
  result.w_plus = static_cast<double>(w2) / 2.0;
  if (n <= exact_max_n) {
    // Null distribution of doubled W+ over all 2^n sign assignments.
    std::vector<double> ways(static_cast<std::size_t>(total2) + 1, 0.0);
    ways[0] = 1.0;
    long reach = 0;
    for (long r : ranks) {
      for (long s = reach; s >= 0; --s)
        if (ways[static_cast<std::size_t>(s)] != 0.0) ways[static_cast<std::size_t>(s + r)] += ways[static_cast<std::size_t>(s)];
      reach += r;
    }
    const double all = std::ldexp(1.0, n);
    double lower = 0.0, upper = 0.0;
    for (long s = 0; s <= total2; ++s) {
      if (s <= w2) lower += ways[static_cast<std::size_t>(s)];
      if (s >= w2) upper += ways[static_cast<std::size_t>(s)];
    }
    result.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / all);
    result.exact = true;
    return result;
  }
  const double nn = n;
  const double mean = nn * (nn + 1.0) / 4.0;
  double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
  // Tie correction: groups of equal magnitude share a doubled rank.
  std::vector<long> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    var -= (t * t * t - t) / 48.0;
    i = j;
  }
  if (!(var > 0.0)) throw NumericError("signed-rank variance vanished");
  const double z = std::max(0.0, std::abs(result.w_plus - mean) - 0.5) / std::sqrt(var);
  result.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return result;
}

std::string effect_label(double d) {
  const double a = std::abs(d);
  if (a >= 2.0) return "huge";
  if (a >= 1.2) return "very large";
  if (a >= 0.8) return "large";
  if (a >= 0.5) return "medium";
  if (a >= 0.2) return "small";
  return "very small";
}

EffectSize cohens_d(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw ConfigError("Cohen's d needs at least 2 values per sample");
  auto moments = [](std::span<const double> v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::pair{mean, ss};
  };
  const auto [ma, ssa] = moments(a);
  const auto [mb, ssb] = moments(b);
  const double pooled = std::sqrt((ssa + ssb) / static_cast<double>(a.size() + b.size() - 2));
  if (!(pooled > 0.0)) throw NumericError("Cohen's d undefined: zero pooled standard deviation");
  const double d = (ma - mb) / pooled;
  return {d, effect_label(d)};
}

}  // namespace myofeat::evaluate
