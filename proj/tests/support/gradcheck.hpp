#pragma once

// Finite-difference checks of the network gradients in double precision.

#include <algorithm>
#include <cmath>
#include <vector>

#include "myofeat/convnet.hpp"
#include "myofeat/rng.hpp"

namespace oracle {

/// A fixed loss over one batch: gesture cross-entropy plus, when domain
/// labels are given, domain_weight times the domain cross-entropy. The
/// dropout RNG is reseeded on every evaluation so the masks stay fixed.
struct BatchLoss {
  myofeat::convnet::Mat<double> input;
  int batch = 0;
  std::vector<int> gestures;
  std::vector<int> domains;
  double domain_weight = 1.0;
  myofeat::convnet::Mode mode = myofeat::convnet::Mode::Train;
  std::uint64_t dropout_seed = 77;

  myofeat::convnet::Tape<double> run(myofeat::convnet::ConvNet<double>& net) const {
    myofeat::Rng rng(dropout_seed);
    myofeat::convnet::ForwardOptions f;
    f.mode = mode;
    f.update_stats = false;
    f.domain_head = !domains.empty();
    f.rng = &rng;
    return net.forward(input, batch, f);
  }

  double value(myofeat::convnet::ConvNet<double>& net, bool gesture_term = true, bool domain_term = true) const {
    const auto tape = run(net);
    myofeat::convnet::Mat<double> d;
    double loss = 0.0;
    if (gesture_term) loss += myofeat::convnet::softmax_cross_entropy<double>(tape.gesture_logits, gestures, d);
    if (domain_term && !domains.empty())
      loss += domain_weight * myofeat::convnet::softmax_cross_entropy<double>(tape.domain_logits, domains, d);
    return loss;
  }

  /// Analytic gradient of value() with the given reversal factor.
  std::vector<double> gradient(myofeat::convnet::ConvNet<double>& net, double reversal = 1.0,
                               bool gesture_term = true, bool domain_term = true) const {
    const auto tape = run(net);
    myofeat::convnet::Mat<double> dg, dd;
    myofeat::convnet::softmax_cross_entropy<double>(tape.gesture_logits, gestures, dg);
    if (!gesture_term) dg.setZero();
    std::vector<double> grad(net.parameter_count(), 0.0);
    myofeat::convnet::BackwardOptions b;
    b.reversal = reversal;
    const myofeat::convnet::Mat<double>* dptr = nullptr;
    if (domain_term && !domains.empty()) {
      myofeat::convnet::softmax_cross_entropy<double>(tape.domain_logits, domains, dd);
      dd *= domain_weight;
      dptr = &dd;
    }
    net.backward(tape, dg, dptr, grad, b);
    return grad;
  }
};

/// Agreement test used throughout: |a - f| <= rel * max(|a|, |f|) + abs.
inline bool gradients_agree(double analytic, double numeric, double rel = 1e-4, double abs = 1e-7) {
  return std::abs(analytic - numeric) <= rel * std::max(std::abs(analytic), std::abs(numeric)) + abs;
}

/// Central difference of a loss with respect to parameter i.
template <class F>
double parameter_fd(myofeat::convnet::ConvNet<double>& net, std::size_t i, F&& loss, double h = 1e-5) {
  auto p = net.parameters();
  const double keep = p[i];
  p[i] = keep + h;
  const double up = loss();
  p[i] = keep - h;
  const double down = loss();
  p[i] = keep;
  return (up - down) / (2.0 * h);
}

struct GradCheckReport {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst = 0.0;  // largest |a - f| as a fraction of the allowed error; <= 1 passes
};

inline void record(GradCheckReport& r, double a, double f, double rel = 1e-4, double abs = 1e-7) {
  ++r.checked;
  if (!gradients_agree(a, f, rel, abs)) ++r.failed;
  r.worst = std::max(r.worst, std::abs(a - f) / (rel * std::max(std::abs(a), std::abs(f)) + abs));
}

}  // namespace oracle
