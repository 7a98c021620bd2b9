#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "myofeat/convnet.hpp"
#include "myofeat/error.hpp"

namespace myofeat::convnet {

namespace {

using Stride = Eigen::OuterStride<>;

std::string block_name(int b, const char* part) { return "B" + std::to_string(b) + "." + part; }

}  // namespace

void Architecture::validate() const {
  if (channels < 1 || length < 2 || maps < 1 || kernel < 1 || blocks < 1 || gestures < 2 ||
      domain_outputs < 1) {
    throw ConfigError("architecture dimensions must be positive");
  }
  if (block_length(blocks) < 1) {
    throw ConfigError("architecture: " + std::to_string(blocks) + " blocks of kernel " +
                      std::to_string(kernel) + " do not fit " + std::to_string(length) + " samples");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0,1)");
  if (!(bn_eps > 0.0)) throw ConfigError("bn_eps must be positive");
  if (!(bn_momentum > 0.0 && bn_momentum <= 1.0)) throw ConfigError("bn_momentum must be in (0,1]");
}

std::size_t Architecture::parameter_count(bool with_domain_head) const {
  std::size_t n = 0;
  for (int b = 1; b <= blocks; ++b) {
    n += static_cast<std::size_t>(maps) * kernel * block_inputs(b) + 3 * static_cast<std::size_t>(maps);
  }
  const auto f = static_cast<std::size_t>(head_inputs());
  n += f * gestures + gestures;
  if (with_domain_head) n += f * domain_outputs + domain_outputs;
  return n;
}

std::uint64_t Architecture::hash() const {
  // FNV-1a over the shape fields; floating point fields by bit pattern.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  };
  for (int v : {channels, length, maps, kernel, blocks, gestures, domain_outputs}) {
    mix(static_cast<std::uint64_t>(v));
  }
  for (double v : {leak, dropout, bn_eps, bn_momentum}) mix(std::bit_cast<std::uint64_t>(v));
  return h;
}

// ---------------------------------------------------------------------------

template <class T>
ConvNet<T>::ConvNet(const Architecture& arch, std::uint64_t seed) : arch_(arch) {
  arch_.validate();
  for (int b = 1; b <= arch_.blocks; ++b) {
    add_group(block_name(b, "conv.weight"),
              static_cast<std::size_t>(arch_.maps) * arch_.kernel * arch_.block_inputs(b));
    add_group(block_name(b, "conv.bias"), static_cast<std::size_t>(arch_.maps));
    add_group(block_name(b, "bn.scale"), static_cast<std::size_t>(arch_.maps));
    add_group(block_name(b, "bn.shift"), static_cast<std::size_t>(arch_.maps));
  }
  const auto f = static_cast<std::size_t>(arch_.head_inputs());
  add_group("gesture.weight", f * arch_.gestures);
  add_group("gesture.bias", static_cast<std::size_t>(arch_.gestures));
  add_group("domain.weight", f * arch_.domain_outputs);
  add_group("domain.bias", static_cast<std::size_t>(arch_.domain_outputs));
  params_.setZero(static_cast<Eigen::Index>(groups_.back().offset + groups_.back().size));

  Rng rng(seed);
  auto fill = [&](const std::string& name, double bound) {
    const auto& g = group(name);
    for (std::size_t i = 0; i < g.size; ++i) {
      params_[static_cast<Eigen::Index>(g.offset + i)] = static_cast<T>(rng.uniform(-bound, bound));
    }
  };
  for (int b = 1; b <= arch_.blocks; ++b) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(arch_.kernel * arch_.block_inputs(b)));
    fill(block_name(b, "conv.weight"), bound);
    fill(block_name(b, "conv.bias"), bound);
    bn_scale(b).setOnes();
  }
  const double head_bound = 1.0 / std::sqrt(static_cast<double>(f));
  fill("gesture.weight", head_bound);
  fill("gesture.bias", head_bound);
  fill("domain.weight", head_bound);
  fill("domain.bias", head_bound);
}

template <class T>
void ConvNet<T>::add_group(const std::string& name, std::size_t size) {
  const std::size_t offset = groups_.empty() ? 0 : groups_.back().offset + groups_.back().size;
  groups_.push_back({name, offset, size});
}

template <class T>
const ParamGroup& ConvNet<T>::group(const std::string& name) const {
  for (const auto& g : groups_)
    if (g.name == name) return g;
  throw ConfigError("unknown parameter group '" + name + "'");
}

template <class T>
void ConvNet<T>::set_parameters(std::span<const T> values) {
  if (values.size() != parameter_count()) {
    throw ConfigError("expected " + std::to_string(parameter_count()) + " parameters, got " +
                      std::to_string(values.size()));
  }
  std::copy(values.begin(), values.end(), params_.data());
}

#define MYOFEAT_VIEW(ret, fn, name_expr, rows, cols)                          \
  template <class T>                                                          \
  Eigen::Map<const ret> ConvNet<T>::fn const {                                \
    const auto& g = group(name_expr);                                         \
    return Eigen::Map<const ret>(params_.data() + g.offset, rows, cols);      \
  }                                                                           \
  template <class T>                                                          \
  Eigen::Map<ret> ConvNet<T>::fn {                                            \
    const auto& g = group(name_expr);                                         \
    return Eigen::Map<ret>(params_.data() + g.offset, rows, cols);            \
  }

MYOFEAT_VIEW(Mat<T>, conv_weight(int b), block_name(b, "conv.weight"), arch_.maps,
             arch_.kernel* arch_.block_inputs(b))
MYOFEAT_VIEW(Vec<T>, conv_bias(int b), block_name(b, "conv.bias"), arch_.maps, 1)
MYOFEAT_VIEW(Vec<T>, bn_scale(int b), block_name(b, "bn.scale"), arch_.maps, 1)
MYOFEAT_VIEW(Vec<T>, bn_shift(int b), block_name(b, "bn.shift"), arch_.maps, 1)
MYOFEAT_VIEW(Mat<T>, gesture_weight(), "gesture.weight", arch_.gestures, arch_.head_inputs())
MYOFEAT_VIEW(Vec<T>, gesture_bias(), "gesture.bias", arch_.gestures, 1)
MYOFEAT_VIEW(Mat<T>, domain_weight(), "domain.weight", arch_.domain_outputs, arch_.head_inputs())
MYOFEAT_VIEW(Vec<T>, domain_bias(), "domain.bias", arch_.domain_outputs, 1)
#undef MYOFEAT_VIEW

template <class T>
const BnStats<T>& ConvNet<T>::stats(int domain) const {
  const auto it = stats_.find(domain);
  if (it == stats_.end()) throw ConfigError("no BN statistics for domain " + std::to_string(domain));
  return it->second;
}

template <class T>
void ConvNet<T>::set_stats(int domain, BnStats<T> stats) {
  if (static_cast<int>(stats.mean.size()) != arch_.blocks ||
      static_cast<int>(stats.var.size()) != arch_.blocks) {
    throw ConfigError("BN statistics must cover every block");
  }
  for (int b = 0; b < arch_.blocks; ++b) {
    if (stats.mean[static_cast<std::size_t>(b)].size() != arch_.maps ||
        stats.var[static_cast<std::size_t>(b)].size() != arch_.maps) {
      throw ConfigError("BN statistics must hold one value per map");
    }
  }
  stats_[domain] = std::move(stats);
}

template <class T>
std::vector<int> ConvNet<T>::stat_domains() const {
  std::vector<int> out;
  for (const auto& [d, s] : stats_) out.push_back(d);
  return out;
}

// ---------------------------------------------------------------------------

// Valid 1-D convolution along time of every (window, channel) row. For each
// output step t the kernel windows of all rows form one strided view of the
// input, so the step is a single matrix product without an im2col copy.
template <class T>
Mat<T> ConvNet<T>::convolve(int b, const Mat<T>& in, int rows) const {
  const int cin = arch_.block_inputs(b);
  const int k = arch_.kernel;
  const int lin = arch_.block_length(b - 1);
  const int lout = arch_.block_length(b);
  const int maps = arch_.maps;
  const auto w = conv_weight(b);
  Mat<T> z(maps, static_cast<Eigen::Index>(rows) * lout);
  for (int t = 0; t < lout; ++t) {
    Eigen::Map<const Mat<T>, 0, Stride> x(in.data() + static_cast<Eigen::Index>(t) * cin, k * cin,
                                          rows, Stride(static_cast<Eigen::Index>(lin) * cin));
    Eigen::Map<Mat<T>, 0, Stride> zt(z.data() + static_cast<Eigen::Index>(t) * maps, maps, rows,
                                     Stride(static_cast<Eigen::Index>(lout) * maps));
    zt.noalias() = w * x;
  }
  z.colwise() += conv_bias(b);
  return z;
}

template <class T>
Tape<T> ConvNet<T>::forward(const Mat<T>& input, int batch, const ForwardOptions& options) {
  const int rows = batch * arch_.channels;
  if (batch < 1 || input.rows() != 1 ||
      input.cols() != static_cast<Eigen::Index>(rows) * arch_.length) {
    throw ConfigError("forward: input must be 1 x (batch*" + std::to_string(arch_.channels) + "*" +
                      std::to_string(arch_.length) + ")");
  }
  const bool train = options.mode == Mode::Train;
  const bool use_batch = train && options.bn == BnSource::Batch;
  const BnStats<T>* stored = nullptr;
  if (!use_batch) {
    stored = &stats(options.domain);
  }
  const bool drop = train && arch_.dropout > 0.0;
  if (drop && options.rng == nullptr) throw ConfigError("forward: train mode needs an RNG for dropout");

  Tape<T> tape;
  tape.batch = batch;
  tape.mode = options.mode;
  tape.batch_stats = use_batch;
  tape.act.reserve(static_cast<std::size_t>(arch_.blocks) + 1);
  tape.act.push_back(input);

  BnStats<T> batch_stats;
  const T leak = static_cast<T>(arch_.leak);
  const T eps = static_cast<T>(arch_.bn_eps);
  for (int b = 1; b <= arch_.blocks; ++b) {
    Mat<T> z = convolve(b, tape.act.back(), rows);
    const auto m = static_cast<double>(z.cols());
    Vec<T> mean, var;
    if (use_batch) {
      mean = z.rowwise().mean();
      var = (z.colwise() - mean).array().square().rowwise().mean();
      batch_stats.mean.push_back(mean);
      batch_stats.var.push_back(var * static_cast<T>(m / std::max(1.0, m - 1.0)));
    } else {
      mean = stored->mean[static_cast<std::size_t>(b - 1)];
      var = stored->var[static_cast<std::size_t>(b - 1)];
    }
    Vec<T> inv_std = (var.array() + eps).rsqrt();
    z.colwise() -= mean;
    z = inv_std.asDiagonal() * z;  // z now holds xhat
    Mat<T> y = bn_scale(b).asDiagonal() * z;
    y.colwise() += bn_shift(b);
    Mat<T> a = y.unaryExpr([leak](T v) { return v > T(0) ? v : leak * v; });
    if (drop) {
      const double keep = 1.0 - arch_.dropout;
      const T scale = static_cast<T>(1.0 / keep);
      Mat<T> mask(a.rows(), a.cols());
      for (Eigen::Index i = 0; i < mask.size(); ++i) {
        mask.data()[i] = options.rng->uniform() < keep ? scale : T(0);
      }
      a.array() *= mask.array();
      tape.mask.push_back(std::move(mask));
    }
    tape.xhat.push_back(std::move(z));
    tape.pre.push_back(std::move(y));
    tape.inv_std.push_back(std::move(inv_std));
    tape.act.push_back(std::move(a));
  }

  if (use_batch && options.update_stats) {
    auto it = stats_.find(options.domain);
    if (it == stats_.end()) {
      stats_.emplace(options.domain, std::move(batch_stats));
    } else {
      const T mom = static_cast<T>(arch_.bn_momentum);
      for (int b = 0; b < arch_.blocks; ++b) {
        auto& rm = it->second.mean[static_cast<std::size_t>(b)];
        auto& rv = it->second.var[static_cast<std::size_t>(b)];
        rm = (T(1) - mom) * rm + mom * batch_stats.mean[static_cast<std::size_t>(b)];
        rv = (T(1) - mom) * rv + mom * batch_stats.var[static_cast<std::size_t>(b)];
      }
    }
  }

  const auto& last = tape.act.back();
  Eigen::Map<const Mat<T>> feats(last.data(), arch_.head_inputs(), batch);
  tape.gesture_logits = gesture_weight() * feats;
  tape.gesture_logits.colwise() += gesture_bias();
  if (options.domain_head) {
    tape.domain_logits = domain_weight() * feats;
    tape.domain_logits.colwise() += domain_bias();
  }
  return tape;
}

template <class T>
Tape<T> ConvNet<T>::infer(const Mat<T>& input, int batch, int domain, bool domain_head) const {
  ForwardOptions options;
  options.mode = Mode::Eval;
  options.domain = domain;
  options.domain_head = domain_head;
  // Eval mode never touches the statistics map, so the cast is safe.
  return const_cast<ConvNet<T>*>(this)->forward(input, batch, options);
}

template <class T>
void ConvNet<T>::backward(const Tape<T>& tape, const Mat<T>& d_gesture, const Mat<T>* d_domain,
                          std::span<T> grad, const BackwardOptions& options,
                          BackwardExtras<T>* extras) const {
  if (tape.empty()) throw ConfigError("backward called without a forward pass");
  if (grad.size() != parameter_count()) throw ConfigError("gradient buffer has the wrong size");
  const int batch = tape.batch;
  const int rows = batch * arch_.channels;
  const int f = arch_.head_inputs();
  if (d_gesture.rows() != arch_.gestures || d_gesture.cols() != batch) {
    throw ConfigError("backward: gesture gradient must be gestures x batch");
  }
  auto gmat = [&](const std::string& name, Eigen::Index r, Eigen::Index c) {
    return Eigen::Map<Mat<T>>(grad.data() + group(name).offset, r, c);
  };
  auto gvec = [&](const std::string& name) {
    const auto& g = group(name);
    return Eigen::Map<Vec<T>>(grad.data() + g.offset, static_cast<Eigen::Index>(g.size));
  };

  const auto& last = tape.act.back();
  Eigen::Map<const Mat<T>> feats(last.data(), f, batch);
  Mat<T> da(arch_.maps, last.cols());
  Eigen::Map<Mat<T>> dfeats(da.data(), f, batch);
  gmat("gesture.weight", arch_.gestures, f).noalias() += d_gesture * feats.transpose();
  gvec("gesture.bias") += d_gesture.rowwise().sum();
  dfeats.noalias() = gesture_weight().transpose() * d_gesture;
  if (d_domain != nullptr) {
    if (tape.domain_logits.size() == 0) throw ConfigError("backward: forward ran without the domain head");
    if (d_domain->rows() != arch_.domain_outputs || d_domain->cols() != batch) {
      throw ConfigError("backward: domain gradient must be domain_outputs x batch");
    }
    gmat("domain.weight", arch_.domain_outputs, f).noalias() += *d_domain * feats.transpose();
    gvec("domain.bias") += d_domain->rowwise().sum();
    dfeats.noalias() += static_cast<T>(options.reversal) * (domain_weight().transpose() * *d_domain);
  }

  const T leak = static_cast<T>(arch_.leak);
  for (int b = arch_.blocks; b >= 1; --b) {
    const auto i = static_cast<std::size_t>(b - 1);
    if (extras != nullptr && options.capture_block == b) extras->captured = da;
    if (!tape.mask.empty()) da.array() *= tape.mask[i].array();
    const auto& y = tape.pre[i];
    if (options.guided) {
      da = da.binaryExpr(y, [](T g, T v) { return (v > T(0) && g > T(0)) ? g : T(0); });
    } else {
      da = da.binaryExpr(y, [leak](T g, T v) { return v > T(0) ? g : leak * g; });
    }
    // da now holds d loss / d BN output.
    const auto& xhat = tape.xhat[i];
    gvec(block_name(b, "bn.scale")) += da.cwiseProduct(xhat).rowwise().sum();
    gvec(block_name(b, "bn.shift")) += da.rowwise().sum();
    Mat<T> dz = bn_scale(b).asDiagonal() * da;  // d / d xhat
    if (tape.batch_stats) {
      const auto m = static_cast<T>(dz.cols());
      const Vec<T> sum_d = dz.rowwise().sum();
      const Vec<T> sum_dx = dz.cwiseProduct(xhat).rowwise().sum();
      for (Eigen::Index r = 0; r < dz.rows(); ++r) {
        const T mean_d = sum_d[r] / m, mean_dx = sum_dx[r] / m;
        dz.row(r) = (dz.row(r).array() - mean_d - xhat.row(r).array() * mean_dx) * tape.inv_std[i][r];
      }
    } else {
      dz = tape.inv_std[i].asDiagonal() * dz;
    }

    gvec(block_name(b, "conv.bias")) += dz.rowwise().sum();
    const int cin = arch_.block_inputs(b);
    const int k = arch_.kernel;
    const int lin = arch_.block_length(b - 1);
    const int lout = arch_.block_length(b);
    const int maps = arch_.maps;
    const auto& in = tape.act[i];
    auto dw = gmat(block_name(b, "conv.weight"), maps, static_cast<Eigen::Index>(k) * cin);
    const bool need_input = b > 1 || options.input_gradient;
    Mat<T> din;
    if (need_input) din.setZero(cin, static_cast<Eigen::Index>(rows) * lin);
    const auto w = conv_weight(b);
    for (int t = 0; t < lout; ++t) {
      Eigen::Map<const Mat<T>, 0, Stride> x(in.data() + static_cast<Eigen::Index>(t) * cin, k * cin,
                                            rows, Stride(static_cast<Eigen::Index>(lin) * cin));
      Eigen::Map<const Mat<T>, 0, Stride> dzt(dz.data() + static_cast<Eigen::Index>(t) * maps, maps,
                                              rows, Stride(static_cast<Eigen::Index>(lout) * maps));
      dw.noalias() += dzt * x.transpose();
      if (need_input) {
        Eigen::Map<Mat<T>, 0, Stride> dx(din.data() + static_cast<Eigen::Index>(t) * cin, k * cin,
                                         rows, Stride(static_cast<Eigen::Index>(lin) * cin));
        dx.noalias() += w.transpose() * dzt;
      }
    }
    if (b == 1) {
      if (extras != nullptr && options.input_gradient) extras->input_gradient = std::move(din);
    } else {
      da = std::move(din);
    }
  }
}

template <class T>
void ConvNet<T>::estimate_stats(int domain, const Mat<T>& input, int batch, int chunk) {
  const int per_window = arch_.channels * arch_.length;
  if (batch < 1 || input.cols() != static_cast<Eigen::Index>(batch) * per_window) {
    throw ConfigError("estimate_stats: input does not match batch size");
  }
  chunk = std::max(1, chunk);
  BnStats<T> est;
  const T leak = static_cast<T>(arch_.leak);
  const T eps = static_cast<T>(arch_.bn_eps);
  for (int b = 1; b <= arch_.blocks; ++b) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(arch_.maps);
    Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(arch_.maps);
    double count = 0.0;
    for (int first = 0; first < batch; first += chunk) {
      const int n = std::min(chunk, batch - first);
      const int rows = n * arch_.channels;
      Mat<T> a = input.middleCols(static_cast<Eigen::Index>(first) * per_window,
                                  static_cast<Eigen::Index>(n) * per_window);
      for (int p = 1; p < b; ++p) {
        Mat<T> z = convolve(p, a, rows);
        const auto i = static_cast<std::size_t>(p - 1);
        const Vec<T> inv_std = (est.var[i].array() + eps).rsqrt();
        z.colwise() -= est.mean[i];
        z = (bn_scale(p).cwiseProduct(inv_std)).asDiagonal() * z;
        z.colwise() += bn_shift(p);
        a = z.unaryExpr([leak](T v) { return v > T(0) ? v : leak * v; });
      }
      const Mat<T> z = convolve(b, a, rows);
      const Eigen::MatrixXd zd = z.template cast<double>();
      sum += zd.rowwise().sum();
      sumsq += zd.array().square().matrix().rowwise().sum();
      count += static_cast<double>(z.cols());
    }
    const Eigen::VectorXd mean = sum / count;
    Eigen::VectorXd var = (sumsq / count - mean.cwiseProduct(mean)).cwiseMax(0.0);
    if (count > 1.0) var *= count / (count - 1.0);
    est.mean.push_back(mean.cast<T>());
    est.var.push_back(var.cast<T>());
  }
  stats_[domain] = std::move(est);
}

template class ConvNet<float>;
template class ConvNet<double>;

// ---------------------------------------------------------------------------

template <class T>
Mat<T> pack_windows(std::span<const dataio::Window* const> windows) {
  constexpr int per = dataio::kChannels * dataio::kWindowLength;
  Mat<T> out(1, static_cast<Eigen::Index>(windows.size()) * per);
  T* p = out.data();
  for (const auto* w : windows) {
    if (w->data.rows() != dataio::kChannels || w->data.cols() != dataio::kWindowLength) {
      throw LoadError("window must be 10x151");
    }
    for (int r = 0; r < dataio::kChannels; ++r)
      for (int t = 0; t < dataio::kWindowLength; ++t) *p++ = static_cast<T>(w->data(r, t));
  }
  return out;
}

template <class T>
Mat<T> pack_windows(std::span<const dataio::Window> windows) {
  std::vector<const dataio::Window*> ptrs;
  ptrs.reserve(windows.size());
  for (const auto& w : windows) ptrs.push_back(&w);
  return pack_windows<T>(std::span<const dataio::Window* const>(ptrs));
}

template <class T>
double softmax_cross_entropy(const Mat<T>& logits, std::span<const int> labels, Mat<T>& d_logits) {
  const Eigen::Index n = logits.cols();
  if (static_cast<std::size_t>(n) != labels.size()) throw ConfigError("one label per column expected");
  d_logits.resize(logits.rows(), n);
  double loss = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const int y = labels[static_cast<std::size_t>(j)];
    if (y < 0 || y >= logits.rows()) throw ConfigError("label out of range");
    const Eigen::VectorXd z = logits.col(j).template cast<double>();
    const double mx = z.maxCoeff();
    const Eigen::VectorXd e = (z.array() - mx).exp();
    const double s = e.sum();
    loss += std::log(s) + mx - z[y];
    Eigen::VectorXd p = e / s;
    p[y] -= 1.0;
    d_logits.col(j) = (p / static_cast<double>(n)).cast<T>();
  }
  return loss / static_cast<double>(n);
}

template <class T>
std::vector<int> argmax_columns(const Mat<T>& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < logits.rows(); ++i)
      if (logits(i, j) > logits(best, j)) best = i;
    out[static_cast<std::size_t>(j)] = static_cast<int>(best);
  }
  return out;
}

template <class T>
void Adam<T>::step(std::span<T> params, std::span<const T> grads, double lr,
                   std::span<const ParamGroup> groups) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ConfigError("Adam: parameter and gradient sizes must match the optimiser");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(static_cast<double>(grads[i]))) {
      std::string where = "index " + std::to_string(i);
      for (const auto& g : groups) {
        if (i >= g.offset && i < g.offset + g.size) {
          where = g.name + "[" + std::to_string(i - g.offset) + "]";
          break;
        }
      }
      throw NumericError("non-finite gradient at " + where);
    }
  }
  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = static_cast<double>(grads[i]);
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    params[i] = static_cast<T>(static_cast<double>(params[i]) - lr * mhat / (std::sqrt(vhat) + config_.eps));
  }
}

template class Adam<float>;
template class Adam<double>;

template Mat<float> pack_windows<float>(std::span<const dataio::Window>);
template Mat<double> pack_windows<double>(std::span<const dataio::Window>);
template Mat<float> pack_windows<float>(std::span<const dataio::Window* const>);
template Mat<double> pack_windows<double>(std::span<const dataio::Window* const>);
template double softmax_cross_entropy<float>(const Mat<float>&, std::span<const int>, Mat<float>&);
template double softmax_cross_entropy<double>(const Mat<double>&, std::span<const int>, Mat<double>&);
template std::vector<int> argmax_columns<float>(const Mat<float>&);
template std::vector<int> argmax_columns<double>(const Mat<double>&);

// ---------------------------------------------------------------------------

template <class T>
void for_each_chunk(const ConvNet<T>& model, std::span<const dataio::Window> windows, int domain,
                    int chunk, const std::function<void(std::size_t, const Tape<T>&)>& fn) {
  chunk = std::max(1, chunk);
  for (std::size_t first = 0; first < windows.size(); first += static_cast<std::size_t>(chunk)) {
    const auto n = std::min(static_cast<std::size_t>(chunk), windows.size() - first);
    const auto part = windows.subspan(first, n);
    const auto tape = model.infer(pack_windows<T>(part), static_cast<int>(n), domain);
    fn(first, tape);
  }
}

template void for_each_chunk<float>(const ConvNet<float>&, std::span<const dataio::Window>, int, int,
                                    const std::function<void(std::size_t, const Tape<float>&)>&);
template void for_each_chunk<double>(const ConvNet<double>&, std::span<const dataio::Window>, int, int,
                                     const std::function<void(std::size_t, const Tape<double>&)>&);

features::FeaturePointCloud extract_learned_features(const ConvNet<float>& model,
                                                     std::span<const dataio::Window> windows,
                                                     int domain, int chunk) {
  const auto& arch = model.arch();
  if (arch.channels != dataio::kChannels || arch.length != dataio::kWindowLength) {
    throw ConfigError("learned features need the 10x151 input architecture");
  }
  if (windows.empty()) throw ConfigError("extract_learned_features needs at least one window");
  features::FeaturePointCloud cloud;
  const int rows = arch.blocks * arch.maps;
  const int c = arch.channels;
  cloud.values.resize(rows, static_cast<Eigen::Index>(windows.size()) * c);
  for (int b = 1; b <= arch.blocks; ++b) {
    for (int m = 0; m < arch.maps; ++m) {
      cloud.row_labels.push_back("B" + std::to_string(b) + "M" + std::to_string(m));
      cloud.row_groups.push_back("B" + std::to_string(b));
    }
  }
  for (std::size_t n = 0; n < windows.size(); ++n)
    for (int ch = 0; ch < c; ++ch) cloud.column_labels.emplace_back(static_cast<int>(n), ch);

  for_each_chunk<float>(model, windows, domain, chunk, [&](std::size_t first, const Tape<float>& tape) {
    for (int b = 1; b <= arch.blocks; ++b) {
      const int len = arch.block_length(b);
      const auto& a = tape.act[static_cast<std::size_t>(b)];
      const Eigen::Index cols = a.cols() / len;  // (window, channel) rows in the chunk
      for (Eigen::Index s = 0; s < cols; ++s) {
        const Eigen::VectorXd avg =
            a.middleCols(s * len, len).template cast<double>().rowwise().mean();
        cloud.values.block((b - 1) * arch.maps, static_cast<Eigen::Index>(first) * c + s, arch.maps, 1) =
            avg;
      }
    }
  });
  return cloud;
}

}  // namespace myofeat::convnet
