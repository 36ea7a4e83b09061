#include "doelens/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "doelens/parallel.hpp"
#include "doelens/rng.hpp"

namespace doelens::nnet {
namespace {

constexpr double bn_eps = 1e-5;

struct ConvSlots {
  int weight = -1, bias = -1, gamma = -1, beta = -1, running_mean = -1, running_var = -1;
  int in_channels = 0, out_channels = 0;
};

struct DenseSlots {
  int weight = -1, bias = -1;
  int in = 0, out = 0;
};

struct Layout {
  std::vector<ConvSlots> conv;
  std::vector<DenseSlots> dense;
};

Layout layout_of(const Architecture& arch) {
  Layout L;
  int w = 0, b = 0, cin = arch.input_channels;
  for (int cout : arch.conv_channels) {
    ConvSlots s;
    s.in_channels = cin;
    s.out_channels = cout;
    s.weight = w++;
    if (arch.batch_norm) {
      s.gamma = w++;
      s.beta = w++;
      s.running_mean = b++;
      s.running_var = b++;
    } else {
      s.bias = w++;
    }
    L.conv.push_back(s);
    cin = cout;
  }
  int in = cin;
  std::vector<int> outs = arch.hidden;
  outs.push_back(arch.classes);
  for (int out : outs) {
    L.dense.push_back({w, w + 1, in, out});
    w += 2;
    in = out;
  }
  return L;
}

int conv_out(int size) { return (size - 1) / 2 + 1; }

template <typename T>
using ConstMap = Eigen::Map<const Matrix<T>>;
template <typename T>
using MutMap = Eigen::Map<Matrix<T>>;

template <typename T>
struct ConvTrace {
  Matrix<T> col;
  Matrix<T> xhat;
  std::vector<T> invstd;
  Matrix<T> out;  // post-activation
  int h_in = 0, w_in = 0, h_out = 0, w_out = 0;
};

template <typename T>
struct DenseTrace {
  Matrix<T> input;
  Matrix<T> z;
};

template <typename T>
struct Trace {
  int n = 0;
  std::vector<ConvTrace<T>> conv;
  int pooled_hw = 0;
  std::vector<DenseTrace<T>> dense;
  std::vector<std::vector<double>> batch_mean, batch_var;
};

// Chunked reductions: vectorized within fixed-size blocks, block partials
// accumulated in double in a fixed order.
constexpr Eigen::Index reduce_block = 1024;

template <typename T>
double block_sum(const T* p, Eigen::Index n) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; i += reduce_block) {
    const Eigen::Index len = std::min(reduce_block, n - i);
    acc += Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>(p + i, len).sum();
  }
  return acc;
}

template <typename T>
double block_dot(const T* a, const T* b, Eigen::Index n) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; i += reduce_block) {
    const Eigen::Index len = std::min(reduce_block, n - i);
    acc += (Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>(a + i, len) *
            Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>(b + i, len))
               .sum();
  }
  return acc;
}

template <typename T>
double block_centered_sq(const T* p, Eigen::Index n, T mu) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; i += reduce_block) {
    const Eigen::Index len = std::min(reduce_block, n - i);
    acc += (Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>(p + i, len) - mu).square().sum();
  }
  return acc;
}

template <typename T>
Matrix<T> im2col(const Matrix<T>& x, int n, int h, int w) {
  const int channels = static_cast<int>(x.rows());
  const int ho = conv_out(h), wo = conv_out(w);
  const std::size_t cols = static_cast<std::size_t>(n) * ho * wo;
  Matrix<T> col(channels * 9, static_cast<Eigen::Index>(cols));
  for (int c = 0; c < channels; ++c) {
    const T* src = x.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = col.row(c * 9 + ky * 3 + kx).data();
        for (int s = 0; s < n; ++s) {
          const T* img = src + static_cast<std::size_t>(s) * h * w;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = 2 * oy - 1 + ky;
            T* out = dst + (static_cast<std::size_t>(s) * ho + oy) * wo;
            if (iy < 0 || iy >= h) {
              std::fill(out, out + wo, T(0));
              continue;
            }
            const T* line = img + static_cast<std::size_t>(iy) * w;
            const int lo = kx == 0 ? 1 : 0;
            const int hi = std::min(wo, (w - kx) / 2 + 1);
            for (int ox = 0; ox < lo; ++ox) out[ox] = T(0);
            const T* in = line + kx - 1;
            for (int ox = lo; ox < hi; ++ox) out[ox] = in[2 * ox];
            for (int ox = hi; ox < wo; ++ox) out[ox] = T(0);
          }
        }
      }
    }
  }
  return col;
}

template <typename T>
Matrix<T> col2im(const Matrix<T>& col, int channels, int n, int h, int w) {
  const int ho = conv_out(h), wo = conv_out(w);
  Matrix<T> x = Matrix<T>::Zero(channels, static_cast<Eigen::Index>(n) * h * w);
  for (int c = 0; c < channels; ++c) {
    T* dst = x.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T* src = col.row(c * 9 + ky * 3 + kx).data();
        for (int s = 0; s < n; ++s) {
          T* img = dst + static_cast<std::size_t>(s) * h * w;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = 2 * oy - 1 + ky;
            if (iy < 0 || iy >= h) continue;
            const T* in = src + (static_cast<std::size_t>(s) * ho + oy) * wo;
            T* line = img + static_cast<std::size_t>(iy) * w + kx - 1;
            const int lo = kx == 0 ? 1 : 0;
            const int hi = std::min(wo, (w - kx) / 2 + 1);
            for (int ox = lo; ox < hi; ++ox) line[2 * ox] += in[ox];
          }
        }
      }
    }
  }
  return x;
}

template <typename T>
std::pair<Matrix<T>, Matrix<T>> forward_impl(const BasicParams<T>& params, const ImageBatch<T>& batch, Mode mode,
                                             Trace<T>* trace) {
  const Architecture& arch = params.arch;
  if (batch.channels != arch.input_channels || batch.height != arch.input_size || batch.width != arch.input_size)
    throw std::invalid_argument("batch shape does not match the network input layer");
  if (batch.n < 1) throw std::invalid_argument("empty batch");
  const Layout L = layout_of(arch);
  const int n = batch.n;
  int h = batch.height, w = batch.width;
  Matrix<T> x = ConstMap<T>(batch.data.data(), batch.channels, static_cast<Eigen::Index>(n) * h * w);
  if (trace) {
    trace->n = n;
    trace->conv.clear();
    trace->dense.clear();
    trace->batch_mean.clear();
    trace->batch_var.clear();
  }

  for (const auto& slot : L.conv) {
    const int ho = conv_out(h), wo = conv_out(w);
    Matrix<T> col = im2col<T>(x, n, h, w);
    const auto& wt = params.weights[slot.weight].values;
    ConstMap<T> W(wt.data(), slot.out_channels, slot.in_channels * 9);
    Matrix<T> z(slot.out_channels, col.cols());
    z.noalias() = W * col;
    const auto m = z.cols();
    ConvTrace<T> ct;
    if (arch.batch_norm) {
      const auto& gamma = params.weights[slot.gamma].values;
      const auto& beta = params.weights[slot.beta].values;
      if (mode == Mode::train) {
        std::vector<double> means(slot.out_channels), vars(slot.out_channels);
        if (trace) {
          ct.xhat.resize(z.rows(), m);
          ct.invstd.resize(slot.out_channels);
        }
        for (int c = 0; c < slot.out_channels; ++c) {
          T* row = z.row(c).data();
          const double mean = block_sum(row, m) / static_cast<double>(m);
          const double var = block_centered_sq(row, m, static_cast<T>(mean)) / static_cast<double>(m);
          const T invstd = static_cast<T>(1.0 / std::sqrt(var + bn_eps));
          const T mu = static_cast<T>(mean);
          means[c] = mean;
          vars[c] = m > 1 ? var * static_cast<double>(m) / static_cast<double>(m - 1) : var;
          if (trace) {
            ct.invstd[c] = invstd;
            T* xh = ct.xhat.row(c).data();
            for (Eigen::Index i = 0; i < m; ++i) {
              xh[i] = (row[i] - mu) * invstd;
              row[i] = gamma[c] * xh[i] + beta[c];
            }
          } else {
            for (Eigen::Index i = 0; i < m; ++i) row[i] = gamma[c] * ((row[i] - mu) * invstd) + beta[c];
          }
        }
        if (trace) {
          trace->batch_mean.push_back(std::move(means));
          trace->batch_var.push_back(std::move(vars));
        }
      } else {
        const auto& rm = params.buffers[slot.running_mean].values;
        const auto& rv = params.buffers[slot.running_var].values;
        for (int c = 0; c < slot.out_channels; ++c) {
          const T scale = static_cast<T>(gamma[c] / std::sqrt(static_cast<double>(rv[c]) + bn_eps));
          const T shift = beta[c] - rm[c] * scale;
          z.row(c).array() = z.row(c).array() * scale + shift;
        }
      }
    } else {
      const auto& bias = params.weights[slot.bias].values;
      for (int c = 0; c < slot.out_channels; ++c) z.row(c).array() += bias[c];
    }
    z = z.cwiseMax(T(0));
    if (trace) {
      ct.col = std::move(col);
      ct.out = z;
      ct.h_in = h;
      ct.w_in = w;
      ct.h_out = ho;
      ct.w_out = wo;
      trace->conv.push_back(std::move(ct));
    }
    x = std::move(z);
    h = ho;
    w = wo;
  }

  const int hw = h * w;
  Matrix<T> pooled(x.rows(), n);
  for (Eigen::Index c = 0; c < x.rows(); ++c)
    for (int s = 0; s < n; ++s) pooled(c, s) = x.row(c).segment(static_cast<Eigen::Index>(s) * hw, hw).mean();
  if (trace) trace->pooled_hw = hw;

  Matrix<T> features = pooled;
  Matrix<T> a = std::move(pooled);
  for (std::size_t d = 0; d < L.dense.size(); ++d) {
    const auto& slot = L.dense[d];
    ConstMap<T> W(params.weights[slot.weight].values.data(), slot.out, slot.in);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(params.weights[slot.bias].values.data(), slot.out);
    Matrix<T> z(slot.out, n);
    z.noalias() = W * a;
    z.colwise() += b;
    const bool last = d + 1 == L.dense.size();
    if (d + 2 == L.dense.size()) features = z;
    if (trace) trace->dense.push_back({a, z});
    a = last ? std::move(z) : Matrix<T>(z.cwiseMax(T(0)));
  }
  return {std::move(a), std::move(features)};
}

template <typename T>
void add_to(std::vector<T>& dst, const Matrix<T>& src) {
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(dst.data(), static_cast<Eigen::Index>(dst.size())) +=
      Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(src.data(), src.size());
}

// dlogits: classes x N (may be empty); dfeatures: feature_dim x N (may be empty).
template <typename T>
void backward_impl(const BasicParams<T>& params, const Trace<T>& trace, const Matrix<T>& dlogits,
                   const Matrix<T>& dfeatures, std::vector<std::vector<T>>& grads) {
  const Layout L = layout_of(params.arch);
  const int n = trace.n;
  const auto& last = L.dense.back();
  Matrix<T> dz = dlogits.size() ? dlogits : Matrix<T>(Matrix<T>::Zero(last.out, n));
  const bool tap_on_pool = L.dense.size() == 1;
  Matrix<T> dpooled;
  for (int d = static_cast<int>(L.dense.size()) - 1; d >= 0; --d) {
    const auto& slot = L.dense[d];
    const auto& tr = trace.dense[d];
    Matrix<T> gw(dz.rows(), tr.input.rows());
    gw.noalias() = dz * tr.input.transpose();
    add_to(grads[slot.weight], gw);
    Matrix<T> gb = dz.rowwise().sum();
    add_to(grads[slot.bias], gb);
    ConstMap<T> W(params.weights[slot.weight].values.data(), slot.out, slot.in);
    Matrix<T> dinput(W.cols(), dz.cols());
    dinput.noalias() = W.transpose() * dz;
    if (d > 0) {
      const auto& prev = trace.dense[d - 1];
      dz = (prev.z.array() > T(0)).select(dinput.array(), T(0));
      if (d - 1 == static_cast<int>(L.dense.size()) - 2 && dfeatures.size()) dz += dfeatures;
    } else {
      dpooled = std::move(dinput);
    }
  }
  if (tap_on_pool && dfeatures.size()) dpooled += dfeatures;

  const int hw = trace.pooled_hw;
  const auto& top = trace.conv.back();
  Matrix<T> da(top.out.rows(), top.out.cols());
  const T inv_hw = T(1) / static_cast<T>(hw);
  for (Eigen::Index c = 0; c < da.rows(); ++c)
    for (int s = 0; s < n; ++s) da.row(c).segment(static_cast<Eigen::Index>(s) * hw, hw).setConstant(dpooled(c, s) * inv_hw);

  for (int l = static_cast<int>(L.conv.size()) - 1; l >= 0; --l) {
    const auto& slot = L.conv[l];
    const auto& ct = trace.conv[l];
    Matrix<T> dzc = std::move(da);
    dzc.array() = (ct.out.array() > T(0)).select(dzc.array(), T(0));
    const auto m = dzc.cols();
    if (params.arch.batch_norm) {
      const auto& gamma = params.weights[slot.gamma].values;
      auto& ggamma = grads[slot.gamma];
      auto& gbeta = grads[slot.beta];
      for (int c = 0; c < slot.out_channels; ++c) {
        T* dy = dzc.row(c).data();
        const T* xh = ct.xhat.row(c).data();
        const double sum_dy = block_sum(dy, m);
        const double sum_dy_xh = block_dot(dy, xh, m);
        ggamma[c] += static_cast<T>(sum_dy_xh);
        gbeta[c] += static_cast<T>(sum_dy);
        const double md = static_cast<double>(m);
        const T k = static_cast<T>(gamma[c] * ct.invstd[c] / md);
        const T mean_dy = static_cast<T>(sum_dy);
        const T mean_dyx = static_cast<T>(sum_dy_xh);
        for (Eigen::Index i = 0; i < m; ++i) dy[i] = k * (static_cast<T>(md) * dy[i] - mean_dy - xh[i] * mean_dyx);
      }
    } else {
      Matrix<T> gb = dzc.rowwise().sum();
      add_to(grads[slot.bias], gb);
    }
    Matrix<T> gw(dzc.rows(), ct.col.rows());
    gw.noalias() = dzc * ct.col.transpose();
    add_to(grads[slot.weight], gw);
    if (l > 0) {
      ConstMap<T> W(params.weights[slot.weight].values.data(), slot.out_channels, slot.in_channels * 9);
      Matrix<T> dcol(W.cols(), dzc.cols());
      dcol.noalias() = W.transpose() * dzc;
      da = col2im<T>(dcol, slot.in_channels, n, ct.h_in, ct.w_in);
    }
  }
}

template <typename T>
bool all_finite(const std::vector<std::vector<T>>& g) {
  for (const auto& v : g)
    for (T x : v)
      if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

Architecture Architecture::dsprites_cnn(double width) {
  if (!(width > 0)) throw std::invalid_argument("width multiplier must be positive");
  auto scaled = [width](int c) { return std::max(1, static_cast<int>(std::lround(c * width))); };
  Architecture a;
  a.input_channels = 1;
  a.input_size = 64;
  a.conv_channels = {scaled(32), scaled(64), scaled(128), scaled(256)};
  a.batch_norm = true;
  a.hidden = {scaled(128)};
  a.classes = 3;
  return a;
}

Architecture Architecture::tiny_cnn() {
  Architecture a;
  a.input_channels = 3;
  a.input_size = 64;
  a.conv_channels = {16, 32, 64};
  a.batch_norm = false;
  a.hidden = {};
  a.classes = 3;
  return a;
}

int Architecture::feature_dim() const { return hidden.empty() ? conv_channels.back() : hidden.back(); }

std::size_t Architecture::parameter_count() const {
  std::size_t n = 0;
  int cin = input_channels;
  for (int c : conv_channels) {
    n += static_cast<std::size_t>(c) * cin * 9 + (batch_norm ? 2 * c : c);
    cin = c;
  }
  int in = cin;
  std::vector<int> outs = hidden;
  outs.push_back(classes);
  for (int o : outs) {
    n += static_cast<std::size_t>(o) * in + o;
    in = o;
  }
  return n;
}

void Architecture::validate() const {
  if (input_channels < 1 || input_size < 2 || classes < 2 || conv_channels.empty())
    throw std::invalid_argument("invalid architecture");
  for (int c : conv_channels)
    if (c < 1) throw std::invalid_argument("conv width must be positive");
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("hidden width must be positive");
}

nlohmann::json to_json(const Architecture& a) {
  return {{"input_channels", a.input_channels}, {"input_size", a.input_size}, {"conv_channels", a.conv_channels},
          {"batch_norm", a.batch_norm},         {"hidden", a.hidden},         {"classes", a.classes}};
}

Architecture architecture_from_json(const nlohmann::json& j) {
  Architecture a;
  if (j.is_string() || j.contains("preset")) {
    const auto preset = j.is_string() ? j.get<std::string>() : j.at("preset").get<std::string>();
    const double width = j.is_object() ? j.value("width", 1.0) : 1.0;
    if (preset == "dsprites_cnn") return Architecture::dsprites_cnn(width);
    if (preset == "tiny_cnn") return Architecture::tiny_cnn();
    throw std::invalid_argument("unknown architecture preset '" + preset + "'");
  }
  a.input_channels = j.at("input_channels").get<int>();
  a.input_size = j.at("input_size").get<int>();
  a.conv_channels = j.at("conv_channels").get<std::vector<int>>();
  a.batch_norm = j.at("batch_norm").get<bool>();
  a.hidden = j.at("hidden").get<std::vector<int>>();
  a.classes = j.at("classes").get<int>();
  a.validate();
  return a;
}

template <typename T>
BasicParams<T> init_params(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  BasicParams<T> p;
  p.arch = arch;
  Rng rng = make_rng(seed, stream::model_init);
  auto uniform = [&rng](std::size_t count, double fan_in) {
    const double bound = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<T> v(count);
    for (auto& x : v) x = static_cast<T>(dist(rng));
    return v;
  };
  const Layout L = layout_of(arch);
  p.weights.resize(L.dense.back().bias + 1);
  p.buffers.resize(arch.batch_norm ? 2 * L.conv.size() : 0);
  for (std::size_t l = 0; l < L.conv.size(); ++l) {
    const auto& s = L.conv[l];
    const auto tag = std::to_string(l);
    p.weights[s.weight] = {"conv" + tag + ".weight", {s.out_channels, s.in_channels, 3, 3},
                           uniform(static_cast<std::size_t>(s.out_channels) * s.in_channels * 9, s.in_channels * 9.0)};
    if (arch.batch_norm) {
      p.weights[s.gamma] = {"bn" + tag + ".weight", {s.out_channels}, std::vector<T>(s.out_channels, T(1))};
      p.weights[s.beta] = {"bn" + tag + ".bias", {s.out_channels}, std::vector<T>(s.out_channels, T(0))};
      p.buffers[s.running_mean] = {"bn" + tag + ".running_mean", {s.out_channels}, std::vector<T>(s.out_channels, T(0))};
      p.buffers[s.running_var] = {"bn" + tag + ".running_var", {s.out_channels}, std::vector<T>(s.out_channels, T(1))};
    } else {
      p.weights[s.bias] = {"conv" + tag + ".bias", {s.out_channels}, std::vector<T>(s.out_channels, T(0))};
    }
  }
  for (std::size_t d = 0; d < L.dense.size(); ++d) {
    const auto& s = L.dense[d];
    const auto tag = std::to_string(d);
    p.weights[s.weight] = {"fc" + tag + ".weight", {s.out, s.in}, uniform(static_cast<std::size_t>(s.out) * s.in, s.in)};
    p.weights[s.bias] = {"fc" + tag + ".bias", {s.out}, std::vector<T>(s.out, T(0))};
  }
  return p;
}

template <typename T>
ImageBatch<T> make_batch(std::span<const LabeledImage* const> images) {
  ImageBatch<T> b;
  if (images.empty()) return b;
  b.n = static_cast<int>(images.size());
  b.channels = images.front()->channels;
  b.height = images.front()->height;
  b.width = images.front()->width;
  const std::size_t hw = static_cast<std::size_t>(b.height) * b.width;
  b.data.resize(hw * b.channels * b.n);
  constexpr T scale = T(1) / T(255);
  for (int s = 0; s < b.n; ++s) {
    const auto& img = *images[s];
    if (img.channels != b.channels || img.height != b.height || img.width != b.width)
      throw std::invalid_argument("images in a batch must share dimensions");
    for (int c = 0; c < b.channels; ++c) {
      T* dst = b.data.data() + (static_cast<std::size_t>(c) * b.n + s) * hw;
      for (std::size_t i = 0; i < hw; ++i) dst[i] = static_cast<T>(img.pixels[i * b.channels + c]) * scale;
    }
  }
  return b;
}

template <typename T>
ImageBatch<T> make_batch(const Dataset& data, std::span<const std::size_t> indices) {
  std::vector<const LabeledImage*> ptrs;
  ptrs.reserve(indices.size());
  for (auto i : indices) ptrs.push_back(&data.samples.at(i));
  return make_batch<T>(std::span<const LabeledImage* const>(ptrs));
}

template <typename T>
ForwardResult<T> forward(const BasicParams<T>& params, const ImageBatch<T>& batch, Mode mode) {
  auto [logits, features] = forward_impl<T>(params, batch, mode, nullptr);
  return {logits.transpose(), features.transpose()};
}

template <typename T>
TaskLoss loss_task(const Matrix<T>& logits, std::span<const int> labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size())
    throw std::invalid_argument("logits/labels size mismatch");
  TaskLoss out;
  out.per_sample.resize(labels.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= logits.cols()) throw std::invalid_argument("label out of range");
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < logits.cols(); ++c) mx = std::max(mx, static_cast<double>(logits(i, c)));
    double se = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) se += std::exp(static_cast<double>(logits(i, c)) - mx);
    out.per_sample[i] = mx + std::log(se) - static_cast<double>(logits(i, y));
    total += out.per_sample[i];
  }
  out.mean = labels.empty() ? 0.0 : total / static_cast<double>(labels.size());
  return out;
}

template <typename T>
double loss_inv(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("feature batch shape mismatch");
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  const double sq = (a.template cast<double>() - b.template cast<double>()).squaredNorm();
  return sq / static_cast<double>(a.cols()) / static_cast<double>(a.rows());
}

double loss_total(double task_loss, double inv_loss, double lambda) { return task_loss + lambda * inv_loss; }

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(lambda >= 0)) throw std::invalid_argument("lambda must be >= 0");
  if (batch_size < 1 || epochs < 0 || inv_pairs_per_batch < 1)
    throw std::invalid_argument("batch_size, epochs and inv_pairs_per_batch must be positive");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"epochs", c.epochs},               {"lambda", c.lambda},
          {"inv_pairs_per_batch", c.inv_pairs_per_batch},
          {"seed", c.seed},                   {"beta1", c.beta1},
          {"beta2", c.beta2},                 {"adam_epsilon", c.adam_epsilon},
          {"bn_momentum", c.bn_momentum},     {"schedule", "cosine"},
          {"optimizer", "adam"}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, const TrainConfig& d) {
  TrainConfig c = d;
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.epochs = j.value("epochs", d.epochs);
  c.lambda = j.value("lambda", d.lambda);
  c.inv_pairs_per_batch = j.value("inv_pairs_per_batch", d.inv_pairs_per_batch);
  c.seed = j.value("seed", d.seed);
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.adam_epsilon = j.value("adam_epsilon", d.adam_epsilon);
  c.bn_momentum = j.value("bn_momentum", d.bn_momentum);
  c.validate();
  return c;
}

template <typename T>
Gradients<T> backward(const BasicParams<T>& params, const ImageBatch<T>& batch, std::span<const int> labels,
                      const PairBatch<T>* pairs, const TrainConfig& cfg) {
  if (static_cast<std::size_t>(batch.n) != labels.size()) throw std::invalid_argument("batch/labels size mismatch");
  Gradients<T> g;
  g.weights.resize(params.weights.size());
  for (std::size_t i = 0; i < params.weights.size(); ++i) g.weights[i].assign(params.weights[i].size(), T(0));

  Trace<T> trace;
  auto [logits, features] = forward_impl(params, batch, Mode::train, &trace);
  const Matrix<T> logits_t = logits.transpose();
  const TaskLoss task = loss_task<T>(logits_t, labels);
  g.task_loss = task.mean;

  // d(mean CE)/dlogits = (softmax - onehot) / B, laid out classes x N.
  Matrix<T> dlogits(logits.rows(), logits.cols());
  const double inv_n = 1.0 / static_cast<double>(batch.n);
  for (Eigen::Index s = 0; s < logits.cols(); ++s) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < logits.rows(); ++c) mx = std::max(mx, static_cast<double>(logits(c, s)));
    double se = 0.0;
    for (Eigen::Index c = 0; c < logits.rows(); ++c) se += std::exp(static_cast<double>(logits(c, s)) - mx);
    for (Eigen::Index c = 0; c < logits.rows(); ++c) {
      const double prob = std::exp(static_cast<double>(logits(c, s)) - mx) / se;
      dlogits(c, s) = static_cast<T>((prob - (c == labels[s] ? 1.0 : 0.0)) * inv_n);
    }
  }
  backward_impl(params, trace, dlogits, Matrix<T>(), g.weights);
  g.batch_mean = std::move(trace.batch_mean);
  g.batch_var = std::move(trace.batch_var);

  if (pairs && cfg.lambda > 0.0 && pairs->a.n > 0) {
    if (pairs->a.n != pairs->b.n) throw std::invalid_argument("pair batches differ in size");
    ImageBatch<T> joint;
    joint.n = pairs->a.n * 2;
    joint.channels = pairs->a.channels;
    joint.height = pairs->a.height;
    joint.width = pairs->a.width;
    const std::size_t per = static_cast<std::size_t>(joint.height) * joint.width * pairs->a.n;
    joint.data.resize(per * 2 * joint.channels);
    for (int c = 0; c < joint.channels; ++c) {
      std::copy_n(pairs->a.data.begin() + c * per, per, joint.data.begin() + 2 * c * per);
      std::copy_n(pairs->b.data.begin() + c * per, per, joint.data.begin() + (2 * c + 1) * per);
    }
    Trace<T> ptrace;
    auto [plogits, pfeat] = forward_impl(params, joint, Mode::train, &ptrace);
    const int P = pairs->a.n;
    const int d = static_cast<int>(pfeat.rows());
    const Matrix<T> fa = pfeat.leftCols(P), fb = pfeat.rightCols(P);
    g.inv_loss = loss_inv<T>(Matrix<T>(fa.transpose()), Matrix<T>(fb.transpose()));
    Matrix<T> dfeat(d, 2 * P);
    const T k = static_cast<T>(cfg.lambda * 2.0 / (static_cast<double>(P) * d));
    dfeat.leftCols(P) = (fa - fb) * k;
    dfeat.rightCols(P) = (fb - fa) * k;
    backward_impl(params, ptrace, Matrix<T>(), dfeat, g.weights);
  }
  g.total_loss = loss_total(g.task_loss, g.inv_loss, cfg.lambda);
  g.finite = std::isfinite(g.total_loss) && all_finite(g.weights);
  return g;
}

double cosine_lr(double lr0, std::size_t step, std::size_t total_steps) {
  if (total_steps == 0) return lr0;
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps)));
}

void check_compatible(const Architecture& arch, const Dataset& data) {
  if (data.empty()) return;
  const auto& img = data.samples.front();
  if (img.channels != arch.input_channels || img.height != arch.input_size || img.width != arch.input_size)
    throw std::invalid_argument("dataset images (" + std::to_string(img.height) + "x" + std::to_string(img.width) +
                                "x" + std::to_string(img.channels) + ") do not match the model input");
  for (const auto& s : data.samples)
    if (s.label < 0 || s.label >= arch.classes) throw std::invalid_argument("dataset label out of class range");
}

ModelParams train(ModelParams params, const Dataset& data, std::span<const CounterfactualPair> pairs,
                  const TrainConfig& cfg, TrainLog* log) {
  retain_heap_memory();
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("cannot train on an empty dataset");
  check_compatible(params.arch, data);
  const Layout L = layout_of(params.arch);
  const std::size_t n = data.size();
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t min_batch = params.arch.batch_norm ? 2 : 1;
  std::size_t steps_per_epoch = n / bs;
  if (n % bs >= min_batch) ++steps_per_epoch;
  if (steps_per_epoch == 0) steps_per_epoch = 1;
  const std::size_t total_steps = steps_per_epoch * static_cast<std::size_t>(cfg.epochs);
  const bool use_pairs = cfg.lambda > 0.0 && !pairs.empty();

  std::vector<std::vector<double>> m(params.weights.size()), v(params.weights.size());
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    m[i].assign(params.weights[i].size(), 0.0);
    v[i].assign(params.weights[i].size(), 0.0);
  }

  Rng rng = make_rng(cfg.seed, stream::shuffle);
  std::vector<std::size_t> order(n);
  std::vector<std::size_t> pair_order(pairs.size());
  std::iota(pair_order.begin(), pair_order.end(), 0);
  std::size_t pair_cursor = pairs.size();
  const std::size_t pairs_per_step = std::min<std::size_t>(cfg.inv_pairs_per_batch, pairs.size());

  std::size_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t bi = 0; bi < steps_per_epoch; ++bi, ++step) {
      const std::size_t begin = bi * bs;
      const std::size_t end = std::min(n, begin + bs);
      std::span<const std::size_t> idx(order.data() + begin, end - begin);
      auto batch = make_batch<float>(data, idx);
      std::vector<int> labels;
      labels.reserve(idx.size());
      for (auto i : idx) labels.push_back(data.samples[i].label);

      PairBatch<float> pb;
      if (use_pairs) {
        if (pair_cursor + pairs_per_step > pairs.size()) {
          std::shuffle(pair_order.begin(), pair_order.end(), rng);
          pair_cursor = 0;
        }
        std::vector<const LabeledImage*> as, bs_;
        for (std::size_t k = 0; k < pairs_per_step; ++k) {
          const auto& pr = pairs[pair_order[pair_cursor + k]];
          as.push_back(&pr.a);
          bs_.push_back(&pr.b);
        }
        pair_cursor += pairs_per_step;
        pb.a = make_batch<float>(std::span<const LabeledImage* const>(as));
        pb.b = make_batch<float>(std::span<const LabeledImage* const>(bs_));
      }

      auto g = backward<float>(params, batch, labels, use_pairs ? &pb : nullptr, cfg);
      if (!g.finite) throw std::runtime_error("numerical overflow at training step " + std::to_string(step));

      const double lr = cosine_lr(cfg.learning_rate, step, total_steps);
      const double t = static_cast<double>(step + 1);
      const double c1 = 1.0 - std::pow(cfg.beta1, t), c2 = 1.0 - std::pow(cfg.beta2, t);
      for (std::size_t i = 0; i < params.weights.size(); ++i) {
        auto& w = params.weights[i].values;
        const auto& gi = g.weights[i];
        auto& mi = m[i];
        auto& vi = v[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
          const double gk = gi[k];
          mi[k] = cfg.beta1 * mi[k] + (1.0 - cfg.beta1) * gk;
          vi[k] = cfg.beta2 * vi[k] + (1.0 - cfg.beta2) * gk * gk;
          w[k] -= static_cast<float>(lr * (mi[k] / c1) / (std::sqrt(vi[k] / c2) + cfg.adam_epsilon));
        }
      }
      for (std::size_t l = 0; l < L.conv.size() && params.arch.batch_norm; ++l) {
        auto& rm = params.buffers[L.conv[l].running_mean].values;
        auto& rv = params.buffers[L.conv[l].running_var].values;
        for (std::size_t c = 0; c < rm.size(); ++c) {
          rm[c] = static_cast<float>(cfg.bn_momentum * rm[c] + (1.0 - cfg.bn_momentum) * g.batch_mean[l][c]);
          rv[c] = static_cast<float>(cfg.bn_momentum * rv[c] + (1.0 - cfg.bn_momentum) * g.batch_var[l][c]);
        }
      }
      if (log) {
        log->step_loss.push_back(g.total_loss);
        log->step_task_loss.push_back(g.task_loss);
        log->step_inv_loss.push_back(g.inv_loss);
        log->step_lr.push_back(lr);
      }
    }
  }
  return params;
}

Evaluation evaluate(const ModelParams& params, const Dataset& data, int batch_size) {
  retain_heap_memory();
  check_compatible(params.arch, data);
  Evaluation ev;
  const std::size_t n = data.size();
  ev.loss.resize(n);
  ev.predicted.resize(n);
  const std::size_t bs = static_cast<std::size_t>(std::max(1, batch_size));
  const std::size_t batches = (n + bs - 1) / bs;
  parallel_for(batches, [&](std::size_t b) {
    const std::size_t begin = b * bs, end = std::min(n, begin + bs);
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    auto batch = make_batch<float>(data, idx);
    auto out = forward<float>(params, batch, Mode::eval);
    std::vector<int> labels;
    for (auto i : idx) labels.push_back(data.samples[i].label);
    auto tl = loss_task<float>(out.logits, labels);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      ev.loss[begin + k] = tl.per_sample[k];
      Eigen::Index arg = 0;
      out.logits.row(static_cast<Eigen::Index>(k)).maxCoeff(&arg);
      ev.predicted[begin + k] = static_cast<int>(arg);
    }
  });
  std::size_t correct = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    correct += ev.predicted[i] == data.samples[i].label;
    total += ev.loss[i];
  }
  ev.accuracy = n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
  ev.mean_loss = n ? total / static_cast<double>(n) : 0.0;
  return ev;
}

#define DOELENS_INSTANTIATE(T)                                                                               \
  template BasicParams<T> init_params<T>(const Architecture&, std::uint64_t);                               \
  template ImageBatch<T> make_batch<T>(std::span<const LabeledImage* const>);                               \
  template ImageBatch<T> make_batch<T>(const Dataset&, std::span<const std::size_t>);                       \
  template ForwardResult<T> forward<T>(const BasicParams<T>&, const ImageBatch<T>&, Mode);                  \
  template TaskLoss loss_task<T>(const Matrix<T>&, std::span<const int>);                                   \
  template double loss_inv<T>(const Matrix<T>&, const Matrix<T>&);                                          \
  template Gradients<T> backward<T>(const BasicParams<T>&, const ImageBatch<T>&, std::span<const int>,      \
                                    const PairBatch<T>*, const TrainConfig&);

DOELENS_INSTANTIATE(float)
DOELENS_INSTANTIATE(double)

#undef DOELENS_INSTANTIATE

}  // namespace doelens::nnet
