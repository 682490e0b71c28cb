#include "ppm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ppm/errors.hpp"

namespace ppm::ops {

namespace {

void require_shape(bool ok, const char* what) {
  if (!ok) throw Error(ErrorKind::Shape, std::string("shape mismatch in ") + what);
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  Tensor<T> t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  }
  return t;
}

// out[i,:] += sum_k a[i,k] * b[k,:]
template <typename T>
void matmul_accumulate(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& out) {
  const std::size_t n = a.rows(), p = a.cols(), q = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    T* o = out.data() + i * q;
    const T* ai = a.data() + i * p;
    for (std::size_t k = 0; k < p; ++k) {
      const T s = ai[k];
      const T* bk = b.data() + k * q;
      for (std::size_t j = 0; j < q; ++j) o[j] += s * bk[j];
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> embedding_lookup(const Tensor<T>& table, std::span<const int> ids) {
  const std::size_t d = table.cols();
  Tensor<T> out(ids.size(), d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= table.rows()) {
      throw Error(ErrorKind::Index, "embedding_lookup: id " + std::to_string(ids[i]) +
                                        " outside table of " + std::to_string(table.rows()));
    }
    auto src = table.row(static_cast<std::size_t>(ids[i]));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

template <typename T>
void embedding_backward(const Tensor<T>& d_out, std::span<const int> ids, Tensor<T>& d_table) {
  require_shape(d_out.rows() == ids.size() && d_out.cols() == d_table.cols(),
                "embedding_backward");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto dst = d_table.row(static_cast<std::size_t>(ids[i]));
    auto src = d_out.row(i);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require_shape(x.cols() == w.rows() && b.rows() == 1 && b.cols() == w.cols(), "linear");
  Tensor<T> y(x.rows(), w.cols());
  for (std::size_t i = 0; i < y.rows(); ++i) {
    std::copy(b.data(), b.data() + b.cols(), y.row(i).begin());
  }
  matmul_accumulate(x, w, y);
  return y;
}

template <typename T>
Tensor<T> linear_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& d_out,
                          Tensor<T>& d_w, Tensor<T>& d_b, bool want_dx) {
  require_shape(d_out.rows() == x.rows() && d_out.cols() == w.cols() && d_w.same_shape(w) &&
                    d_b.cols() == w.cols(),
                "linear_backward");
  const std::size_t n = x.rows(), p = w.rows(), q = w.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const T* dy = d_out.data() + i * q;
    const T* xi = x.data() + i * p;
    for (std::size_t k = 0; k < p; ++k) {
      const T s = xi[k];
      T* dw = d_w.data() + k * q;
      for (std::size_t j = 0; j < q; ++j) dw[j] += s * dy[j];
    }
    T* db = d_b.data();
    for (std::size_t j = 0; j < q; ++j) db[j] += dy[j];
  }
  if (!want_dx) return {};
  Tensor<T> d_x(n, p);
  matmul_accumulate(d_out, transpose(w), d_x);
  return d_x;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps,
                     LayerNormCache<T>* cache) {
  const std::size_t n = x.rows(), d = x.cols();
  require_shape(gain.size() == d && bias.size() == d && d >= 1, "layer_norm");
  Tensor<T> y(n, d);
  if (cache) {
    cache->normalized = Tensor<T>(n, d);
    cache->rstd.assign(n, T{0});
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto row = x.row(i);
    T mean = 0;
    for (T v : row) mean += v;
    mean /= static_cast<T>(d);
    T var = 0;
    for (T v : row) var += (v - mean) * (v - mean);
    var /= static_cast<T>(d);
    const T rstd = T{1} / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const T xhat = (row[j] - mean) * rstd;
      y(i, j) = xhat * gain[j] + bias[j];
      if (cache) cache->normalized(i, j) = xhat;
    }
    if (cache) cache->rstd[i] = rstd;
  }
  return y;
}

template <typename T>
Tensor<T> layer_norm_backward(const Tensor<T>& d_out, const Tensor<T>& gain,
                              const LayerNormCache<T>& cache, Tensor<T>& d_gain,
                              Tensor<T>& d_bias) {
  const std::size_t n = d_out.rows(), d = d_out.cols();
  require_shape(cache.normalized.rows() == n && cache.normalized.cols() == d,
                "layer_norm_backward");
  Tensor<T> d_x(n, d);
  std::vector<T> dxhat(d);
  for (std::size_t i = 0; i < n; ++i) {
    T mean_dxhat = 0, mean_dxhat_xhat = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const T g = d_out(i, j);
      const T xhat = cache.normalized(i, j);
      d_gain[j] += g * xhat;
      d_bias[j] += g;
      dxhat[j] = g * gain[j];
      mean_dxhat += dxhat[j];
      mean_dxhat_xhat += dxhat[j] * xhat;
    }
    mean_dxhat /= static_cast<T>(d);
    mean_dxhat_xhat /= static_cast<T>(d);
    for (std::size_t j = 0; j < d; ++j) {
      d_x(i, j) =
          cache.rstd[i] * (dxhat[j] - mean_dxhat - cache.normalized(i, j) * mean_dxhat_xhat);
    }
  }
  return d_x;
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  Tensor<T> y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto in = x.row(i);
    auto out = y.row(i);
    if (in.empty()) continue;
    const T mx = *std::max_element(in.begin(), in.end());
    T sum = 0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      out[j] = std::exp(in[j] - mx);
      sum += out[j];
    }
    for (auto& v : out) v /= sum;
  }
  return y;
}

template <typename T>
Tensor<T> causal_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                           AttentionCache<T>* cache) {
  require_shape(q.same_shape(k) && q.rows() == v.rows(), "causal_attention");
  const std::size_t n = q.rows(), dh = q.cols(), dv = v.cols();
  const T scale = T{1} / std::sqrt(static_cast<T>(dh));

  // Future scores are set to the mask constant directly; after the max
  // subtraction they underflow to exactly zero weight.
  Tensor<T> scores(n, n, static_cast<T>(kMaskValue));
  for (std::size_t i = 0; i < n; ++i) {
    const T* qi = q.data() + i * dh;
    for (std::size_t j = 0; j <= i; ++j) {
      const T* kj = k.data() + j * dh;
      T s = 0;
      for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
      scores(i, j) = s * scale;
    }
  }
  Tensor<T> weights = softmax_rows(scores);

  Tensor<T> out(n, dv);
  for (std::size_t i = 0; i < n; ++i) {
    T* o = out.data() + i * dv;
    for (std::size_t j = 0; j <= i; ++j) {
      const T w = weights(i, j);
      const T* vj = v.data() + j * dv;
      for (std::size_t c = 0; c < dv; ++c) o[c] += w * vj[c];
    }
  }
  if (cache) cache->weights = std::move(weights);
  return out;
}

template <typename T>
AttentionGrads<T> causal_attention_backward(const Tensor<T>& q, const Tensor<T>& k,
                                            const Tensor<T>& v, const AttentionCache<T>& cache,
                                            const Tensor<T>& d_out) {
  const std::size_t n = q.rows(), dh = q.cols(), dv = v.cols();
  require_shape(d_out.rows() == n && d_out.cols() == dv && cache.weights.rows() == n,
                "causal_attention_backward");
  const T scale = T{1} / std::sqrt(static_cast<T>(dh));
  AttentionGrads<T> g{Tensor<T>(n, dh), Tensor<T>(n, dh), Tensor<T>(n, dv)};
  std::vector<T> d_w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T* dyi = d_out.data() + i * dv;
    T weighted = 0;
    for (std::size_t j = 0; j <= i; ++j) {
      const T* vj = v.data() + j * dv;
      T s = 0;
      for (std::size_t c = 0; c < dv; ++c) s += dyi[c] * vj[c];
      d_w[j] = s;
      weighted += cache.weights(i, j) * s;
      T* dvj = g.d_v.data() + j * dv;
      const T w = cache.weights(i, j);
      for (std::size_t c = 0; c < dv; ++c) dvj[c] += w * dyi[c];
    }
    const T* qi = q.data() + i * dh;
    T* dqi = g.d_q.data() + i * dh;
    for (std::size_t j = 0; j <= i; ++j) {
      const T ds = cache.weights(i, j) * (d_w[j] - weighted) * scale;
      const T* kj = k.data() + j * dh;
      T* dkj = g.d_k.data() + j * dh;
      for (std::size_t c = 0; c < dh; ++c) {
        dqi[c] += ds * kj[c];
        dkj[c] += ds * qi[c];
      }
    }
  }
  return g;
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, bool training, Rng& rng, Tensor<T>* mask) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw Error(ErrorKind::Parameter, "dropout: rate must lie in [0, 1)");
  }
  if (mask) *mask = Tensor<T>();
  if (!training || rate == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  Tensor<T> m(x.rows(), x.cols());
  Tensor<T> y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    m[i] = rng.uniform() < rate ? T{0} : keep_scale;
    y[i] = x[i] * m[i];
  }
  if (mask) *mask = std::move(m);
  return y;
}

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& d_out, const Tensor<T>& mask) {
  if (mask.size() == 0) return d_out;
  Tensor<T> d_x(d_out.rows(), d_out.cols());
  for (std::size_t i = 0; i < d_out.size(); ++i) d_x[i] = d_out[i] * mask[i];
  return d_x;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& d_out, const Tensor<T>& x) {
  Tensor<T> d_x(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) d_x[i] = x[i] > T{0} ? d_out[i] : T{0};
  return d_x;
}

template <typename T>
MaskedLoss<T> cross_entropy_masked(const Tensor<T>& logits, std::span<const int> targets,
                                   std::span<const int> ignore, double grad_scale) {
  require_shape(targets.size() == logits.rows(), "cross_entropy_masked");
  const std::size_t n = logits.rows(), vocab = logits.cols();
  MaskedLoss<T> loss;
  loss.d_logits = Tensor<T>(n, vocab);

  std::vector<bool> counted(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const int t = targets[i];
    if (t < 0 || static_cast<std::size_t>(t) >= vocab) {
      throw Error(ErrorKind::Index, "cross_entropy_masked: target " + std::to_string(t) +
                                        " outside " + std::to_string(vocab) + " classes");
    }
    counted[i] = std::find(ignore.begin(), ignore.end(), t) == ignore.end();
    if (counted[i]) ++loss.counted;
  }
  if (loss.counted == 0) return loss;
  const T scale =
      static_cast<T>(grad_scale != 0.0 ? grad_scale : 1.0 / static_cast<double>(loss.counted));

  for (std::size_t i = 0; i < n; ++i) {
    if (!counted[i]) continue;
    auto row = logits.row(i);
    const T mx = *std::max_element(row.begin(), row.end());
    T sum = 0;
    for (T v : row) sum += std::exp(v - mx);
    const T log_z = mx + std::log(sum);
    const auto t = static_cast<std::size_t>(targets[i]);
    loss.sum += static_cast<double>(log_z - row[t]);
    auto d = loss.d_logits.row(i);
    for (std::size_t j = 0; j < vocab; ++j) d[j] = std::exp(row[j] - log_z) * scale;
    d[t] -= scale;
  }
  return loss;
}

#define PPM_INSTANTIATE_OPS(T)                                                                  \
  template Tensor<T> embedding_lookup(const Tensor<T>&, std::span<const int>);                  \
  template void embedding_backward(const Tensor<T>&, std::span<const int>, Tensor<T>&);         \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> linear_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,      \
                                     Tensor<T>&, Tensor<T>&, bool);                             \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T,        \
                                LayerNormCache<T>*);                                            \
  template Tensor<T> layer_norm_backward(const Tensor<T>&, const Tensor<T>&,                    \
                                         const LayerNormCache<T>&, Tensor<T>&, Tensor<T>&);     \
  template Tensor<T> softmax_rows(const Tensor<T>&);                                            \
  template Tensor<T> causal_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                      AttentionCache<T>*);                                      \
  template AttentionGrads<T> causal_attention_backward(const Tensor<T>&, const Tensor<T>&,      \
                                                       const Tensor<T>&,                        \
                                                       const AttentionCache<T>&,                \
                                                       const Tensor<T>&);                       \
  template Tensor<T> dropout(const Tensor<T>&, double, bool, Rng&, Tensor<T>*);                 \
  template Tensor<T> dropout_backward(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> relu(const Tensor<T>&);                                                    \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                         \
  template MaskedLoss<T> cross_entropy_masked(const Tensor<T>&, std::span<const int>,           \
                                              std::span<const int>, double);

PPM_INSTANTIATE_OPS(float)
PPM_INSTANTIATE_OPS(double)

#undef PPM_INSTANTIATE_OPS

}  // namespace ppm::ops
