#pragma once

// Randomised finite-difference checks shared by the unit tests and the
// acceptance binary. Each case draws shapes and values from `rng`, builds a
// scalar loss sum(out * R) for a fixed random R (or the masked cross-entropy
// itself) and compares analytic gradients with central differences.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ppm/grad_check.hpp"
#include "ppm/model.hpp"
#include "ppm/ops.hpp"
#include "ppm/pos_encoding.hpp"
#include "ppm/training.hpp"
#include "test_util.hpp"

namespace ppm::test {

inline constexpr double kPrimitiveEps = 1e-5;
inline constexpr double kModelEps = 1e-5;
// Whole-model losses carry roundoff near 1e-11; gradients that are exactly
// zero (key biases) are compared on absolute error below this.
inline constexpr double kModelFloor = 1e-6;
inline constexpr double kKinkMargin = 1e-2;

inline double min_abs(const Tensor<double>& t) {
  double m = INFINITY;
  for (double v : t.values()) m = std::min(m, std::abs(v));
  return m;
}

inline Parameter<double> random_param(const std::string& name, std::size_t rows,
                                      std::size_t cols, Rng& rng, double scale = 1.0) {
  Parameter<double> p(name, rows, cols);
  p.value = random_tensor<double>(rows, cols, rng, scale);
  return p;
}

inline double weighted_sum(const Tensor<double>& out, const Tensor<double>& weights) {
  double acc = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) acc += out[i] * weights[i];
  return acc;
}

inline void add_into(Tensor<double>& into, const Tensor<double>& from) { into += from; }

inline GradCheckResult check_params(std::vector<Parameter<double>*> params,
                                    const std::function<double()>& loss,
                                    const std::function<void()>& backward, double eps,
                                    double floor = 1e-8) {
  return grad_check(loss, backward, std::span<Parameter<double>* const>(params), eps, floor);
}

inline GradCheckResult check_linear(Rng& rng) {
  const std::size_t n = 1 + rng.below(6), p = 1 + rng.below(7), q = 1 + rng.below(7);
  auto x = random_param("x", n, p, rng);
  auto w = random_param("w", p, q, rng);
  auto b = random_param("b", 1, q, rng);
  const auto r = random_tensor<double>(n, q, rng);
  return check_params(
      {&x, &w, &b}, [&] { return weighted_sum(ops::linear(x.value, w.value, b.value), r); },
      [&] { add_into(x.grad, ops::linear_backward(x.value, w.value, r, w.grad, b.grad)); },
      kPrimitiveEps);
}

inline GradCheckResult check_layer_norm(Rng& rng) {
  const std::size_t n = 1 + rng.below(5), d = 2 + rng.below(8);
  auto x = random_param("x", n, d, rng, 2.0);
  auto gain = random_param("gain", 1, d, rng);
  auto bias = random_param("bias", 1, d, rng);
  const auto r = random_tensor<double>(n, d, rng);
  const double eps = 1e-5;
  return check_params(
      {&x, &gain, &bias},
      [&] { return weighted_sum(ops::layer_norm(x.value, gain.value, bias.value, eps), r); },
      [&] {
        ops::LayerNormCache<double> cache;
        ops::layer_norm(x.value, gain.value, bias.value, eps, &cache);
        add_into(x.grad, ops::layer_norm_backward(r, gain.value, cache, gain.grad, bias.grad));
      },
      kPrimitiveEps);
}

inline GradCheckResult check_attention(Rng& rng) {
  const std::size_t n = 1 + rng.below(7), dh = 1 + rng.below(6);
  auto q = random_param("q", n, dh, rng);
  auto k = random_param("k", n, dh, rng);
  auto v = random_param("v", n, dh, rng);
  const auto r = random_tensor<double>(n, dh, rng);
  return check_params(
      {&q, &k, &v}, [&] { return weighted_sum(ops::causal_attention(q.value, k.value, v.value), r); },
      [&] {
        ops::AttentionCache<double> cache;
        ops::causal_attention(q.value, k.value, v.value, &cache);
        auto g = ops::causal_attention_backward(q.value, k.value, v.value, cache, r);
        add_into(q.grad, g.d_q);
        add_into(k.grad, g.d_k);
        add_into(v.grad, g.d_v);
      },
      kPrimitiveEps);
}

inline std::vector<int> random_ids(std::size_t n, std::size_t vocab, Rng& rng) {
  std::vector<int> ids(n);
  for (auto& id : ids) id = static_cast<int>(rng.below(vocab));
  return ids;
}

inline GradCheckResult check_embedding(Rng& rng) {
  const std::size_t vocab = 2 + rng.below(8), d = 1 + rng.below(6), n = 1 + rng.below(8);
  auto table = random_param("table", vocab, d, rng);
  const auto ids = random_ids(n, vocab, rng);
  const auto r = random_tensor<double>(n, d, rng);
  return check_params(
      {&table}, [&] { return weighted_sum(ops::embedding_lookup(table.value, std::span<const int>(ids)), r); },
      [&] { ops::embedding_backward(r, std::span<const int>(ids), table.grad); }, kPrimitiveEps);
}

inline GradCheckResult check_cross_entropy(Rng& rng) {
  const std::size_t n = 1 + rng.below(7), vocab = 3 + rng.below(8);
  auto logits = random_param("logits", n, vocab, rng, 3.0);
  auto targets = random_ids(n, vocab, rng);
  targets[rng.below(n)] = static_cast<int>(kFirstActivity % vocab);  // at least one counted
  const std::vector<int> ignore{kPad, kSos};
  return check_params(
      {&logits},
      [&] { return ops::cross_entropy_masked(logits.value, std::span<const int>(targets), std::span<const int>(ignore)).mean(); },
      [&] {
        auto l = ops::cross_entropy_masked(logits.value, std::span<const int>(targets), std::span<const int>(ignore));
        add_into(logits.grad, l.d_logits);
      },
      kPrimitiveEps);
}

inline GradCheckResult check_relu(Rng& rng) {
  const std::size_t n = 1 + rng.below(5), d = 1 + rng.below(8);
  auto x = random_param("x", n, d, rng);
  // Keep every entry away from the kink.
  for (auto& v : x.value.values()) v += v >= 0 ? 1e-2 : -1e-2;
  const auto r = random_tensor<double>(n, d, rng);
  return check_params(
      {&x}, [&] { return weighted_sum(ops::relu(x.value), r); },
      [&] { add_into(x.grad, ops::relu_backward(r, x.value)); }, kPrimitiveEps);
}

inline GradCheckResult check_dropout(Rng& rng) {
  const std::size_t n = 1 + rng.below(5), d = 1 + rng.below(8);
  auto x = random_param("x", n, d, rng);
  const double rate = rng.uniform(0.05, 0.6);
  const std::uint64_t seed = rng.next();
  const auto r = random_tensor<double>(n, d, rng);
  return check_params(
      {&x},
      [&] {
        Rng fixed(seed);
        return weighted_sum(ops::dropout(x.value, rate, true, fixed), r);
      },
      [&] {
        Rng fixed(seed);
        Tensor<double> mask;
        ops::dropout(x.value, rate, true, fixed, &mask);
        add_into(x.grad, ops::dropout_backward(r, mask));
      },
      kPrimitiveEps);
}

inline GradCheckResult check_structural_pe(Rng& rng) {
  const std::size_t vocab = 4 + rng.below(6), k = 1 + rng.below(5), d = 1 + rng.below(6);
  const auto spectral = random_tensor<double>(vocab, k, rng);
  auto w = random_param("theta_w", k, d, rng);
  auto b = random_param("theta_b", 1, d, rng);
  const auto ids = random_ids(1 + rng.below(8), vocab, rng);
  const auto r = random_tensor<double>(ids.size(), d, rng);
  return check_params(
      {&w, &b},
      [&] { return weighted_sum(structural_pe(std::span<const int>(ids), spectral, w.value, b.value), r); },
      [&] { structural_pe_backward(std::span<const int>(ids), spectral, r, w, b); }, kPrimitiveEps);
}

/// Every primitive check, by name, for table-driven callers.
inline std::vector<std::pair<std::string, std::function<GradCheckResult(Rng&)>>> primitive_cases() {
  return {{"linear", check_linear},           {"layer_norm", check_layer_norm},
          {"causal_attention", check_attention}, {"embedding", check_embedding},
          {"cross_entropy", check_cross_entropy}, {"relu", check_relu},
          {"dropout", check_dropout},         {"structural_pe", check_structural_pe}};
}

/// Small random model (dropout configured but disabled in the pass), all
/// parameters jittered away from their structured initial values, masked
/// cross-entropy over a padded sequence.
inline GradCheckResult check_model(Rng& rng) {
  ModelConfig config;
  config.heads = 1 + static_cast<int>(rng.below(3));
  config.d_model = config.heads * 2 * (1 + static_cast<int>(rng.below(3)));
  config.hidden = 2 + static_cast<int>(rng.below(8));
  config.layers = 1 + static_cast<int>(rng.below(2));
  config.dropout = 0.3;
  config.vocab_size = kFirstActivity + 2 + static_cast<int>(rng.below(6));
  config.ffn_in_blocks = rng.below(2) == 1;
  const PeMode modes[] = {PeMode::None, PeMode::Sinusoidal, PeMode::Structural};
  config.pe = {modes[rng.below(3)], 1 + static_cast<int>(rng.below(4))};

  Tensor<double> spectral;
  if (config.pe.mode == PeMode::Structural) {
    spectral = random_tensor<double>(static_cast<std::size_t>(config.vocab_size),
                                      static_cast<std::size_t>(config.pe.k), rng);
    for (int s = 0; s < kFirstActivity; ++s) {
      for (auto& v : spectral.row(static_cast<std::size_t>(s))) v = 0.0;
    }
  }
  const auto initial = Model<double>::initialize(config, rng.next(), spectral);

  // SOS, activities, EOS, padding.
  const std::size_t len = 2 + rng.below(6);
  std::vector<int> ids{kSos};
  for (std::size_t i = 0; i < len; ++i) {
    ids.push_back(kFirstActivity + static_cast<int>(rng.below(static_cast<std::size_t>(config.vocab_size - kFirstActivity))));
  }
  ids.push_back(kEos);
  ids.push_back(kPad);
  const std::vector<int> inputs(ids.begin(), ids.end() - 1);
  const std::vector<int> targets(ids.begin() + 1, ids.end());
  const std::span<const int> ignore(kIgnoredTargets);

  // Redraw the jitter until every ReLU input sits clear of the kink, so a
  // finite-difference step cannot cross it.
  auto model = initial;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    model = initial;
    for (auto* p : model.params().all()) {
      for (auto& v : p->value.values()) v += rng.uniform(-0.1, 0.1);
    }
    ForwardCache<double> cache;
    model.forward(inputs, false, nullptr, &cache);
    if (min_abs(cache.head_pre) < kKinkMargin) continue;
    bool clear = true;
    for (const auto& block : cache.blocks) {
      if (min_abs(block.ffn_pre) < kKinkMargin) clear = false;
    }
    if (clear) break;
  }

  auto params = model.params().all();
  return check_params(
      params,
      [&] {
        auto logits = model.forward(inputs, false, nullptr);
        return ops::cross_entropy_masked(logits, std::span<const int>(targets), ignore).mean();
      },
      [&] {
        ForwardCache<double> cache;
        auto logits = model.forward(inputs, false, nullptr, &cache);
        auto loss = ops::cross_entropy_masked(logits, std::span<const int>(targets), ignore);
        model.backward(cache, loss.d_logits);
      },
      kModelEps, kModelFloor);
}

}  // namespace ppm::test
