#include "ppm/pos_encoding.hpp"

#include <cmath>
#include <string>

#include "ppm/errors.hpp"
#include "ppm/ops.hpp"

namespace ppm {

std::string_view to_string(PeMode mode) {
  switch (mode) {
    case PeMode::None: return "none";
    case PeMode::Sinusoidal: return "sin";
    case PeMode::Structural: return "spe";
  }
  return "none";
}

PeMode parse_pe_mode(std::string_view text) {
  if (text == "none") return PeMode::None;
  if (text == "sin") return PeMode::Sinusoidal;
  if (text == "spe") return PeMode::Structural;
  throw Error(ErrorKind::Config, "unknown pe mode '" + std::string(text) + "' (none|sin|spe)");
}

template <typename T>
Tensor<T> sinusoidal_pe(std::size_t n, std::size_t d) {
  if (d % 2 != 0) throw Error(ErrorKind::Parameter, "sinusoidal_pe: d must be even");
  Tensor<T> pe(n, d);
  for (std::size_t i = 0; i < d; i += 2) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
    for (std::size_t pos = 0; pos < n; ++pos) {
      const double angle = static_cast<double>(pos) * freq;
      pe(pos, i) = static_cast<T>(std::sin(angle));
      pe(pos, i + 1) = static_cast<T>(std::cos(angle));
    }
  }
  return pe;
}

Tensor<double> token_spectral_table(const NodeEmbeddingTable& table, const Vocabulary& vocab) {
  Tensor<double> out(vocab.size(), table.k());
  for (std::size_t t = 0; t < vocab.size(); ++t) {
    auto v = embedding_for_token(table, vocab, static_cast<int>(t));
    std::copy(v.begin(), v.end(), out.row(t).begin());
  }
  return out;
}

template <typename T>
Tensor<T> structural_pe(std::span<const int> ids, const Tensor<T>& token_spectral,
                        const Tensor<T>& theta_w, const Tensor<T>& theta_b) {
  return ops::linear(ops::embedding_lookup(token_spectral, ids), theta_w, theta_b);
}

template <typename T>
void structural_pe_backward(std::span<const int> ids, const Tensor<T>& token_spectral,
                            const Tensor<T>& d_out, Parameter<T>& theta_w,
                            Parameter<T>& theta_b) {
  ops::linear_backward(ops::embedding_lookup(token_spectral, ids), theta_w.value, d_out,
                       theta_w.grad, theta_b.grad, /*want_dx=*/false);
}

template <typename T>
Tensor<T> apply_pe(const Tensor<T>& x, const PEConfig& config, const PeContext<T>& context) {
  switch (config.mode) {
    case PeMode::None:
      return x;
    case PeMode::Sinusoidal: {
      Tensor<T> out = x;
      out += sinusoidal_pe<T>(x.rows(), x.cols());
      return out;
    }
    case PeMode::Structural: {
      if (!context.token_spectral || !context.theta_w || !context.theta_b) {
        throw Error(ErrorKind::Config, "structural encoding needs an ontology table and Theta");
      }
      Tensor<T> out = x;
      out += structural_pe(context.ids, *context.token_spectral, *context.theta_w,
                           *context.theta_b);
      return out;
    }
  }
  return x;
}

#define PPM_INSTANTIATE_PE(T)                                                             \
  template Tensor<T> sinusoidal_pe<T>(std::size_t, std::size_t);                          \
  template Tensor<T> structural_pe(std::span<const int>, const Tensor<T>&,                \
                                   const Tensor<T>&, const Tensor<T>&);                   \
  template void structural_pe_backward(std::span<const int>, const Tensor<T>&,            \
                                       const Tensor<T>&, Parameter<T>&, Parameter<T>&);   \
  template Tensor<T> apply_pe(const Tensor<T>&, const PEConfig&, const PeContext<T>&);

PPM_INSTANTIATE_PE(float)
PPM_INSTANTIATE_PE(double)

#undef PPM_INSTANTIATE_PE

}  // namespace ppm
