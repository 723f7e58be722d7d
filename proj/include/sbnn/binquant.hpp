/* Copyright 2026 The SBNN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cmath>
#include <cstddef>

#include "sbnn/common.hpp"

/// Per-layer quantization into a two-value domain {alpha, beta}.
///
/// A layer's weights are binarized with the modified sign and reconstructed
/// as w = tau * sign(w~) + phi, i.e. alpha = phi - tau and beta = phi + tau.
/// The same domain is written over {0,1} bits as w = (bit + xi) * eta.
namespace sbnn::binquant {

template <typename Scalar>
struct Omega {
  Scalar tau = Scalar(1);
  Scalar phi = Scalar(0);

  [[nodiscard]] Scalar alpha() const { return phi - tau; }
  [[nodiscard]] Scalar beta() const { return phi + tau; }
  [[nodiscard]] Scalar eta() const { return beta() - alpha(); }
  [[nodiscard]] Scalar xi() const { return alpha() / eta(); }
  /// alpha < beta.
  [[nodiscard]] bool is_canonical() const { return tau > Scalar(0); }

  static Omega from_alpha_beta(Scalar alpha, Scalar beta) {
    return {(beta - alpha) / Scalar(2), (alpha + beta) / Scalar(2)};
  }
  static Omega from_xi_eta(Scalar xi, Scalar eta) {
    return from_alpha_beta(xi * eta, (Scalar(1) + xi) * eta);
  }
  /// The standard {-1, +1} domain (xi = -1/2, eta = 2).
  static Omega plus_minus_one() { return {Scalar(1), Scalar(0)}; }

  friend bool operator==(const Omega&, const Omega&) = default;
};

using OmegaParams = Omega<double>;

struct QuantStats {
  std::size_t upper = 0;  // +1 entries
  std::size_t lower = 0;  // -1 entries
  std::size_t total = 0;
  double p = 0.0;         // upper / total
};

/// Thrown when every sign is equal: the closed form has a zero denominator.
class DegenerateSign : public Error {
 public:
  using Error::Error;
};

template <typename Derived>
SignWeights sign_binarize(const Eigen::MatrixBase<Derived>& w) {
  if (!w.allFinite()) throw ValidationError("sign_binarize: non-finite weight");
  SignWeights out(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    out[i] = w(i) >= 0 ? std::int8_t{1} : std::int8_t{-1};
  }
  return out;
}

/// Clipped straight-through derivative of sign.
template <typename Scalar>
constexpr Scalar ste_gradient(Scalar upstream, Scalar latent) {
  return (latent >= Scalar(-1) && latent <= Scalar(1)) ? upstream : Scalar(0);
}

inline QuantStats quant_stats(const SignWeights& wb) {
  QuantStats s;
  s.total = static_cast<std::size_t>(wb.size());
  for (Eigen::Index i = 0; i < wb.size(); ++i) {
    if (wb[i] > 0) ++s.upper;
  }
  s.lower = s.total - s.upper;
  s.p = s.total == 0 ? 0.0 : static_cast<double>(s.upper) / static_cast<double>(s.total);
  return s;
}

namespace detail {
template <typename Derived>
void check_lengths(const Eigen::MatrixBase<Derived>& w, const SignWeights& wb) {
  if (w.size() != wb.size()) throw ShapeError("weights and signs differ in length");
  if (w.size() == 0) throw ValidationError("empty weight vector");
}
}  // namespace detail

/// Minimizer of ||w - (tau * wb + phi)||^2. The returned domain is
/// non-canonical (tau <= 0) when the signs disagree with the weights badly
/// enough; check is_canonical().
template <typename Derived>
Omega<typename Derived::Scalar> fit_omega_closed_form(const Eigen::MatrixBase<Derived>& w,
                                                      const SignWeights& wb) {
  using Scalar = typename Derived::Scalar;
  detail::check_lengths(w, wb);
  const auto stats = quant_stats(wb);
  if (stats.upper == 0 || stats.upper == stats.total) {
    throw DegenerateSign("fit_omega_closed_form: all signs are equal");
  }
  const Scalar n = static_cast<Scalar>(stats.total);
  const Scalar s = Scalar(2) * static_cast<Scalar>(stats.p) - Scalar(1);
  const Scalar l1 = w.template lpNorm<1>();
  const Scalar sum = w.sum();
  const Scalar denom = n * (Scalar(1) - s * s);
  return {(l1 - s * sum) / denom, (sum - s * l1) / denom};
}

template <typename Scalar>
struct OmegaFit {
  Omega<Scalar> omega;
  bool degenerate = false;  // all signs equal: tau = 0, phi = mean(w)
};

/// Closed-form fit with the constant-layer fallback for p in {0, 1}.
template <typename Derived>
OmegaFit<typename Derived::Scalar> fit_omega(const Eigen::MatrixBase<Derived>& w,
                                             const SignWeights& wb) {
  using Scalar = typename Derived::Scalar;
  detail::check_lengths(w, wb);
  const auto stats = quant_stats(wb);
  if (stats.upper == 0 || stats.upper == stats.total) {
    return {{Scalar(0), w.mean()}, true};
  }
  return {fit_omega_closed_form(w, wb), false};
}

/// Squared reconstruction error ||w - (tau * wb + phi)||^2.
template <typename Derived>
typename Derived::Scalar binarization_loss(const Eigen::MatrixBase<Derived>& w,
                                           const SignWeights& wb,
                                           const Omega<typename Derived::Scalar>& omega) {
  using Scalar = typename Derived::Scalar;
  detail::check_lengths(w, wb);
  const VectorT<Scalar> recon =
      (omega.tau * wb.template cast<Scalar>()).array() + omega.phi;
  return (w - recon).squaredNorm();
}

template <typename Scalar>
struct OmegaGradient {
  Scalar dtau = Scalar(0);
  Scalar dphi = Scalar(0);
};

template <typename Derived>
OmegaGradient<typename Derived::Scalar> grad_binarization_loss(
    const Eigen::MatrixBase<Derived>& w, const SignWeights& wb,
    const Omega<typename Derived::Scalar>& omega) {
  using Scalar = typename Derived::Scalar;
  detail::check_lengths(w, wb);
  const Scalar n = static_cast<Scalar>(w.size());
  const Scalar s = Scalar(2) * static_cast<Scalar>(quant_stats(wb).p) - Scalar(1);
  const Scalar l1 = w.template lpNorm<1>();
  const Scalar sum = w.sum();
  return {Scalar(2) * (-l1 + n * (omega.tau + omega.phi * s)),
          Scalar(2) * (-sum + n * (omega.phi + omega.tau * s))};
}

/// bit 0 -> alpha, bit 1 -> beta.
inline RealWeights map_zeroone_to_omega(const ZeroOneWeights& bits, const OmegaParams& omega) {
  RealWeights out(bits.size());
  const double a = omega.alpha();
  const double b = omega.beta();
  for (Eigen::Index i = 0; i < bits.size(); ++i) out[i] = bits[i] ? b : a;
  return out;
}

struct CanonicalWeights {
  OmegaParams omega;  // tau >= 0; tau == 0 only for a constant layer
  ZeroOneWeights bits;
};

/// Turns a fitted (omega, signs) pair into {0,1} bits over a domain with
/// alpha <= beta. A negative tau swaps the roles of the two values, so the
/// bits are flipped. A constant layer (tau == 0) gets all-zero bits.
inline CanonicalWeights canonicalize(const OmegaParams& omega, const SignWeights& wb) {
  CanonicalWeights out;
  out.bits.resize(wb.size());
  if (omega.tau == 0.0) {
    out.omega = omega;
    out.bits.setZero();
    return out;
  }
  const bool flip = omega.tau < 0.0;
  out.omega = {std::abs(omega.tau), omega.phi};
  for (Eigen::Index i = 0; i < wb.size(); ++i) {
    const bool upper = wb[i] > 0;
    out.bits[i] = (upper != flip) ? 1 : 0;
  }
  return out;
}

inline ZeroOneWeights to_zeroone(const SignWeights& wb) {
  return ((wb.array() + std::int8_t{1}) / std::int8_t{2}).cast<std::uint8_t>();
}

inline SignWeights to_sign(const ZeroOneWeights& bits) {
  return (bits.cast<std::int8_t>().array() * std::int8_t{2} - std::int8_t{1}).matrix();
}

}  // namespace sbnn::binquant
