#pragma once

#include <cmath>
#include <concepts>
#include <limits>

#include <Eigen/Core>

namespace multic {

/// Logistic sigmoid clamped to the open interval (0, 1): saturated inputs map
/// to the smallest normal double or to 1 - 2^-53 instead of rounding onto
/// the boundary.
template <std::floating_point Scalar>
Scalar sigmoid(Scalar x) {
  constexpr Scalar lo = std::numeric_limits<Scalar>::min();
  constexpr Scalar hi = Scalar(1) - std::numeric_limits<Scalar>::epsilon() / 2;
  const Scalar s = x >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-x)) : std::exp(x) / (Scalar(1) + std::exp(x));
  return s < lo ? lo : (s > hi ? hi : s);
}

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
  return x.unaryExpr([](typename Derived::Scalar v) { return sigmoid(v); });
}

template <std::floating_point Scalar>
Scalar logit(Scalar p) {
  return std::log(p) - std::log1p(-p);
}

/// Stick-breaking map from R^{K-1} rows to the K-simplex:
///   pi_1 = s_1, pi_k = s_k (1 - sum_{l<k} pi_l), pi_K = 1 - sum_{l<K} pi_l
/// with s_k = sigmoid(raw_k). The remaining stick is tracked by subtraction so
/// that each row sums to 1 up to a couple of ulps.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> stick_breaking(
    const Eigen::MatrixBase<Derived>& raw) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index rows = raw.rows();
  const Eigen::Index k_free = raw.cols();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> pi(rows, k_free + 1);
  for (Eigen::Index c = 0; c < rows; ++c) {
    Scalar stick(1);
    for (Eigen::Index k = 0; k < k_free; ++k) {
      const Scalar take = sigmoid(raw(c, k)) * stick;
      pi(c, k) = take;
      stick -= take;
    }
    pi(c, k_free) = stick < Scalar(0) ? Scalar(0) : stick;
  }
  return pi;
}

/// Vector-Jacobian product of stick_breaking: given dL/dpi (rows x K),
/// returns dL/draw (rows x K-1).
template <typename DerivedRaw, typename DerivedGrad>
Eigen::Matrix<typename DerivedRaw::Scalar, Eigen::Dynamic, Eigen::Dynamic> stick_breaking_vjp(
    const Eigen::MatrixBase<DerivedRaw>& raw, const Eigen::MatrixBase<DerivedGrad>& grad_pi) {
  using Scalar = typename DerivedRaw::Scalar;
  const Eigen::Index rows = raw.rows();
  const Eigen::Index k_free = raw.cols();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(rows, k_free);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> s(k_free), stick_before(k_free);
  for (Eigen::Index c = 0; c < rows; ++c) {
    Scalar stick(1);
    for (Eigen::Index k = 0; k < k_free; ++k) {
      s(k) = sigmoid(raw(c, k));
      stick_before(k) = stick;
      stick -= s(k) * stick;
    }
    // Reverse sweep: the remaining stick after step k feeds pi_K and every
    // later step.
    Scalar stick_adj = grad_pi(c, k_free);
    for (Eigen::Index k = k_free - 1; k >= 0; --k) {
      const Scalar s_adj = (grad_pi(c, k) - stick_adj) * stick_before(k);
      out(c, k) = s_adj * s(k) * (Scalar(1) - s(k));
      stick_adj = grad_pi(c, k) * s(k) + stick_adj * (Scalar(1) - s(k));
    }
  }
  return out;
}

/// Raw stick-breaking coordinates whose image is the uniform membership.
inline Eigen::RowVectorXd uniform_stick_raw(Eigen::Index n_layers) {
  Eigen::RowVectorXd raw(n_layers - 1);
  for (Eigen::Index k = 0; k + 1 < n_layers; ++k) raw(k) = -std::log(static_cast<double>(n_layers - 1 - k));
  return raw;
}

}  // namespace multic
