// SPDX-License-Identifier: Apache-2.0

#include "polykan/basis.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace polykan {
namespace {

constexpr double kPi = std::numbers::pi;

// Chebyshev: T_{k+1} = 2x T_k - T_{k-1}
double cheb_alpha(int) { return 1.0; }
double cheb_beta(int, double x) { return 2.0 * x; }
double cheb_gamma(int) { return 1.0; }

// Legendre: (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}
double leg_alpha(int k) { return static_cast<double>(k + 1); }
double leg_beta(int k, double x) { return static_cast<double>(2 * k + 1) * x; }
double leg_gamma(int k) { return static_cast<double>(k); }

// Hermite (physicists'): H_{k+1} = 2x H_k - 2k H_{k-1}
double her_alpha(int) { return 1.0; }
double her_beta(int, double x) { return 2.0 * x; }
double her_gamma(int k) { return 2.0 * static_cast<double>(k); }

double seed_one(double) { return 1.0; }
double seed_x(double x) { return x; }
double seed_2x(double x) { return 2.0 * x; }

void check_args(int degree, double x) {
  if (degree < 0) {
    throw std::invalid_argument("basis degree must be >= 0, got " + std::to_string(degree));
  }
  if (!std::isfinite(x)) {
    throw std::invalid_argument("basis argument must be finite");
  }
}

// Every beta_k is linear in x, so its x-derivative is beta_k(1) - beta_k(0).
double beta_slope(const RecurrenceCoeffs& rc, int k) { return rc.beta(k, 1.0) - rc.beta(k, 0.0); }

void recurrence_values(const RecurrenceCoeffs& rc, int degree, double x, std::span<double> out) {
  out[0] = rc.seed0(x);
  if (degree == 0) return;
  out[1] = rc.seed1(x);
  for (int k = 1; k < degree; ++k) {
    out[k + 1] = (rc.beta(k, x) * out[k] - rc.gamma(k) * out[k - 1]) / rc.alpha(k);
  }
}

// Differentiated recurrence: alpha B'_{k+1} = beta' B_k + beta B'_k - gamma B'_{k-1}.
void recurrence_derivative(const RecurrenceCoeffs& rc, int degree, double x,
                           std::span<const double> values, std::span<double> deriv) {
  deriv[0] = 0.0;
  if (degree == 0) return;
  deriv[1] = rc.seed1(1.0) - rc.seed1(0.0);
  for (int k = 1; k < degree; ++k) {
    deriv[k + 1] = (beta_slope(rc, k) * values[k] + rc.beta(k, x) * deriv[k] -
                    rc.gamma(k) * deriv[k - 1]) /
                   rc.alpha(k);
  }
}

// dT_n/dx = n U_{n-1}(x), U_0 = 1, U_1 = 2x, U_{n+1} = 2x U_n - U_{n-1}.
void chebyshev_derivative(int degree, double x, std::span<double> deriv) {
  deriv[0] = 0.0;
  double u_prev = 0.0;
  double u = 1.0;
  for (int n = 1; n <= degree; ++n) {
    deriv[n] = static_cast<double>(n) * u;
    const double u_next = 2.0 * x * u - u_prev;
    u_prev = u;
    u = u_next;
  }
}

// cos((k+1)t) = cos(kt)cos(t) - sin(kt)sin(t), sin((k+1)t) = sin(kt)cos(t) + cos(kt)sin(t)
void fourier_values(int degree, double x, std::span<double> out) {
  out[0] = 1.0;
  if (degree == 0) return;
  const double c1 = std::cos(kPi * x);
  const double s1 = std::sin(kPi * x);
  double c = c1;
  double s = s1;
  for (int k = 1; k <= degree; ++k) {
    out[2 * k - 1] = c;
    out[2 * k] = s;
    const double c_next = c * c1 - s * s1;
    const double s_next = s * c1 + c * s1;
    c = c_next;
    s = s_next;
  }
}

void fourier_derivative(int degree, std::span<const double> values, std::span<double> deriv) {
  deriv[0] = 0.0;
  for (int k = 1; k <= degree; ++k) {
    const double w = kPi * static_cast<double>(k);
    deriv[2 * k - 1] = -w * values[2 * k];
    deriv[2 * k] = w * values[2 * k - 1];
  }
}

}  // namespace

std::size_t feature_count(BasisKind kind, int degree) {
  if (degree < 0) {
    throw std::invalid_argument("basis degree must be >= 0, got " + std::to_string(degree));
  }
  const auto d = static_cast<std::size_t>(degree);
  return kind == BasisKind::Fourier ? 2 * d + 1 : d + 1;
}

std::string_view to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::Chebyshev: return "chebyshev";
    case BasisKind::Legendre: return "legendre";
    case BasisKind::Hermite: return "hermite";
    case BasisKind::Fourier: return "fourier";
  }
  return "unknown";
}

BasisKind parse_basis_kind(std::string_view name) {
  if (name == "chebyshev") return BasisKind::Chebyshev;
  if (name == "legendre") return BasisKind::Legendre;
  if (name == "hermite") return BasisKind::Hermite;
  if (name == "fourier") return BasisKind::Fourier;
  throw std::invalid_argument("unknown basis '" + std::string(name) + "'");
}

BasisKind basis_kind_from_tag(std::uint8_t tag) {
  if (tag > static_cast<std::uint8_t>(BasisKind::Fourier)) {
    throw std::invalid_argument("invalid basis tag " + std::to_string(tag));
  }
  return static_cast<BasisKind>(tag);
}

std::optional<RecurrenceCoeffs> recurrence_for(BasisKind kind) {
  switch (kind) {
    case BasisKind::Chebyshev: return RecurrenceCoeffs{cheb_alpha, cheb_beta, cheb_gamma, seed_one, seed_x};
    case BasisKind::Legendre: return RecurrenceCoeffs{leg_alpha, leg_beta, leg_gamma, seed_one, seed_x};
    case BasisKind::Hermite: return RecurrenceCoeffs{her_alpha, her_beta, her_gamma, seed_one, seed_2x};
    case BasisKind::Fourier: return std::nullopt;
  }
  return std::nullopt;
}

void eval_basis_into(BasisKind kind, int degree, double x, std::span<double> out) {
  if (kind == BasisKind::Fourier) {
    fourier_values(degree, x, out);
    return;
  }
  recurrence_values(*recurrence_for(kind), degree, x, out);
}

void eval_basis_with_derivative_into(BasisKind kind, int degree, double x,
                                     std::span<double> out, std::span<double> deriv) {
  eval_basis_into(kind, degree, x, out);
  switch (kind) {
    case BasisKind::Chebyshev:
      chebyshev_derivative(degree, x, deriv);
      break;
    case BasisKind::Fourier:
      fourier_derivative(degree, out, deriv);
      break;
    default:
      recurrence_derivative(*recurrence_for(kind), degree, x, out, deriv);
      break;
  }
}

void eval_basis_trig_into(int degree, double x, std::span<double> out) {
  const double theta = std::acos(x);
  for (int n = 0; n <= degree; ++n) {
    out[n] = std::cos(static_cast<double>(n) * theta);
  }
}

std::vector<double> eval_basis(BasisKind kind, int degree, double x) {
  check_args(degree, x);
  std::vector<double> out(feature_count(kind, degree));
  eval_basis_into(kind, degree, x, out);
  return out;
}

std::vector<double> eval_basis_derivative(BasisKind kind, int degree, double x) {
  check_args(degree, x);
  const std::size_t f = feature_count(kind, degree);
  std::vector<double> values(f);
  std::vector<double> deriv(f);
  eval_basis_with_derivative_into(kind, degree, x, values, deriv);
  return deriv;
}

std::vector<double> eval_basis_trig(int degree, double x) {
  check_args(degree, x);
  if (std::abs(x) > 1.0) {
    throw std::invalid_argument("trigonometric Chebyshev form requires |x| <= 1");
  }
  std::vector<double> out(static_cast<std::size_t>(degree) + 1);
  eval_basis_trig_into(degree, x, out);
  return out;
}

std::vector<double> eval_basis_second_derivative(BasisKind kind, int degree, double x) {
  check_args(degree, x);
  const std::size_t f = feature_count(kind, degree);
  std::vector<double> values(f);
  std::vector<double> first(f);
  std::vector<double> second(f, 0.0);
  eval_basis_with_derivative_into(kind, degree, x, values, first);
  if (kind == BasisKind::Fourier) {
    for (int k = 1; k <= degree; ++k) {
      const double w2 = kPi * kPi * static_cast<double>(k) * static_cast<double>(k);
      second[2 * k - 1] = -w2 * values[2 * k - 1];
      second[2 * k] = -w2 * values[2 * k];
    }
    return second;
  }
  // alpha B''_{k+1} = 2 beta' B'_k + beta B''_k - gamma B''_{k-1}; seeds are at most linear.
  const RecurrenceCoeffs rc = *recurrence_for(kind);
  for (int k = 1; k < degree; ++k) {
    second[k + 1] = (2.0 * beta_slope(rc, k) * first[k] + rc.beta(k, x) * second[k] -
                     rc.gamma(k) * second[k - 1]) /
                    rc.alpha(k);
  }
  return second;
}

}  // namespace polykan
