// SPDX-License-Identifier: Apache-2.0
//
// Exact evaluation of the polynomial basis families used by KAN layers.
// All evaluation runs in double precision; lookup tables are built from
// these routines and the reference kernels use them directly.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace polykan {

enum class BasisKind : std::uint8_t {
  Chebyshev = 0,
  Legendre = 1,
  Hermite = 2,
  Fourier = 3,
};

/// (degree+1) for the polynomial families, (2*degree+1) for Fourier.
std::size_t feature_count(BasisKind kind, int degree);

std::string_view to_string(BasisKind kind);
/// Accepts the lower-case names ("chebyshev", "legendre", ...).
/// Throws std::invalid_argument on anything else.
BasisKind parse_basis_kind(std::string_view name);
/// Validates an on-disk tag byte.
BasisKind basis_kind_from_tag(std::uint8_t tag);

/// Coefficients of alpha_k B_{k+1} = beta_k(x) B_k - gamma_k B_{k-1}.
struct RecurrenceCoeffs {
  double (*alpha)(int k);
  double (*beta)(int k, double x);
  double (*gamma)(int k);
  double (*seed0)(double x);
  double (*seed1)(double x);
};

/// Three-term recurrence for the polynomial families; std::nullopt for
/// Fourier, which propagates orders by angle addition instead.
std::optional<RecurrenceCoeffs> recurrence_for(BasisKind kind);

/// Feature values [B_0(x), ..., B_F-1(x)] by recurrence. Fourier features
/// are ordered [1, cos(pi x), sin(pi x), ..., cos(d pi x), sin(d pi x)].
/// Throws std::invalid_argument for degree < 0 or non-finite x.
std::vector<double> eval_basis(BasisKind kind, int degree, double x);

/// Analytic first derivatives, same feature order as eval_basis.
std::vector<double> eval_basis_derivative(BasisKind kind, int degree, double x);

/// Chebyshev values through cos(n * arccos x). Throws for |x| > 1.
std::vector<double> eval_basis_trig(int degree, double x);

// Allocation-free variants used inside kernels. `out` (and `deriv`) must hold
// feature_count(kind, degree) entries; arguments are not validated.
void eval_basis_into(BasisKind kind, int degree, double x, std::span<double> out);
void eval_basis_with_derivative_into(BasisKind kind, int degree, double x,
                                     std::span<double> out, std::span<double> deriv);
void eval_basis_trig_into(int degree, double x, std::span<double> out);

/// Second derivatives; only used to bound interpolation error.
std::vector<double> eval_basis_second_derivative(BasisKind kind, int degree, double x);

}  // namespace polykan
