// SPDX-License-Identifier: Apache-2.0
//
// Independent double-precision oracles for the tests. Nothing here calls into
// the library's evaluation code; only container types are shared.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <numbers>
#include <span>
#include <vector>

#include "polykan/lut.hpp"
#include "polykan/perf.hpp"
#include "polykan/rng.hpp"
#include "polykan/tensor.hpp"

namespace oracle {

inline double cheb(int n, double x) { return std::cos(n * std::acos(std::clamp(x, -1.0, 1.0))); }

// T_n'(x) = n sin(n t) / sin(t), x = cos t; endpoint limit n^2 (+-1).
inline double cheb_prime(int n, double x) {
  const double t = std::acos(std::clamp(x, -1.0, 1.0));
  const double s = std::sin(t);
  if (std::fabs(s) < 1e-12) return (x > 0 ? 1.0 : (n % 2 ? 1.0 : -1.0)) * double(n) * n;
  return n * std::sin(n * t) / s;
}

// Explicit sum P_n(x) = 2^-n sum_k C(n,k)^2 (x-1)^(n-k) (x+1)^k.
inline double legendre(int n, double x) {
  double sum = 0.0, binom = 1.0;
  for (int k = 0; k <= n; ++k) {
    sum += binom * binom * std::pow(x - 1.0, n - k) * std::pow(x + 1.0, k);
    binom = binom * (n - k) / (k + 1);
  }
  return std::ldexp(sum, -n);
}

// Explicit sum H_n(x) = n! sum_m (-1)^m (2x)^(n-2m) / (m! (n-2m)!).
inline double hermite(int n, double x) {
  double sum = 0.0;
  for (int m = 0; 2 * m <= n; ++m) {
    const double term = std::pow(2.0 * x, n - 2 * m) / (std::tgamma(m + 1.0) * std::tgamma(n - 2 * m + 1.0));
    sum += (m % 2 ? -term : term);
  }
  return sum * std::tgamma(n + 1.0);
}

template <class A, class B>
bool bit_equal(const A& a, const B& b) {
  const auto da = a.data();
  const auto db = b.data();
  return da.size() == db.size() && std::memcmp(da.data(), db.data(), da.size() * sizeof(float)) == 0;
}

// max |a - b| / max |b|
template <class A, class B>
double normwise(const A& a, const B& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < std::size(b); ++i) {
    num = std::max(num, std::fabs(double(a[i]) - double(b[i])));
    den = std::max(den, std::fabs(double(b[i])));
  }
  return den > 0 ? num / den : num;
}

inline polykan::Matrix random_matrix(polykan::Rng& rng, std::size_t r, std::size_t c, double lo, double hi) {
  polykan::Matrix m(r, c);
  for (float& v : m.data()) v = float(rng.uniform(lo, hi));
  return m;
}

inline polykan::CoeffTensor random_coeff(polykan::Rng& rng, std::size_t d_in, std::size_t d_out, std::size_t f,
                                         double scale, polykan::CoeffLayout layout = polykan::CoeffLayout::JOD) {
  polykan::CoeffTensor c(d_in, d_out, f, layout);
  for (float& v : c.data()) v = float(rng.uniform(-scale, scale));
  return c;
}

// Chebyshev KAN layer in double: y[b,o] = bias[o] + sum_j sum_k c(j,o,k) T_k(tanh x[b,j]).
// Coefficients are held as a dense double array in [j][o][k] order.
struct Layer {
  std::size_t d_in, d_out, f;
  std::vector<double> c;  // [j][o][k]
  std::vector<double> bias;

  static Layer from(const polykan::CoeffTensor& t, std::span<const float> bias = {}) {
    Layer l{t.d_in(), t.d_out(), t.features(), std::vector<double>(t.size()), std::vector<double>(t.d_out(), 0.0)};
    for (std::size_t j = 0; j < l.d_in; ++j)
      for (std::size_t o = 0; o < l.d_out; ++o)
        for (std::size_t k = 0; k < l.f; ++k) l.c[(j * l.d_out + o) * l.f + k] = t.at(j, o, k);
    for (std::size_t o = 0; o < bias.size(); ++o) l.bias[o] = bias[o];
    return l;
  }
  double& at(std::size_t j, std::size_t o, std::size_t k) { return c[(j * d_out + o) * f + k]; }
  double at(std::size_t j, std::size_t o, std::size_t k) const { return c[(j * d_out + o) * f + k]; }
};

// Basis values of tanh(x) per (b, j): [b][j][k].
inline std::vector<double> cheb_features(const std::vector<double>& x, std::size_t batch, std::size_t d_in,
                                         std::size_t f) {
  std::vector<double> t(batch * d_in * f);
  for (std::size_t i = 0; i < batch * d_in; ++i) {
    const double u = std::tanh(x[i]);
    for (std::size_t k = 0; k < f; ++k) t[i * f + k] = cheb(int(k), u);
  }
  return t;
}

inline std::vector<double> layer_forward(const Layer& l, const std::vector<double>& feats, std::size_t batch) {
  std::vector<double> y(batch * l.d_out);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < l.d_out; ++o) {
      double s = l.bias[o];
      for (std::size_t j = 0; j < l.d_in; ++j)
        for (std::size_t k = 0; k < l.f; ++k) s += l.at(j, o, k) * feats[(b * l.d_in + j) * l.f + k];
      y[b * l.d_out + o] = s;
    }
  return y;
}

inline std::vector<double> to_double(const polykan::Matrix& m) {
  return std::vector<double>(m.data().begin(), m.data().end());
}

// sum_{b,o} w[b,o] y[b,o]
inline double weighted_sum(const std::vector<double>& y, const polykan::Matrix& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w.data()[i];
  return s;
}

// Chebyshev network in double, every layer fed tanh of the previous output.
inline std::vector<double> network_forward(const std::vector<Layer>& layers, std::vector<double> x,
                                           std::size_t batch) {
  for (const Layer& l : layers) x = layer_forward(l, cheb_features(x, batch, l.d_in, l.f), batch);
  return x;
}

// Piecewise-linear interpolation of a table's stored samples, in double,
// with the cell found by plain floor arithmetic.
struct LutOracle {
  const polykan::LutTable& t;

  std::size_t cell(double u) const {
    const double pos = (std::clamp(u, -1.0, 1.0) + 1.0) / 2.0 * double(t.size() - 1);
    return std::min<std::size_t>(std::size_t(std::floor(pos)), t.size() - 2);
  }
  double node(std::size_t i) const { return -1.0 + 2.0 * double(i) / double(t.size() - 1); }
  double value(std::size_t k, double u) const {
    const std::size_t i = cell(u);
    const double w = (std::clamp(u, -1.0, 1.0) - node(i)) / (node(i + 1) - node(i));
    const double l = t.values()[k * t.size() + i], r = t.values()[k * t.size() + i + 1];
    return l + (r - l) * w;
  }
  double slope(std::size_t k, double u) const {
    const std::size_t i = cell(u);
    const double l = t.values()[k * t.size() + i], r = t.values()[k * t.size() + i + 1];
    return (r - l) / (node(i + 1) - node(i));
  }
};

// Same contraction as layer_forward but with interpolated features.
inline std::vector<double> lut_features(const LutOracle& lut, const std::vector<double>& x, std::size_t batch,
                                        std::size_t d_in, std::size_t f) {
  std::vector<double> t(batch * d_in * f);
  for (std::size_t i = 0; i < batch * d_in; ++i) {
    const double u = std::tanh(x[i]);
    for (std::size_t k = 0; k < f; ++k) t[i * f + k] = lut.value(k, u);
  }
  return t;
}

__extension__ typedef unsigned __int128 u128;

// Roofline terms written as explicit per-tensor sums with 128-bit integers.
struct Roof {
  u128 flops, bytes;
  long double intensity;
};

inline Roof roofline(const polykan::LayerConfig& c) {
  const u128 B = c.batch, I = c.d_in, O = c.d_out, F = c.degree + 1;
  const u128 basis_flops = 2 * B * I * c.degree;
  const u128 contract_flops = 2 * B * I * F * O;
  const u128 x_elems = B * I, y_elems = B * O, basis_elems = 2 * B * I * F, coeff_elems = I * O * F;
  Roof r{basis_flops + contract_flops, (x_elems + y_elems + basis_elems + coeff_elems) * c.lambda, 0};
  r.intensity = (long double)(std::uint64_t)r.flops / (long double)(std::uint64_t)r.bytes;
  return r;
}

}  // namespace oracle
