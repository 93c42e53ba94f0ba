// SPDX-License-Identifier: Apache-2.0
//
// Unfused layer: expand every input into its feature vector h, then y = W h + b
// with W read in the JOD layout. Everything is accumulated in double.

#include <cmath>
#include <stdexcept>
#include <string>

#include "parallel.hpp"
#include "polykan/kernels.hpp"

namespace polykan {
namespace {

std::size_t features_of(const ReferenceOptions& opts, const CoeffTensor& coeff) {
  const int degree = static_cast<int>(coeff.degree());
  if (opts.kind == BasisKind::Fourier) {
    if (coeff.features() % 2 == 0) throw std::invalid_argument("Fourier coefficients need an odd feature count");
    return coeff.features();
  }
  return feature_count(opts.kind, degree);
}

int degree_of(const ReferenceOptions& opts, const CoeffTensor& coeff) {
  return opts.kind == BasisKind::Fourier ? static_cast<int>(coeff.features() / 2)
                                         : static_cast<int>(coeff.degree());
}

void check(const Matrix& x, const CoeffTensor& coeff, const ReferenceOptions& opts) {
  if (coeff.layout() != CoeffLayout::JOD) throw std::invalid_argument("reference kernels read JOD coefficients");
  if (x.cols() != coeff.d_in()) throw std::invalid_argument("input width does not match D_in");
  if (features_of(opts, coeff) != coeff.features()) throw std::invalid_argument("feature count mismatch");
  if (opts.path == ReferencePath::Trig && opts.kind != BasisKind::Chebyshev) {
    throw std::invalid_argument("trigonometric reference path is Chebyshev-only");
  }
  if (opts.path == ReferencePath::Lut) {
    if (opts.lut == nullptr) throw std::invalid_argument("LUT reference path needs a table");
    if (opts.lut->kind() != opts.kind || opts.lut->features() != coeff.features()) {
      throw std::invalid_argument("LUT does not match the reference basis");
    }
  }
}

// Basis tensor H[b][j][k] (and dH/dx for backward, including the tanh factor
// when requested).
struct Expansion {
  std::vector<double> values;
  std::vector<double> derivs;
};

Expansion expand(const Matrix& x, const CoeffTensor& coeff, const ReferenceOptions& opts, bool with_derivs) {
  const std::size_t f = coeff.features();
  const int degree = degree_of(opts, coeff);
  const std::size_t n = x.rows() * x.cols();
  Expansion e;
  e.values.resize(n * f);
  if (with_derivs) e.derivs.resize(n * f);
  const auto xs = x.data();
  detail::parallel_for(n, opts.workers, [&](std::size_t begin, std::size_t end, unsigned) {
    std::vector<double> scratch(f);
    for (std::size_t i = begin; i < end; ++i) {
      const double xt = std::tanh(static_cast<double>(xs[i]));
      std::span<double> h(e.values.data() + i * f, f);
      std::span<double> dh = with_derivs ? std::span<double>(e.derivs.data() + i * f, f) : std::span<double>{};
      switch (opts.path) {
        case ReferencePath::Trig:
          eval_basis_trig_into(degree, std::fmin(1.0, std::fmax(-1.0, xt)), h);
          if (with_derivs) eval_basis_with_derivative_into(opts.kind, degree, xt, scratch, dh);
          break;
        case ReferencePath::Recurrence:
          if (with_derivs) {
            eval_basis_with_derivative_into(opts.kind, degree, xt, h, dh);
          } else {
            eval_basis_into(opts.kind, degree, xt, h);
          }
          break;
        case ReferencePath::Lut: {
          const LutCell cell = opts.lut->locate(xt);
          for (std::size_t k = 0; k < f; ++k) {
            const double left = opts.lut->value(k, cell.index);
            const double right = opts.lut->value(k, cell.index + 1);
            h[k] = left * (1.0 - cell.frac) + right * cell.frac;
            if (with_derivs) dh[k] = opts.lut->slope(k, cell.index);
          }
          break;
        }
      }
      if (with_derivs && opts.include_tanh_jacobian) {
        const double jac = 1.0 - xt * xt;
        for (auto& d : dh) d *= jac;
      }
    }
  });
  return e;
}

}  // namespace

std::vector<double> reference_forward_f64(const Matrix& x, const CoeffTensor& coeff, const ReferenceOptions& opts,
                                          std::span<const float> bias) {
  check(x, coeff, opts);
  const std::size_t batch = x.rows();
  const std::size_t d_in = coeff.d_in();
  const std::size_t d_out = coeff.d_out();
  const std::size_t f = coeff.features();
  if (!bias.empty() && bias.size() != d_out) throw std::invalid_argument("bias length does not match D_out");

  const Expansion e = expand(x, coeff, opts, false);
  const auto w = coeff.data();
  std::vector<double> y(batch * d_out, 0.0);
  detail::parallel_for(batch, opts.workers, [&](std::size_t begin, std::size_t end, unsigned) {
    for (std::size_t b = begin; b < end; ++b) {
      const double* h = e.values.data() + b * d_in * f;
      for (std::size_t o = 0; o < d_out; ++o) {
        double acc = bias.empty() ? 0.0 : static_cast<double>(bias[o]);
        for (std::size_t j = 0; j < d_in; ++j) {
          const float* wj = w.data() + jod_index(j, o, 0, d_out, f);
          const double* hj = h + j * f;
          for (std::size_t k = 0; k < f; ++k) acc += static_cast<double>(wj[k]) * hj[k];
        }
        y[b * d_out + o] = acc;
      }
    }
  });
  return y;
}

Matrix reference_forward(const Matrix& x, const CoeffTensor& coeff, const ReferenceOptions& opts,
                         std::span<const float> bias) {
  const auto y64 = reference_forward_f64(x, coeff, opts, bias);
  Matrix y(x.rows(), coeff.d_out());
  for (std::size_t i = 0; i < y64.size(); ++i) y.data()[i] = static_cast<float>(y64[i]);
  return y;
}

BackwardResult reference_backward(const Matrix& x, const CoeffTensor& coeff, const Matrix& dy,
                                  const ReferenceOptions& opts) {
  check(x, coeff, opts);
  const std::size_t batch = x.rows();
  const std::size_t d_in = coeff.d_in();
  const std::size_t d_out = coeff.d_out();
  const std::size_t f = coeff.features();
  if (dy.rows() != batch || dy.cols() != d_out) throw std::invalid_argument("dY shape mismatch");

  const Expansion e = expand(x, coeff, opts, true);
  const auto w = coeff.data();
  BackwardResult r{CoeffTensor(d_in, d_out, f, CoeffLayout::JOD), Matrix(batch, d_in)};

  // Coefficient gradient: each output column owns its slice.
  auto cg = r.coeff_grad.data();
  detail::parallel_for(d_out, opts.workers, [&](std::size_t begin, std::size_t end, unsigned) {
    std::vector<double> acc(d_in * f);
    for (std::size_t o = begin; o < end; ++o) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t b = 0; b < batch; ++b) {
        const double g = dy(b, o);
        const double* h = e.values.data() + b * d_in * f;
        for (std::size_t i = 0; i < d_in * f; ++i) acc[i] += g * h[i];
      }
      for (std::size_t j = 0; j < d_in; ++j) {
        for (std::size_t k = 0; k < f; ++k) cg[jod_index(j, o, k, d_out, f)] = static_cast<float>(acc[j * f + k]);
      }
    }
  });

  // Input gradient: each batch row owns its slice.
  detail::parallel_for(batch, opts.workers, [&](std::size_t begin, std::size_t end, unsigned) {
    for (std::size_t b = begin; b < end; ++b) {
      const double* dh = e.derivs.data() + b * d_in * f;
      for (std::size_t j = 0; j < d_in; ++j) {
        double acc = 0.0;
        for (std::size_t o = 0; o < d_out; ++o) {
          const double g = dy(b, o);
          const float* wj = w.data() + jod_index(j, o, 0, d_out, f);
          double s = 0.0;
          for (std::size_t k = 1; k < f; ++k) s += static_cast<double>(wj[k]) * dh[j * f + k];
          acc += g * s;
        }
        r.x_grad(b, j) = static_cast<float>(acc);
      }
    }
  });
  return r;
}

}  // namespace polykan
