// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "support/oracle.hpp"
#include "polykan/errors.hpp"
#include "polykan/kernels.hpp"

using namespace polykan;
using doctest::Approx;

namespace {

const KernelMode kExact{BasisPath::ExactRecurrence, true, true};
const KernelMode kLut{BasisPath::LutInterp, true, true};

LutTable stub(int degree) { return LutTable::build(BasisKind::Chebyshev, degree, 2); }

CoeffTensor ones(std::size_t d_in, std::size_t d_out, std::size_t f) {
  CoeffTensor c(d_in, d_out, f, CoeffLayout::DOJ);
  for (float& v : c.data()) v = 1.0f;
  return c;
}

}  // namespace

TEST_CASE("schedule grid") {
  const TileSchedule s(40, 256);
  CHECK(s.g_x() == 1);
  CHECK(s.g_y() == 8);
  CHECK(s.lane_y() == 32);
  const TileSchedule s3(512, 1024);
  CHECK(s3.g_x() == 8);
  CHECK(s3.g_y() == 32);
  CHECK_THROWS_AS(TileSchedule(0, 4), std::invalid_argument);
  CHECK_THROWS_AS(TileSchedule(4, 4, {0, 32, 8}), std::invalid_argument);
}

TEST_CASE("degree zero partial is the coefficient") {
  CoeffTensor c(1, 1, 1, CoeffLayout::DOJ, {0.625f});
  const TileSchedule s(1, 1);
  for (float x : {-3.0f, 0.0f, 0.2f, 9.0f}) {
    PartialBuffer p(s, 1);
    forward_partial(Matrix(1, 1, x), c, stub(0), s, kExact, p);
    CHECK(p.data()[p.slot(0, 0, 0, 0)] == 0.625f);
  }
}

TEST_CASE("hand-evaluated two-input partial") {
  const Matrix x(1, 2, {0.0f, 10.0f});
  const TileSchedule s(2, 1);
  for (const KernelMode& mode : {kExact, kLut}) {
    PartialBuffer p(s, 1);
    const LutTable t = mode.basis_path == BasisPath::LutInterp ? LutTable::build(BasisKind::Chebyshev, 1, 32768) : stub(1);
    forward_partial(x, ones(2, 1, 2), t, s, mode, p);
    CHECK(p.data()[p.slot(0, 0, 0, 0)] == Approx(1.0 + 0.0 + 1.0 + std::tanh(10.0)).epsilon(1e-6));
  }
}

TEST_CASE("combine with one input tile is a reshape plus bias") {
  Rng rng(1);
  const TileSchedule s(40, 256);
  const Matrix x = oracle::random_matrix(rng, 128, 40, -2, 2);
  const CoeffTensor c = oracle::random_coeff(rng, 40, 256, 9, 0.1, CoeffLayout::DOJ);
  std::vector<float> bias(256);
  for (float& b : bias) b = float(rng.uniform(-1, 1));
  PartialBuffer p(s, 128);
  forward_partial(x, c, stub(8), s, kExact, p);
  const Matrix y = combine(p, s, bias);
  for (std::size_t b = 0; b < 128; ++b)
    for (std::size_t o = 0; o < 256; ++o)
      REQUIRE(y(b, o) == p.data()[p.slot(o / 32, 0, b, o % 32)] + bias[o]);
}

TEST_CASE("combine sums input tiles in ascending order") {
  Rng rng(2);
  const TileSchedule s(10, 3, {4, 2, 2});
  REQUIRE(s.g_x() == 3);
  const Matrix x = oracle::random_matrix(rng, 2, 10, -1, 1);
  PartialBuffer p(s, 2);
  forward_partial(x, oracle::random_coeff(rng, 10, 3, 4, 1.0, CoeffLayout::DOJ), stub(3), s, kExact, p);
  const Matrix y = combine(p, s);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t o = 0; o < 3; ++o) {
      float acc = 0.0f;
      for (std::size_t ti = 0; ti < 3; ++ti) acc += p.data()[p.slot(o / 2, ti, b, o % 2)];
      CHECK(y(b, o) == acc);
    }
}

TEST_CASE("dimension and value errors") {
  const TileSchedule s(3, 2);
  const CoeffTensor c = ones(3, 2, 3);
  CHECK_THROWS_AS(fused_forward(Matrix(1, 4), c, stub(2), s, kExact), std::invalid_argument);
  CHECK_THROWS_AS(fused_forward(Matrix(1, 3), c, stub(5), s, kExact), std::invalid_argument);
  CHECK_THROWS_AS(fused_forward(Matrix(1, 3), c, stub(2), TileSchedule(3, 3), kExact), std::invalid_argument);
  CHECK_THROWS_AS(fused_forward(Matrix(1, 3), c, stub(2), s, kExact, std::vector<float>(3)), std::invalid_argument);
  CHECK_THROWS_AS(backward_fused(Matrix(2, 3), c, Matrix(1, 2), stub(2), s, kExact), std::invalid_argument);

  Matrix bad(2, 3, 0.5f);
  bad(1, 2) = std::numeric_limits<float>::quiet_NaN();
  try {
    fused_forward(bad, c, stub(2), s, kExact);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.batch() == 1);
    CHECK(e.input() == 2);
  }
  KernelMode unchecked = kExact;
  unchecked.validate_finite = false;
  CHECK_NOTHROW(fused_forward(bad, c, stub(2), s, unchecked));
}

TEST_CASE("degree zero backward") {
  Rng rng(3);
  const TileSchedule s(5, 4);
  const Matrix x = oracle::random_matrix(rng, 6, 5, -2, 2);
  const Matrix dy = oracle::random_matrix(rng, 6, 4, -1, 1);
  const CoeffTensor c = oracle::random_coeff(rng, 5, 4, 1, 1.0, CoeffLayout::DOJ);
  const BackwardResult g = backward_fused(x, c, dy, stub(0), s, kExact);
  for (float v : g.x_grad.data()) CHECK(v == 0.0f);
  for (std::size_t o = 0; o < 4; ++o) {
    double col = 0.0;
    for (std::size_t b = 0; b < 6; ++b) col += dy(b, o);
    for (std::size_t j = 0; j < 5; ++j) CHECK(g.coeff_grad.at(j, o, 0) == Approx(col).epsilon(1e-6));
  }
}

TEST_CASE("hand chain rule on two inputs") {
  const Matrix x(1, 2, {0.0f, 10.0f});
  const TileSchedule s(2, 1);
  const BackwardResult g = backward_fused(x, ones(2, 1, 2), Matrix(1, 1, 1.0f), stub(1), s, kExact);
  CHECK(g.coeff_grad.at(0, 0, 0) == 1.0f);
  CHECK(g.coeff_grad.at(1, 0, 0) == 1.0f);
  CHECK(g.coeff_grad.at(0, 0, 1) == 0.0f);
  CHECK(g.coeff_grad.at(1, 0, 1) == Approx(1.0).epsilon(1e-6));
  CHECK(g.x_grad(0, 0) == Approx(1.0).epsilon(1e-6));
  CHECK(std::fabs(g.x_grad(0, 1)) < 1e-7);

  KernelMode literal = kExact;
  literal.include_tanh_jacobian = false;
  const BackwardResult l = backward_fused(x, ones(2, 1, 2), Matrix(1, 1, 1.0f), stub(1), s, literal);
  CHECK(l.x_grad(0, 1) == Approx(1.0).epsilon(1e-6));
}

TEST_CASE("exact-mode coefficient gradient vs finite differences") {
  Rng rng(4);
  const std::size_t B = 3, I = 5, O = 4, F = 7;
  const TileSchedule s(I, O);
  const Matrix x = oracle::random_matrix(rng, B, I, -2, 2);
  const CoeffTensor jod = oracle::random_coeff(rng, I, O, F, 0.5);
  const BackwardResult g = backward_fused(x, reorder_to_doj(jod), Matrix(B, O, 1.0f), stub(6), s, kExact);
  const oracle::Layer layer = oracle::Layer::from(jod);
  const auto feats = oracle::cheb_features(oracle::to_double(x), B, I, F);
  const double h = 1e-3;
  auto total = [&](const oracle::Layer& l) {
    double sum = 0.0;
    for (double v : oracle::layer_forward(l, feats, B)) sum += v;
    return sum;
  };
  for (std::size_t j = 0; j < I; ++j)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t k = 0; k < F; ++k) {
        oracle::Layer p = layer, m = layer;
        p.at(j, o, k) += h;
        m.at(j, o, k) -= h;
        const double fd = (total(p) - total(m)) / (2 * h);
        CHECK(std::fabs(fd - g.coeff_grad.at(j, o, k)) <= 1e-4 * std::max(1.0, std::fabs(fd)));
      }
}

TEST_CASE("fused kernels match the reference for every basis") {
  Rng rng(5);
  for (BasisKind kind : {BasisKind::Chebyshev, BasisKind::Legendre, BasisKind::Hermite, BasisKind::Fourier}) {
    const std::size_t B = 7, I = 70, O = 37, F = feature_count(kind, 5);
    const TileSchedule s(I, O);
    const Matrix x = oracle::random_matrix(rng, B, I, -2, 2);
    const Matrix dy = oracle::random_matrix(rng, B, O, -1, 1);
    const CoeffTensor jod = oracle::random_coeff(rng, I, O, F, 0.05);
    const LutTable t = LutTable::build(kind, 5, 4096);
    for (const KernelMode& mode : {kExact, kLut}) {
      const bool lut = mode.basis_path == BasisPath::LutInterp;
      const LutTable& tab = lut ? t : LutTable::build(kind, 5, 2);
      ReferenceOptions ro;
      ro.kind = kind;
      ro.path = lut ? ReferencePath::Lut : ReferencePath::Recurrence;
      ro.lut = &t;
      const Matrix ref = reference_forward(x, jod, ro);
      const BackwardResult rg = reference_backward(x, jod, dy, ro);
      for (const CoeffTensor& c : {jod, reorder_to_doj(jod)}) {
        CHECK(oracle::normwise(fused_forward(x, c, tab, s, mode).data(), ref.data()) <= 1e-5);
        const BackwardResult g = backward_fused(x, c, dy, tab, s, mode);
        CHECK(g.coeff_grad.layout() == c.layout());
        const CoeffTensor cg = c.layout() == CoeffLayout::JOD ? g.coeff_grad : reorder_to_jod(g.coeff_grad);
        CHECK(oracle::normwise(cg.data(), rg.coeff_grad.data()) <= 1e-5);
        CHECK(oracle::normwise(g.x_grad.data(), rg.x_grad.data()) <= 1e-5);
      }
    }
  }
}

TEST_CASE("atomic count formulas") {
  const TileSchedule s3(150, 4, {64, 32, 8});
  REQUIRE(s3.g_x() == 3);
  const AtomicCounts a = count_atomics(2, 150, 4, s3);
  CHECK(a.fwd_baseline == 24);
  CHECK(a.fwd_ours == 0);
  CHECK(a.bwd_x_naive == 2 * 150 * 4);

  const TileSchedule s(4, 70, {64, 32, 8});
  REQUIRE(s.g_y() == 3);
  const AtomicCounts b = count_atomics(2, 4, 70, s);
  CHECK(b.bwd_x_ours == 24);
  CHECK(b.fwd_ours == 0);

  Rng rng(6);
  KernelCounters counters;
  backward_fused(oracle::random_matrix(rng, 2, 4, -1, 1), oracle::random_coeff(rng, 4, 70, 3, 1.0, CoeffLayout::DOJ),
                 oracle::random_matrix(rng, 2, 70, -1, 1), stub(2), s, kExact, {1, &counters});
  CHECK(counters.backward_x_merges == 24);
  fused_forward(oracle::random_matrix(rng, 2, 4, -1, 1), oracle::random_coeff(rng, 4, 70, 3, 1.0, CoeffLayout::DOJ),
                stub(2), s, kExact, {}, {1, &counters});
  CHECK(counters.forward_atomic_updates == 0);
}

TEST_CASE("every live partial slot has one writer") {
  Rng rng(7);
  const TileSchedule s(100, 45, {32, 16, 4});
  PartialBuffer p(s, 5, true);
  forward_partial(oracle::random_matrix(rng, 5, 100, -1, 1), oracle::random_coeff(rng, 100, 45, 4, 1.0, CoeffLayout::DOJ),
                  stub(3), s, kExact, p, {4});
  const auto counts = p.write_counts();
  for (std::size_t to = 0; to < s.g_y(); ++to)
    for (std::size_t ti = 0; ti < s.g_x(); ++ti)
      for (std::size_t b = 0; b < 5; ++b)
        for (std::size_t ty = 0; ty < 16; ++ty) {
          const bool live = to * 16 + ty < 45;
          REQUIRE(counts[p.slot(to, ti, b, ty)] == (live ? 1u : 0u));
        }
}

TEST_CASE("results do not depend on worker count") {
  Rng rng(8);
  const std::size_t B = 19, I = 130, O = 97;
  const TileSchedule s(I, O, {32, 16, 8});
  const Matrix x = oracle::random_matrix(rng, B, I, -2, 2);
  const Matrix dy = oracle::random_matrix(rng, B, O, -1, 1);
  const CoeffTensor c = oracle::random_coeff(rng, I, O, 9, 0.1, CoeffLayout::DOJ);
  const LutTable t = LutTable::build(BasisKind::Chebyshev, 8, 32768);
  const Matrix y1 = fused_forward(x, c, t, s, kLut, {}, {1});
  const BackwardResult g1 = backward_fused(x, c, dy, t, s, kLut, {1});
  for (unsigned w : {1u, 2u, 3u, 4u, 8u}) {
    CHECK(oracle::bit_equal(fused_forward(x, c, t, s, kLut, {}, {w}), y1));
    const BackwardResult g = backward_fused(x, c, dy, t, s, kLut, {w});
    CHECK(oracle::bit_equal(g.coeff_grad, g1.coeff_grad));
    CHECK(oracle::bit_equal(g.x_grad, g1.x_grad));
  }
}

TEST_CASE("reference forward small cases") {
  CHECK(reference_forward(Matrix(3, 2, 0.7f), CoeffTensor(2, 4, 3, CoeffLayout::JOD)) == Matrix(3, 4));
  const CoeffTensor c(1, 1, 2, CoeffLayout::JOD, {0.0f, 1.0f});
  CHECK(reference_forward(Matrix(1, 1, 0.5f), c)(0, 0) == Approx(std::tanh(0.5)).epsilon(1e-6));
  ReferenceOptions trig;
  trig.path = ReferencePath::Trig;
  CHECK(reference_forward(Matrix(1, 1, 0.5f), c, trig)(0, 0) == Approx(std::tanh(0.5)).epsilon(1e-6));
  CHECK_THROWS_AS(reference_forward(Matrix(1, 1), reorder_to_doj(c)), std::invalid_argument);
}
