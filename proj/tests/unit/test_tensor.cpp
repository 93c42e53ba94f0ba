// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "support/oracle.hpp"
#include "polykan/errors.hpp"
#include "polykan/tensor.hpp"

using namespace polykan;

namespace {

CoeffTensor encoded(std::size_t d_in, std::size_t d_out, std::size_t f) {
  CoeffTensor c(d_in, d_out, f, CoeffLayout::JOD);
  for (std::size_t j = 0; j < d_in; ++j)
    for (std::size_t o = 0; o < d_out; ++o)
      for (std::size_t k = 0; k < f; ++k) c.at(j, o, k) = float(100 * j + 10 * o + k);
  return c;
}

}  // namespace

TEST_CASE("matrix shape checks") {
  Matrix m(2, 3, 1.5f);
  CHECK(m.size() == 6);
  m(1, 2) = 4.0f;
  CHECK(m.row(1)[2] == 4.0f);
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<float>(3)), std::invalid_argument);
}

TEST_CASE("index bookkeeping") {
  const CoeffTensor doj = reorder_to_doj(encoded(2, 2, 2));
  CHECK(doj.layout() == CoeffLayout::DOJ);
  CHECK(doj.data()[doj_index(1, 0, 1, 2, 2)] == 101.0f);
  CHECK(doj.at(1, 0, 1) == 101.0f);
}

TEST_CASE("reorder roundtrip is bit-exact") {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    CoeffTensor c(1 + rng.below(40), 1 + rng.below(40), 1 + rng.below(25), CoeffLayout::JOD);
    for (float& v : c.data()) {
      const auto bits = std::uint32_t(rng.next());
      std::memcpy(&v, &bits, 4);
    }
    CHECK(oracle::bit_equal(reorder_to_jod(reorder_to_doj(c)), c));
  }
}

TEST_CASE("unit stride along the input index in DOJ") {
  for (std::size_t d_in = 1; d_in <= 8; ++d_in)
    for (std::size_t d_out = 1; d_out <= 8; ++d_out)
      for (std::size_t f = 1; f <= 8; ++f) {
        const CoeffTensor c(d_in, d_out, f, CoeffLayout::DOJ);
        for (std::size_t k = 0; k < f; ++k)
          for (std::size_t o = 0; o < d_out; ++o)
            for (std::size_t j = 0; j + 1 < d_in; ++j) REQUIRE(c.index(j + 1, o, k) == c.index(j, o, k) + 1);
        const CoeffTensor jod(d_in, d_out, f, CoeffLayout::JOD);
        for (std::size_t k = 0; k + 1 < f; ++k) REQUIRE(jod.index(0, d_out - 1, k + 1) == jod.index(0, d_out - 1, k) + 1);
      }
}

TEST_CASE("wrong input layout") {
  const CoeffTensor jod(2, 3, 4, CoeffLayout::JOD);
  CHECK_THROWS_AS(reorder_to_jod(jod), std::invalid_argument);
  CHECK_THROWS_AS(reorder_to_doj(reorder_to_doj(jod)), std::invalid_argument);
  CHECK_THROWS_AS(CoeffTensor(2, 2, 2, CoeffLayout::JOD, std::vector<float>(7)), std::invalid_argument);
}

TEST_CASE("checkpoint roundtrip keeps the layout") {
  const CoeffTensor doj = reorder_to_doj(encoded(3, 5, 4));
  const auto bytes = serialize_coeffs(doj);
  CHECK(bytes.size() == kCheckpointHeaderBytes + 3 * 5 * 4 * 4);
  const CoeffTensor back = deserialize_coeffs(bytes);
  CHECK(back.layout() == CoeffLayout::DOJ);
  CHECK(back.degree() == 3);
  CHECK(back == doj);

  const auto path = std::filesystem::temp_directory_path() / "polykan_test_coeff.pkck";
  write_checkpoint(doj, path);
  CHECK(read_checkpoint(path) == doj);
  std::filesystem::remove(path);
}

TEST_CASE("malformed checkpoints") {
  auto bytes = serialize_coeffs(encoded(2, 2, 2));
  auto bad = bytes;
  bad[1] = 'Z';
  CHECK_THROWS_AS(deserialize_coeffs(bad), IoError);
  bytes.pop_back();
  CHECK_THROWS_AS(deserialize_coeffs(bytes), IoError);
  CHECK_THROWS_AS(read_checkpoint("/nonexistent/c.pkck"), IoError);
}
