#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unmtlab/common.hpp>
#include <unmtlab/kernels.hpp>
#include <unmtlab/tensor.hpp>

using namespace unmtlab;

namespace {

TensorF random_tensor(size_t r, size_t c, Rng& rng) {
  TensorF t(r, c);
  for (auto& v : t.data) v = static_cast<float>(rng.normal());
  return t;
}

// Naive triple loop, double accumulation: independent oracle for the kernels.
TensorF naive_nt(const TensorF& a, const TensorF& b) {
  TensorF c(a.rows, b.rows);
  for (size_t i = 0; i < a.rows; ++i)
    for (size_t j = 0; j < b.rows; ++j) {
      double acc = 0.0;
      for (size_t k = 0; k < a.cols; ++k) acc += double(a.at(i, k)) * double(b.at(j, k));
      c.at(i, j) = static_cast<float>(acc);
    }
  return c;
}

}  // namespace

TEST_CASE("matmul_nt matches naive oracle") {
  Rng rng(1);
  auto a = random_tensor(37, 64, rng);
  auto b = random_tensor(29, 64, rng);
  TensorF c(37, 29);
  kernels::serial::matmul_nt(c.ptr(), a.ptr(), b.ptr(), 37, 29, 64);
  auto ref = naive_nt(a, b);
  for (size_t i = 0; i < c.size(); ++i) CHECK(c.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-4));
}

TEST_CASE("omp kernels are bitwise identical to serial reference") {
  Rng rng(2);
  const size_t m = 53, n = 41, k = 96;
  auto a = random_tensor(m, k, rng);
  auto bt = random_tensor(n, k, rng);
  auto bn = random_tensor(k, n, rng);
  auto at = random_tensor(k, m, rng);

  kernels::set_threads(4);
  TensorF c1(m, n), c2(m, n);

  kernels::serial::matmul_nt(c1.ptr(), a.ptr(), bt.ptr(), m, n, k);
  kernels::omp::matmul_nt(c2.ptr(), a.ptr(), bt.ptr(), m, n, k);
  CHECK(c1.data == c2.data);

  kernels::serial::matmul_nn(c1.ptr(), a.ptr(), bn.ptr(), m, n, k);
  kernels::omp::matmul_nn(c2.ptr(), a.ptr(), bn.ptr(), m, n, k);
  CHECK(c1.data == c2.data);

  kernels::serial::matmul_tn(c1.ptr(), at.ptr(), bn.ptr(), m, n, k);
  kernels::omp::matmul_tn(c2.ptr(), at.ptr(), bn.ptr(), m, n, k);
  CHECK(c1.data == c2.data);
  kernels::set_threads(1);
}

TEST_CASE("accumulate flag adds into the output") {
  Rng rng(3);
  auto a = random_tensor(8, 16, rng);
  auto b = random_tensor(8, 16, rng);
  TensorF c(8, 8, 1.0f), d(8, 8);
  kernels::serial::matmul_nt(d.ptr(), a.ptr(), b.ptr(), 8, 8, 16);
  kernels::serial::matmul_nt(c.ptr(), a.ptr(), b.ptr(), 8, 8, 16, /*accumulate=*/true);
  for (size_t i = 0; i < c.size(); ++i) CHECK(c.data[i] == doctest::Approx(1.0f + d.data[i]));
}

TEST_CASE("matmul identities: nn with identity, tn transposes") {
  Rng rng(4);
  const size_t n = 24;
  auto a = random_tensor(n, n, rng);
  TensorF eye(n, n);
  for (size_t i = 0; i < n; ++i) eye.at(i, i) = 1.0f;
  TensorF c(n, n);
  kernels::serial::matmul_nn(c.ptr(), a.ptr(), eye.ptr(), n, n, n);
  CHECK(c.data == a.data);

  // tn(A, I) = A^T
  kernels::serial::matmul_tn(c.ptr(), a.ptr(), eye.ptr(), n, n, n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) CHECK(c.at(i, j) == a.at(j, i));
}

TEST_CASE("dot_span handles tails shorter than the lane width") {
  std::vector<float> a{1, 2, 3, 4, 5}, b{5, 4, 3, 2, 1};
  CHECK(kernels::dot_span(a.data(), b.data(), 5) == doctest::Approx(35.0f));
  CHECK(kernels::dot_span(a.data(), b.data(), 0) == 0.0f);
}
