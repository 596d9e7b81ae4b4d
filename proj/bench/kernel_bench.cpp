// Times the serial reference kernels against the OpenMP kernels at the
// matrix shapes the translation model actually uses, plus one larger shape.
// Usage: kernel_bench [threads]

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include <unmtlab/common.hpp>
#include <unmtlab/kernels.hpp>
#include <unmtlab/tensor.hpp>

using namespace unmtlab;
using Clock = std::chrono::steady_clock;

namespace {

double time_ms(const auto& fn, int reps) {
  fn();  // warm up
  auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  auto t1 = Clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void bench_shape(size_t m, size_t n, size_t k, int reps) {
  Rng rng(99);
  TensorF a(m, k), b(n, k), bn(k, n), c(m, n);
  for (auto& v : a.data) v = static_cast<float>(rng.normal());
  for (auto& v : b.data) v = static_cast<float>(rng.normal());
  for (auto& v : bn.data) v = static_cast<float>(rng.normal());

  const double gflop = 2.0 * double(m) * double(n) * double(k) * 1e-9;

  double ts_nt = time_ms([&] { kernels::serial::matmul_nt(c.ptr(), a.ptr(), b.ptr(), m, n, k); }, reps);
  double tp_nt = time_ms([&] { kernels::omp::matmul_nt(c.ptr(), a.ptr(), b.ptr(), m, n, k); }, reps);
  double ts_nn = time_ms([&] { kernels::serial::matmul_nn(c.ptr(), a.ptr(), bn.ptr(), m, n, k); }, reps);
  double tp_nn = time_ms([&] { kernels::omp::matmul_nn(c.ptr(), a.ptr(), bn.ptr(), m, n, k); }, reps);

  std::printf("%4zu x %4zu x %4zu | nt serial %8.3f ms (%6.2f GF/s)  omp %8.3f ms (%6.2f GF/s)\n", m, n,
              k, ts_nt, gflop / ts_nt * 1e3, tp_nt, gflop / tp_nt * 1e3);
  std::printf("%4s   %4s   %4s | nn serial %8.3f ms (%6.2f GF/s)  omp %8.3f ms (%6.2f GF/s)\n", "", "",
              "", ts_nn, gflop / ts_nn * 1e3, tp_nn, gflop / tp_nn * 1e3);
}

}  // namespace

int main(int argc, char** argv) {
  int threads = argc > 1 ? std::atoi(argv[1]) : 4;
  kernels::set_threads(threads);
  std::printf("threads for omp kernels: %d\n", kernels::threads());

  bench_shape(352, 64, 64, 200);    // batch*time x d_model projections
  bench_shape(352, 256, 64, 100);   // feed-forward up
  bench_shape(352, 620, 64, 100);   // output projection
  bench_shape(1024, 1024, 64, 10);  // larger sweep
  return 0;
}
