// Benchmark of the parallel replicate kernel against the serial reference.
#include <chrono>
#include <cstdio>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cmle/simulation.hpp"

namespace {

double time_ms(const std::function<cmle::SimSummary()>& fn, cmle::SimSummary& out) {
  const auto t0 = std::chrono::steady_clock::now();
  out = fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  int reps = argc > 1 ? std::atoi(argv[1]) : 500;
  if (reps < 1) reps = 500;

  cmle::SimConfig cfg;
  cfg.reps = reps;
  cfg.n = 1000;
  cfg.seed = 42;

#ifdef _OPENMP
  const int threads = omp_get_max_threads();
#else
  const int threads = 1;
#endif

  cmle::SimSummary serial_sum, parallel_sum;
  const double serial_ms =
      time_ms([&] { return cmle::run_study_serial(cfg); }, serial_sum);
  const double parallel_ms =
      time_ms([&] { return cmle::run_study(cfg); }, parallel_sum);

  std::printf("replicates        %d\n", reps);
  std::printf("threads           %d\n", threads);
  std::printf("serial            %10.1f ms\n", serial_ms);
  std::printf("parallel          %10.1f ms\n", parallel_ms);
  std::printf("speedup           %10.2fx\n", serial_ms / parallel_ms);

  const bool same = serial_sum.bias1 == parallel_sum.bias1 &&
                    serial_sum.bias2 == parallel_sum.bias2 &&
                    serial_sum.coverage1 == parallel_sum.coverage1 &&
                    serial_sum.coverage2 == parallel_sum.coverage2 &&
                    serial_sum.failures == parallel_sum.failures;
  std::printf("results identical %s\n", same ? "yes" : "NO");
  return same ? 0 : 1;
}
