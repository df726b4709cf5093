// Times the OpenMP kernels against the serial reference implementations.
//
//   mgnet_bench [nodes] [dout] [modalities] [subjects] [reps]
//
// Thread count follows OMP_NUM_THREADS.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mgnet/graph.hpp"
#include "mgnet/model.hpp"
#include "mgnet/reference.hpp"
#include "mgnet/rng.hpp"
#include "mgnet/tensor.hpp"

using namespace mgnet;

namespace {

using clock_type = std::chrono::steady_clock;

Tensor4 random_tensor(std::size_t a, std::size_t b, std::size_t c,
                      std::size_t d, Rng &rng) {
  Tensor4 t(a, b, c, d);
  for (double &x : t.data) x = rng.uniform(-1.0, 1.0);
  return t;
}

Matrix random_matrix(std::size_t r, std::size_t c, Rng &rng) {
  Matrix m(r, c);
  for (double &x : m.data) x = rng.uniform(-1.0, 1.0);
  return m;
}

template <typename F>
double time_ms(int reps, F &&fn) {
  fn();  // warmup
  const auto start = clock_type::now();
  for (int r = 0; r < reps; ++r) fn();
  const auto stop = clock_type::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

void report(const char *name, double serial_ms, double kernel_ms) {
  std::printf("%-22s %10.3f ms %10.3f ms %8.2fx\n", name, serial_ms, kernel_ms,
              serial_ms / kernel_ms);
}

}  // namespace

int main(int argc, char **argv) {
  std::size_t n = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 64;
  std::size_t dout = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 64;
  std::size_t mods = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 3;
  std::size_t subs = argc > 4 ? std::strtoull(argv[4], nullptr, 10) : 48;
  int reps = argc > 5 ? std::atoi(argv[5]) : 5;

#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (built without OpenMP)\n");
#endif
  std::printf("shape: %zux%zux%zux%zu, dout %zu, %d reps\n", n, n, mods, subs,
              dout, reps);
  std::printf("%-22s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

  Rng rng(7);
  const Tensor4 x = random_tensor(n, n, mods, subs, rng);
  const Matrix a = random_matrix(n, n, rng);
  const Matrix w = random_matrix(n, dout, rng);

  {
    const double serial =
        time_ms(reps, [&] { ref::mode_n_product(x, a, 0); });
    const double kernel = time_ms(reps, [&] { mode_n_product(x, a, 0); });
    report("mode-0 product", serial, kernel);
  }
  {
    const double serial = time_ms(reps, [&] { ref::gcn_layer(x, a, w); });
    const double kernel = time_ms(reps, [&] { gcn_layer(x, a, w); });
    report("gcn layer", serial, kernel);
  }
  {
    std::vector<double> alpha(mods, 1.0 / static_cast<double>(mods));
    const double serial = time_ms(reps, [&] { ref::modality_pool(x, alpha); });
    const double kernel = time_ms(reps, [&] { modality_pool(x, alpha); });
    report("modality pool", serial, kernel);
  }
  {
    const std::size_t big_n = 512;
    const Matrix u = random_matrix(big_n, 16, rng);
    const double serial =
        time_ms(reps, [&] { ref::knn_adjacency(u, 8, 1.0); });
    const double kernel = time_ms(reps, [&] { knn_adjacency(u, 8, 1.0); });
    report("knn adjacency (512)", serial, kernel);
  }
  return 0;
}
