// Wall-time comparison of the serial and parallel kernels.
//   nnmip_bench [fixture_dir]

#include <chrono>
#include <cstdio>
#include <string>

#include <omp.h>

#include "nnmip/network.hpp"
#include "nnmip/oracle.hpp"
#include "nnmip/resilience.hpp"

using namespace nnmip;

namespace {

template <class F>
double time_it(F&& f, int reps = 3) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : NNMIP_FIXTURE_DIR;
  std::printf("threads available: %d\n", omp_get_max_threads());

  const Network grid_net = load_network(dir + "/relu3class.json");
  double serial_est = 0.0, parallel_est = 0.0;
  const double ts = time_it([&] { serial_est = grid_phi_serial(grid_net, 1, 1.1, 1, 0.01).estimate; });
  const double tp = time_it([&] { parallel_est = grid_phi(grid_net, 1, 1.1, 1, 0.01).estimate; });
  std::printf("grid_phi relu3class step 0.01: serial %.3fs (%.6g)  openmp %.3fs (%.6g)  speedup %.2f\n", ts,
              serial_est, tp, parallel_est, ts / tp);

  const Network mip_net = load_network(dir + "/deep.json");
  for (int workers : {1, 2, 4}) {
    ResilienceConfig cfg;
    cfg.solve.workers = workers;
    cfg.warm_start = false;
    cfg.tighten = false;
    ResilienceResult r;
    const double t = time_it([&] { r = compute_phi(mip_net, 1, 1.1, 1, cfg); }, 1);
    std::printf("compute_phi deep alpha 1.1 k 1: workers %d  %.3fs  phi %.6g  nodes %zu\n", workers, t, r.phi,
                r.full.nodes_explored);
  }
  return 0;
}
