// Times the serial reference objective kernel against the OpenMP one on
// random PDGs of growing joint-domain size and checks they agree bitwise-ish
// (reductions run in thread order, so differences stay at rounding level).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "lir/kernels.hpp"
#include "lir/pdg.hpp"
#include "lir/rng.hpp"
#include "lir/synth.hpp"

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct Case {
  std::string name;
  lir::ParametricPDG pdg;
};

}  // namespace

int main(int argc, char** argv) {
  int reps = 200;
  if (argc > 1) reps = std::atoi(argv[1]);

  std::vector<Case> cases;
  for (const char* name : {"chain_6v_5e", "chain_8v_7e", "chain_10v_9e", "chain_12v_11e"}) {
    lir::GeneratorSpec spec = lir::parse_generator_spec(name, 7);
    cases.push_back({name, lir::generate_chain_pdg(spec)});
  }

  const int threads = lir::kernels::thread_budget();
  std::printf("threads=%d reps=%d\n", threads, reps);
  std::printf("%-14s %10s %12s %12s %9s %10s\n", "pdg", "cells", "serial_s", "parallel_s",
              "speedup", "max_diff");

  lir::Rng rng(11);
  for (Case& c : cases) {
    const lir::Focus focus = lir::Focus::full_attention(c.pdg, 0.0);
    const lir::kernels::Workspace ws = lir::kernels::build_workspace(c.pdg, focus);
    const std::size_t n = ws.n_cells();
    std::vector<double> mu = rng.next_simplex(static_cast<int>(n));
    std::vector<double> g1(n), g2(n);

    double v1 = 0, v2 = 0;
    const double t0 = now_seconds();
    for (int r = 0; r < reps; ++r) v1 = lir::kernels::objective_serial(ws, mu.data(), g1.data());
    const double t1 = now_seconds();
    for (int r = 0; r < reps; ++r)
      v2 = lir::kernels::objective_parallel(ws, mu.data(), g2.data(), threads);
    const double t2 = now_seconds();

    double max_diff = std::abs(v1 - v2);
    for (std::size_t i = 0; i < n; ++i)
      max_diff = std::max(max_diff, std::abs(g1[i] - g2[i]));

    const double serial_s = t1 - t0, parallel_s = t2 - t1;
    std::printf("%-14s %10zu %12.6f %12.6f %9.2fx %10.2e\n", c.name.c_str(), n, serial_s,
                parallel_s, parallel_s > 0 ? serial_s / parallel_s : 0.0, max_diff);
    if (max_diff > 1e-9) {
      std::fprintf(stderr, "kernel mismatch on %s: %g\n", c.name.c_str(), max_diff);
      return 1;
    }
  }
  return 0;
}
