#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lir/pdg.hpp"

namespace lir::kernels {

/// One retained arc inside a Workspace: signed weights, log-cpd entries over
/// (source config, target config) pairs, and the precomputed cell -> pair map.
struct ArcSlot {
  int arc_index = -1;
  double beta = 0;
  double alpha = 0;
  std::size_t n_src = 1;
  std::size_t n_tgt = 1;
  std::vector<double> logp;                // -inf marks zero cpd cells
  std::vector<std::int32_t> cell_to_pair;  // per feasible cell: s * n_tgt + t
};

/// Dense evaluation plan for one masked objective
///   F(mu) = sum_a beta_a KL(mu(T,S) || p_a mu(S)) + gamma * SDef(mu)
/// over the feasible cells of the pruned product domain. Cells where any
/// positively weighted cpd has zero mass are excluded up front; the infimum
/// never touches them.
struct Workspace {
  std::vector<std::string> scope;       // retained variables
  std::vector<int> sizes;
  std::vector<std::size_t> feasible;    // flat joint index per cell slot
  std::vector<ArcSlot> arcs;
  double gamma = 0;
  std::size_t domain_cells = 0;         // full product domain size

  std::size_t n_cells() const { return feasible.size(); }
};

/// Prunes arcs with beta = 0 and gamma*alpha = 0, prunes variables touched by
/// no retained arc, applies the zero-support mask. Throws when no feasible
/// cell remains or when a negative-beta arc makes the objective unbounded.
Workspace build_workspace(const ParametricPDG& pdg, const Focus& focus);

/// Reference implementation: value of F at mu (a distribution over the
/// workspace's feasible cells) and, when grad != nullptr, dF/dmu per cell.
double objective_serial(const Workspace& ws, const double* mu, double* grad);

/// OpenMP implementation. Reductions combine per-thread partials in thread
/// order, so results are reproducible for a fixed thread count.
double objective_parallel(const Workspace& ws, const double* mu, double* grad, int threads);

/// Dispatches to the parallel kernel when the problem and thread budget
/// justify it, otherwise the serial reference.
double objective(const Workspace& ws, const double* mu, double* grad);

/// Worker cap: min(omp_get_max_threads(), LIRLAB_THREADS if set). 1 without OpenMP.
int thread_budget();

}  // namespace lir::kernels
