#pragma once

#include <optional>
#include <vector>

#include "lir/pdg.hpp"

namespace lir {

struct InnerSolverConfig {
  int max_iters = 300;
  double step_size = 0.05;
  double tolerance = 1e-7;  // gradient norm target
  std::optional<JointTable> warm_start;

  static InnerSolverConfig cold() { return {}; }
  /// Short-budget config; the caller installs the warm table per solve.
  static InnerSolverConfig warm_defaults() {
    InnerSolverConfig cfg;
    cfg.max_iters = 20;
    return cfg;
  }
  static InnerSolverConfig warm(JointTable mu) {
    InnerSolverConfig cfg;
    cfg.max_iters = 20;
    cfg.warm_start = std::move(mu);
    return cfg;
  }
  /// Tight configuration for oracle-grade solves.
  static InnerSolverConfig stationary(int iters = 4000, double tol = 1e-12) {
    InnerSolverConfig cfg;
    cfg.max_iters = iters;
    cfg.tolerance = tol;
    return cfg;
  }
};

struct InconsistencyResult {
  double value = 0;       // nats
  JointTable mu_star;     // over the pruned scope
  bool converged = false;
  int iterations_used = 0;
};

/// Observational incompatibility sum_a beta_a D(mu(Tgt,Src) || p_a(Tgt|Src) mu(Src)).
/// Returns +-infinity when mu puts mass (> 1e-12) where a weighted cpd is zero.
/// mu must cover the scope of every arc with beta != 0.
double oinc(const ParametricPDG& pdg, const JointTable& mu, const std::vector<double>& beta);

/// Structural deficiency -H(scope of mu) + sum_a alpha_a H(Tgt_a | Src_a) under mu.
double sdef(const ParametricPDG& pdg, const JointTable& mu, const std::vector<double>& alpha);

/// Minimizes oinc + gamma*sdef over joint distributions of the pruned scope.
/// Adaptive first-order descent on joint logits (Adam-style moments with
/// plateau-triggered step halving). converged means the gradient norm reached
/// cfg.tolerance; with negative beta the problem can be non-convex and
/// oscillation is reported as converged=false.
InconsistencyResult solve_inconsistency(const ParametricPDG& pdg, const Focus& focus,
                                        const InnerSolverConfig& cfg = {});

/// Per-arc parameter gradients, aligned with pdg.arcs. Empty vectors for
/// non-learnable or uncontrolled (chi = 0) arcs.
struct ParamGrad {
  std::vector<std::vector<double>> by_arc;

  double norm() const;
};

/// Envelope gradient: d(oinc + gamma*sdef)/d theta holding mu fixed at mu_star.
/// Only arcs with chi > 0 receive entries.
ParamGrad envelope_grad(const ParametricPDG& pdg, const Focus& focus, const JointTable& mu_star);

}  // namespace lir
