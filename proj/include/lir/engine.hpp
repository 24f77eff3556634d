#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lir/inconsistency.hpp"
#include "lir/pdg.hpp"
#include "lir/rng.hpp"

namespace lir {

enum class Integrator { Euler, RK4, AdaptiveFirstOrder };

struct OdeConfig {
  Integrator integrator = Integrator::AdaptiveFirstOrder;
  int outer_iters_per_step = 10;
  double step_scale = 0.05;  // multiplied by each arc's chi to give its rate
  /// Stationarity target for chi = infinity arcs (envelope gradient norm).
  double full_control_tolerance = 1e-8;
};

/// Adam moments carried across steps of a run (AdaptiveFirstOrder only).
struct OptimizerState {
  struct Slot {
    std::vector<double> m1, m2;
    long t = 0;
  };
  std::map<int, Slot> slots;  // keyed by arc index
};

struct StepRecord {
  Focus focus;
  double value = 0.0;  // masked inconsistency after the update
  std::uint64_t param_hash = 0;
  JointTable mu_star;
  double seconds = 0.0;  // stays 0 unless timings were requested
  bool ok = true;
  int inner_iterations = 0;  // inner-solver iterations spent in this step
};

struct LirTrace {
  std::vector<StepRecord> steps;
  double initial_value = 0.0;  // full-attention value before any update
  double final_value = 0.0;    // full-attention value after the last step
  JointTable mu_initial;
  JointTable mu_final;
  bool aborted = false;
};

/// One outer step: repeats (warm inner solve, envelope-gradient update) for
/// ode.outer_iters_per_step rounds on every finite-chi arc, then drives
/// chi = infinity arcs to a stationary point of the masked objective.
/// Updates pdg parameters in place.
///
/// `state` carries Adam moments between steps (optional), `warm` seeds the
/// first inner solve. Throws on unbounded objectives; a finite but truncated
/// inner solve is not a failure.
StepRecord lir_step(ParametricPDG& pdg, const Focus& focus, const OdeConfig& ode,
                    const InnerSolverConfig& inner, OptimizerState* state = nullptr,
                    const JointTable* warm = nullptr, bool timings = false);

struct RefocusStrategy {
  enum class Kind { FixedCycle, Uniform, Partial, Hub, SmoothExponential, Custom };
  Kind kind = Kind::Uniform;
  std::uint64_t seed = 0;
  double fraction = 0.5;  // Partial: active count = max(1, floor(fraction * n_arcs))
  double rate = 1.0;      // SmoothExponential
  double gamma = 0.0;     // gamma installed in every generated focus
  std::vector<Focus> cycle;  // FixedCycle
  std::function<Focus(int step, const ParametricPDG&)> custom;
};

RefocusStrategy parse_strategy(const std::string& name, std::uint64_t seed);

/// Deterministic stream of foci: step t depends only on (seed, t).
/// Generated foci use beta masks over the arcs' stored alphas, chi = 1.
class RefocusStream {
 public:
  RefocusStream(RefocusStrategy strategy, const ParametricPDG& pdg);
  Focus next();

 private:
  RefocusStrategy strategy_;
  const ParametricPDG* pdg_;
  Rng root_;
  int step_ = 0;
};

RefocusStream make_refocus(const RefocusStrategy& strategy, const ParametricPDG& pdg);

struct LirRunConfig {
  int steps = 20;
  OdeConfig ode;
  /// Per-outer-iteration solves; warm starts are threaded automatically.
  InnerSolverConfig inner = InnerSolverConfig::warm_defaults();
  /// Full-attention bracketing solves for the trace's initial/final values.
  InnerSolverConfig initial_solve = InnerSolverConfig::cold();
  InnerSolverConfig final_solve = InnerSolverConfig::cold();
  bool timings = false;
  int max_consecutive_failures = 3;
};

/// Algorithm: reset parameters to defaults, then alternate refocus and
/// lir_step, recording a trace bracketed by full-attention solves.
LirTrace lir_run(ParametricPDG& pdg, const RefocusStrategy& strategy, const LirRunConfig& cfg);

/// 100 * (initial - final) / initial from the trace's bracketing values.
/// Throws when the initial value is 0 (the quantity is undefined).
double resolution_percentage(const LirTrace& trace);

/// Total variation distance; `b` is realigned to `a`'s scope order first.
double tv_distortion(const JointTable& a, const JointTable& b);

}  // namespace lir
