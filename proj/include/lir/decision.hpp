#pragma once

#include <vector>

#include "lir/pdg.hpp"

namespace lir {

/// One-shot decision setting: prior over states, action-indexed outcome
/// kernel, utilities on outcomes, and a soft constraint that disbelieves bad
/// outcomes. tau is row-major [action][state][outcome].
struct DecisionProblem {
  std::vector<double> prior;    // over states
  int n_actions = 0;
  std::vector<double> tau;      // n_actions x n_states x n_outcomes
  std::vector<double> utility;  // over outcomes
  /// Scale of the constraint cpd b(top | o) = k * exp(u(o)). Non-positive
  /// selects exp(-max u), the largest k keeping b a valid cpd.
  double k = 0.0;
  double beta_p = 1.0;  // confidence in the prior
  double beta_b = 1.0;  // attention to the soft constraint

  int n_states() const { return static_cast<int>(prior.size()); }
  int n_outcomes() const { return static_cast<int>(utility.size()); }
  double effective_k() const;
  void validate() const;
};

/// E_{o ~ tau(.|s,a)}[u(o)] + log k.
double expected_utility(const DecisionProblem& prob, int s, int a);

/// -beta_p * log sum_s p(s) exp((beta_b/beta_p) EU(s,a)), evaluated with a
/// max shift. This is the inconsistency of the decision graph with the action
/// pinned to a.
double decision_inconsistency(const DecisionProblem& prob, int a);

/// prior -> S, tau(.|S, a) -> O, constraint O -> T, and the observation
/// pinning T to top (index 1).
ParametricPDG make_decision_pdg(const DecisionProblem& prob, int a);

/// Observational inconsistency of the decision graph at the tilted joint
/// nu(s) tau(o|s,a) delta_top, nu proportional to p * exp((beta_b/beta_p) EU).
/// Agrees with decision_inconsistency up to roundoff.
double decision_numeric(const DecisionProblem& prob, int a);

/// Action minimizing decision_inconsistency (lowest index on ties).
int decision_argmin(const DecisionProblem& prob);

}  // namespace lir
