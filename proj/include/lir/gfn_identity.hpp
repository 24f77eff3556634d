#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace lir {

/// Small enumerable DAG for flow-matching checks. Trajectories start at
/// `start`, move along edges, and end by terminating at a state where
/// can_terminate is set; that state's reward enters the sink row of the
/// backward policy as R(x)/Z.
struct GfnDag {
  int n_states = 0;
  std::vector<std::pair<int, int>> edges;  // from -> to
  int start = 0;
  std::vector<char> can_terminate;  // per state
  std::vector<double> reward;       // per state, used where can_terminate

  std::vector<int> out_edges(int s) const;  // indices into edges
  std::vector<int> in_edges(int s) const;
  void validate() const;
};

/// Tabular policies: forward logits per state aligned with
/// (out_edges(s)..., terminate) where the terminate slot exists only for
/// terminating states; backward logits per state aligned with in_edges(s),
/// empty meaning uniform over parents. log_z estimates log sum of rewards.
struct GfnPolicies {
  std::vector<std::vector<double>> forward;
  std::vector<std::vector<double>> backward;
  double log_z = 0.0;
};

/// All complete trajectories as state sequences s_0 .. x (the terminate move
/// is implicit). Deterministic order: depth-first by edge index. Throws if
/// more than `cap` trajectories exist.
std::vector<std::vector<int>> enumerate_trajectories(const GfnDag& dag, std::size_t cap = 10000);

struct GfnIdentityCheck {
  double numeric = 0.0;  // inconsistency at the pinned trajectory joint
  double modtb = 0.0;    // E_Q[ score^2 / |tau| ]
  /// Gradients over the flattened forward logits: numeric with the surprisal
  /// attention frozen, and the direct loss gradient.
  std::vector<double> grad_numeric;
  std::vector<double> grad_modtb;
  double cosine = 0.0;  // between the two gradients
};

/// Evaluates the trajectory-indexed graph over (tau, i, S, S') at the joint
/// forced by the high-confidence labels, with per-trajectory attention
/// log(P_B/P_F) on the forward arc and its negation on the backward arc.
/// `q` weights trajectories in enumerate_trajectories order. Throws when q
/// gives some trajectory zero or negative probability.
GfnIdentityCheck gfn_identity_check(const GfnDag& dag, const GfnPolicies& pol,
                                    const std::vector<double>& q);

/// Policies whose flows satisfy F(s) = R(s) + sum_{s->c} F(c) P_B(s|c), so
/// every trajectory scores exactly zero. Backward stays uniform;
/// log_z = log F(start).
GfnPolicies balanced_policies(const GfnDag& dag);

}  // namespace lir
