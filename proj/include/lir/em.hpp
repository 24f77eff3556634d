#pragma once

#include <vector>

#include "lir/pdg.hpp"

namespace lir {

/// Tabular latent variable model p(Z, X) = prior(Z) * cond(X | Z).
struct LatentVarModel {
  int k = 0;  // latent states
  int v = 0;  // observed values
  std::vector<double> prior;  // size k
  std::vector<double> cond;   // row-major k x v

  void validate() const;
  double marginal_x(int x) const;                       // p(x)
  double log_marginal(const std::vector<double>& data) const;  // sum_x d(x) log p(x)
  std::vector<double> posterior() const;                // p(z|x), row-major v x k
};

struct EmTrace {
  /// Model after t full alternations; theta[0] is the initial model, so the
  /// parameters after 2t half-steps live at theta[t].
  std::vector<LatentVarModel> theta;
  /// Recognition cpd q(z|x) (row-major v x k) set by each E half-step.
  std::vector<std::vector<double>> q;
  /// Inconsistency of the shared PDG after each E and each M half-step.
  std::vector<double> values_after_e;
  std::vector<double> values_after_m;
};

/// PDG over (Z, X) with a learnable joint-belief arc for p(Z,X), a constant
/// arc holding the empirical distribution over X, and a recognition arc
/// X -> Z. Its inconsistency at the induced joint d(x) q(z|x) is
/// KL(d q || p), the negated ELBO.
ParametricPDG make_em_pdg(const LatentVarModel& model, const std::vector<double>& data);

/// Alternates full control of the recognition arc (exact posterior) and of
/// the model arc (closed-form tabular maximizer), starting with the
/// recognition step. After the E half-step the inconsistency equals
/// -sum_x d(x) log p(x) - H(d). Throws when a posterior row or updated prior
/// component loses support.
EmTrace em_via_lir(const LatentVarModel& init, const std::vector<double>& data, int iters);

/// Inconsistency of the EM-shaped PDG at the joint induced by (data, q).
double em_inconsistency(const LatentVarModel& model, const std::vector<double>& data,
                        const std::vector<double>& q);

}  // namespace lir
