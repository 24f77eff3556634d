#include "lir/decision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "lir/inconsistency.hpp"

namespace lir {

double DecisionProblem::effective_k() const {
  if (k > 0.0) return k;
  return std::exp(-*std::max_element(utility.begin(), utility.end()));
}

void DecisionProblem::validate() const {
  if (prior.empty() || utility.empty() || n_actions < 1)
    throw std::invalid_argument("decision problem needs states, outcomes and actions");
  double total = 0.0;
  for (double p : prior) {
    if (!(p > 0.0)) throw std::invalid_argument("prior must be strictly positive");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("prior must sum to 1");
  const std::size_t want =
      static_cast<std::size_t>(n_actions) * n_states() * n_outcomes();
  if (tau.size() != want)
    throw std::invalid_argument("tau must hold n_actions x n_states x n_outcomes rows");
  for (int a = 0; a < n_actions; ++a)
    for (int s = 0; s < n_states(); ++s) {
      double row = 0.0;
      for (int o = 0; o < n_outcomes(); ++o) {
        const double t = tau[(static_cast<std::size_t>(a) * n_states() + s) * n_outcomes() + o];
        if (t < 0.0) throw std::invalid_argument("tau has a negative entry");
        row += t;
      }
      if (std::abs(row - 1.0) > 1e-9)
        throw std::invalid_argument("tau rows must be distributions");
    }
  if (!(beta_p > 0.0)) throw std::invalid_argument("beta_p must be positive");
  const double keff = effective_k();
  for (double u : utility)
    if (keff * std::exp(u) > 1.0 + 1e-12)
      throw std::invalid_argument("k too large: constraint probability exceeds 1");
}

double expected_utility(const DecisionProblem& prob, int s, int a) {
  const int no = prob.n_outcomes();
  const double* row = prob.tau.data() + (static_cast<std::size_t>(a) * prob.n_states() + s) * no;
  double eu = std::log(prob.effective_k());
  for (int o = 0; o < no; ++o) eu += row[o] * prob.utility[o];
  return eu;
}

double decision_inconsistency(const DecisionProblem& prob, int a) {
  prob.validate();
  if (a < 0 || a >= prob.n_actions) throw std::out_of_range("action out of range");
  const double t = prob.beta_b / prob.beta_p;
  double shift = -std::numeric_limits<double>::infinity();
  std::vector<double> scaled(prob.n_states());
  for (int s = 0; s < prob.n_states(); ++s) {
    scaled[s] = t * expected_utility(prob, s, a);
    shift = std::max(shift, scaled[s]);
  }
  double z = 0.0;
  for (int s = 0; s < prob.n_states(); ++s) z += prob.prior[s] * std::exp(scaled[s] - shift);
  return -prob.beta_p * (shift + std::log(z));
}

ParametricPDG make_decision_pdg(const DecisionProblem& prob, int a) {
  prob.validate();
  if (a < 0 || a >= prob.n_actions) throw std::out_of_range("action out of range");
  const int ns = prob.n_states(), no = prob.n_outcomes();

  ParametricPDG pdg;
  pdg.variables = {{"S", ns}, {"O", no}, {"T", 2}};

  Hyperarc prior;
  prior.id = "prior";
  prior.targets = {"S"};
  prior.cpd.kind = CpdKind::ConstantTable;
  prior.cpd.params = prob.prior;
  prior.cpd.default_params = prior.cpd.params;
  prior.beta = prob.beta_p;
  pdg.arcs.push_back(prior);

  Hyperarc kernel;
  kernel.id = "tau";
  kernel.sources = {"S"};
  kernel.targets = {"O"};
  kernel.cpd.kind = CpdKind::ConstantTable;
  kernel.cpd.params.assign(prob.tau.begin() + static_cast<std::size_t>(a) * ns * no,
                           prob.tau.begin() + static_cast<std::size_t>(a + 1) * ns * no);
  kernel.cpd.default_params = kernel.cpd.params;
  pdg.arcs.push_back(kernel);

  Hyperarc soft;
  soft.id = "b";
  soft.sources = {"O"};
  soft.targets = {"T"};
  soft.cpd.kind = CpdKind::ConstantTable;
  soft.cpd.params.resize(2 * no);
  const double keff = prob.effective_k();
  for (int o = 0; o < no; ++o) {
    const double top = std::min(1.0, keff * std::exp(prob.utility[o]));
    soft.cpd.params[2 * o] = 1.0 - top;
    soft.cpd.params[2 * o + 1] = top;
  }
  soft.cpd.default_params = soft.cpd.params;
  soft.beta = prob.beta_b;
  pdg.arcs.push_back(soft);

  Hyperarc obs;
  obs.id = "t_obs";
  obs.targets = {"T"};
  obs.cpd.kind = CpdKind::ConstantTable;
  obs.cpd.params = {0.0, 1.0};
  obs.cpd.default_params = obs.cpd.params;
  pdg.arcs.push_back(obs);

  pdg.validate();
  return pdg;
}

double decision_numeric(const DecisionProblem& prob, int a) {
  const ParametricPDG pdg = make_decision_pdg(prob, a);
  const int ns = prob.n_states(), no = prob.n_outcomes();
  const double t = prob.beta_b / prob.beta_p;

  // Tilted state belief nu(s), computed with the same max shift as the
  // closed form.
  std::vector<double> nu(ns);
  double shift = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < ns; ++s) shift = std::max(shift, t * expected_utility(prob, s, a));
  double z = 0.0;
  for (int s = 0; s < ns; ++s) {
    nu[s] = prob.prior[s] * std::exp(t * expected_utility(prob, s, a) - shift);
    z += nu[s];
  }
  for (double& v : nu) v /= z;

  JointTable mu;
  mu.scope = {"S", "O", "T"};
  mu.sizes = {ns, no, 2};
  mu.probs.assign(static_cast<std::size_t>(ns) * no * 2, 0.0);
  for (int s = 0; s < ns; ++s)
    for (int o = 0; o < no; ++o)
      mu.probs[(static_cast<std::size_t>(s) * no + o) * 2 + 1] =
          nu[s] * prob.tau[(static_cast<std::size_t>(a) * ns + s) * no + o];

  std::vector<double> beta;
  beta.reserve(pdg.arcs.size());
  for (const auto& arc : pdg.arcs) beta.push_back(arc.beta);
  return oinc(pdg, mu, beta);
}

int decision_argmin(const DecisionProblem& prob) {
  prob.validate();
  int best = 0;
  double best_value = decision_inconsistency(prob, 0);
  for (int a = 1; a < prob.n_actions; ++a) {
    const double v = decision_inconsistency(prob, a);
    if (v < best_value) {
      best_value = v;
      best = a;
    }
  }
  return best;
}

}  // namespace lir
