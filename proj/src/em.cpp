#include "lir/em.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "lir/inconsistency.hpp"

namespace lir {

namespace {

void check_data(const LatentVarModel& model, const std::vector<double>& data) {
  model.validate();
  if (data.size() != std::size_t(model.v))
    throw std::invalid_argument("data distribution has wrong size");
  double sum = 0;
  for (double p : data) {
    if (p < -1e-12) throw std::invalid_argument("data entries must be nonnegative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("data must sum to 1");
}

std::vector<double> log_params(const std::vector<double>& rows) {
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = std::log(std::max(rows[i], 1e-300));
  return out;
}

}  // namespace

void LatentVarModel::validate() const {
  if (k <= 0 || v <= 0) throw std::invalid_argument("model dimensions must be positive");
  if (prior.size() != std::size_t(k)) throw std::invalid_argument("prior has wrong size");
  if (cond.size() != std::size_t(k) * v) throw std::invalid_argument("conditional has wrong size");
  double ps = 0;
  for (double p : prior) {
    if (p < -1e-12) throw std::invalid_argument("prior entries must be nonnegative");
    ps += p;
  }
  if (std::abs(ps - 1.0) > 1e-9) throw std::invalid_argument("prior must sum to 1");
  for (int z = 0; z < k; ++z) {
    double rs = 0;
    for (int x = 0; x < v; ++x) rs += cond[std::size_t(z) * v + x];
    if (std::abs(rs - 1.0) > 1e-9)
      throw std::invalid_argument("conditional row " + std::to_string(z) + " must sum to 1");
  }
}

double LatentVarModel::marginal_x(int x) const {
  double p = 0;
  for (int z = 0; z < k; ++z) p += prior[z] * cond[std::size_t(z) * v + x];
  return p;
}

double LatentVarModel::log_marginal(const std::vector<double>& data) const {
  double val = 0;
  for (int x = 0; x < v; ++x) {
    if (data[x] <= 0) continue;
    double p = marginal_x(x);
    if (p <= 0) throw std::domain_error("observed value has zero marginal probability");
    val += data[x] * std::log(p);
  }
  return val;
}

std::vector<double> LatentVarModel::posterior() const {
  std::vector<double> q(std::size_t(v) * k, 0.0);
  for (int x = 0; x < v; ++x) {
    double px = marginal_x(x);
    if (px <= 0)
      throw std::domain_error("degenerate posterior: value " + std::to_string(x) +
                              " has zero probability under the model");
    for (int z = 0; z < k; ++z)
      q[std::size_t(x) * k + z] = prior[z] * cond[std::size_t(z) * v + x] / px;
  }
  return q;
}

ParametricPDG make_em_pdg(const LatentVarModel& model, const std::vector<double>& data) {
  check_data(model, data);
  ParametricPDG pdg;
  pdg.variables.push_back({"Z", model.k});
  pdg.variables.push_back({"X", model.v});

  Hyperarc p;
  p.id = "p";
  p.targets = {"Z", "X"};
  p.cpd.kind = CpdKind::LearnableTable;
  std::vector<double> joint(std::size_t(model.k) * model.v);
  for (int z = 0; z < model.k; ++z)
    for (int x = 0; x < model.v; ++x)
      joint[std::size_t(z) * model.v + x] = model.prior[z] * model.cond[std::size_t(z) * model.v + x];
  p.cpd.params = log_params(joint);
  p.cpd.default_params = p.cpd.params;
  pdg.arcs.push_back(std::move(p));

  Hyperarc d;
  d.id = "d";
  d.targets = {"X"};
  d.cpd.kind = CpdKind::ConstantTable;
  d.cpd.params = data;
  d.cpd.default_params = data;
  pdg.arcs.push_back(std::move(d));

  Hyperarc q;
  q.id = "q";
  q.sources = {"X"};
  q.targets = {"Z"};
  q.cpd.kind = CpdKind::LearnableTable;
  std::vector<double> uniform(std::size_t(model.v) * model.k, 1.0 / model.k);
  q.cpd.params = log_params(uniform);
  q.cpd.default_params = q.cpd.params;
  pdg.arcs.push_back(std::move(q));

  pdg.validate();
  return pdg;
}

double em_inconsistency(const LatentVarModel& model, const std::vector<double>& data,
                        const std::vector<double>& q) {
  check_data(model, data);
  if (q.size() != std::size_t(model.v) * model.k)
    throw std::invalid_argument("recognition cpd has wrong size");

  ParametricPDG pdg = make_em_pdg(model, data);
  pdg.arcs[pdg.arc_index("q")].cpd.params = log_params(q);

  JointTable mu;
  mu.scope = {"Z", "X"};
  mu.sizes = {model.k, model.v};
  mu.probs.assign(std::size_t(model.k) * model.v, 0.0);
  for (int z = 0; z < model.k; ++z)
    for (int x = 0; x < model.v; ++x)
      mu.probs[std::size_t(z) * model.v + x] = data[x] * q[std::size_t(x) * model.k + z];

  return oinc(pdg, mu, {1.0, 1.0, 1.0});
}

EmTrace em_via_lir(const LatentVarModel& init, const std::vector<double>& data, int iters) {
  check_data(init, data);
  if (iters < 0) throw std::invalid_argument("iters must be nonnegative");

  EmTrace trace;
  trace.theta.push_back(init);

  LatentVarModel cur = init;
  for (int t = 0; t < iters; ++t) {
    // E half-step: full control of q drives it to the exact posterior.
    std::vector<double> q = cur.posterior();
    trace.q.push_back(q);
    trace.values_after_e.push_back(em_inconsistency(cur, data, q));

    // M half-step: full control of p; the tabular maximizer of
    // sum_{z,x} d(x) q(z|x) log p(z,x) is the induced joint itself.
    LatentVarModel next = cur;
    for (int z = 0; z < cur.k; ++z) {
      double pz = 0;
      for (int x = 0; x < cur.v; ++x) pz += data[x] * q[std::size_t(x) * cur.k + z];
      next.prior[z] = pz;
      if (pz <= 0)
        throw std::domain_error("degenerate posterior: latent state " + std::to_string(z) +
                                " lost all mass in the M step");
      for (int x = 0; x < cur.v; ++x)
        next.cond[std::size_t(z) * cur.v + x] = data[x] * q[std::size_t(x) * cur.k + z] / pz;
    }
    cur = next;
    trace.values_after_m.push_back(em_inconsistency(cur, data, q));
    trace.theta.push_back(cur);
  }
  return trace;
}

}  // namespace lir
