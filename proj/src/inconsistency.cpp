#include "lir/inconsistency.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "lir/kernels.hpp"

namespace lir {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

inline double xlogx(double x) { return x > 0 ? x * std::log(x) : 0.0; }

std::vector<std::string> arc_scope(const Hyperarc& a) {
  std::vector<std::string> scope = a.sources;
  scope.insert(scope.end(), a.targets.begin(), a.targets.end());
  return scope;
}

void check_scope(const ParametricPDG& pdg, const JointTable& mu, const Hyperarc& a) {
  for (const auto& id : arc_scope(a)) {
    bool found = false;
    for (const auto& s : mu.scope) found |= (s == id);
    if (!found)
      throw std::invalid_argument("oinc/sdef: mu's scope is missing variable '" + id +
                                  "' used by arc '" + a.id + "'");
  }
  (void)pdg;
}

}  // namespace

double oinc(const ParametricPDG& pdg, const JointTable& mu, const std::vector<double>& beta) {
  if (beta.size() != pdg.arcs.size())
    throw std::invalid_argument("oinc: beta must align with pdg.arcs");
  double total = 0;
  for (std::size_t i = 0; i < pdg.arcs.size(); ++i) {
    if (beta[i] == 0) continue;
    const Hyperarc& a = pdg.arcs[i];
    check_scope(pdg, mu, a);
    const JointTable pair = marginal(mu, arc_scope(a));
    const std::size_t nt = pdg.n_target_configs(a);
    const std::size_t ns = pair.probs.size() / nt;
    const auto table = pdg.cpd_table(a);

    std::vector<double> src(ns, 0.0);
    for (std::size_t s = 0; s < ns; ++s)
      for (std::size_t t = 0; t < nt; ++t) src[s] += pair.probs[s * nt + t];

    double term = 0;
    for (std::size_t s = 0; s < ns; ++s)
      for (std::size_t t = 0; t < nt; ++t) {
        const double m = pair.probs[s * nt + t];
        if (m <= 1e-12) continue;  // infimum convention: negligible mass scores 0
        const double p = table[s * nt + t];
        if (p <= 0) return beta[i] > 0 ? kInf : -kInf;
        term += m * (std::log(m / src[s]) - std::log(p));
      }
    total += beta[i] * term;
  }
  return total;
}

double sdef(const ParametricPDG& pdg, const JointTable& mu, const std::vector<double>& alpha) {
  if (alpha.size() != pdg.arcs.size())
    throw std::invalid_argument("sdef: alpha must align with pdg.arcs");
  double total = 0;
  for (double p : mu.probs) total += xlogx(p);  // -H(scope)
  for (std::size_t i = 0; i < pdg.arcs.size(); ++i) {
    if (alpha[i] == 0) continue;
    const Hyperarc& a = pdg.arcs[i];
    check_scope(pdg, mu, a);
    const JointTable pair = marginal(mu, arc_scope(a));
    const std::size_t nt = pdg.n_target_configs(a);
    const std::size_t ns = pair.probs.size() / nt;
    double h_pair = 0, h_src = 0;
    for (std::size_t s = 0; s < ns; ++s) {
      double row = 0;
      for (std::size_t t = 0; t < nt; ++t) {
        h_pair -= xlogx(pair.probs[s * nt + t]);
        row += pair.probs[s * nt + t];
      }
      h_src -= xlogx(row);
    }
    total += alpha[i] * (h_pair - h_src);  // H(Tgt|Src)
  }
  return total;
}

namespace {

// Maps a warm-start table onto the workspace scope: marginalize out dropped
// variables, extend new ones uniformly, then restrict to feasible cells.
std::vector<double> adapt_warm_start(const kernels::Workspace& ws, const JointTable& prev) {
  std::vector<std::string> shared;
  for (const auto& id : ws.scope)
    for (const auto& p : prev.scope)
      if (id == p) shared.push_back(id);

  JointTable base;
  if (!shared.empty()) base = marginal(prev, shared);

  std::vector<double> mu(ws.n_cells(), 0.0);
  std::vector<std::size_t> strides(ws.sizes.size(), 1);
  for (std::size_t i = ws.sizes.size(); i-- > 1;)
    strides[i - 1] = strides[i] * static_cast<std::size_t>(ws.sizes[i]);

  std::vector<int> shared_pos;
  for (const auto& id : shared) {
    for (std::size_t i = 0; i < ws.scope.size(); ++i)
      if (ws.scope[i] == id) shared_pos.push_back(static_cast<int>(i));
  }

  double total = 0;
  for (std::size_t slot = 0; slot < ws.n_cells(); ++slot) {
    const std::size_t c = ws.feasible[slot];
    double w = 1.0;
    if (!shared.empty()) {
      std::size_t idx = 0;
      for (std::size_t i = 0; i < shared.size(); ++i) {
        const std::size_t p = static_cast<std::size_t>(shared_pos[i]);
        idx = idx * static_cast<std::size_t>(ws.sizes[p]) +
              (c / strides[p]) % static_cast<std::size_t>(ws.sizes[p]);
      }
      w = base.probs[idx];
    }
    mu[slot] = std::max(w, 1e-12);
    total += mu[slot];
  }
  for (double& m : mu) m /= total;
  return mu;
}

}  // namespace

InconsistencyResult solve_inconsistency(const ParametricPDG& pdg, const Focus& focus,
                                        const InnerSolverConfig& cfg) {
  if (cfg.max_iters < 1) throw std::invalid_argument("solver: max_iters must be >= 1");
  const kernels::Workspace ws = kernels::build_workspace(pdg, focus);
  const std::size_t n = ws.n_cells();

  std::vector<double> z(n, 0.0);
  // A warm start is only usable while the pruned scope is unchanged; after a
  // refocus that drops or adds variables the stored table no longer describes
  // this feasible set, so the solve restarts from the uniform point.
  if (cfg.warm_start && cfg.warm_start->scope == ws.scope) {
    const auto mu0 = adapt_warm_start(ws, *cfg.warm_start);
    for (std::size_t i = 0; i < n; ++i) z[i] = std::log(mu0[i]);
  }

  std::vector<double> mu(n), grad_mu(n), grad_z(n);
  std::vector<double> m1(n, 0.0), m2(n, 0.0);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;

  auto eval = [&](const std::vector<double>& logits, std::vector<double>& out_mu,
                  std::vector<double>* out_gz) {
    double zmax = -kInf;
    for (double v : logits) zmax = std::max(zmax, v);
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      out_mu[i] = std::exp(logits[i] - zmax);
      total += out_mu[i];
    }
    for (double& v : out_mu) v /= total;
    const double f = kernels::objective(ws, out_mu.data(), out_gz ? grad_mu.data() : nullptr);
    if (out_gz) {
      double dot = 0;
      for (std::size_t i = 0; i < n; ++i) dot += out_mu[i] * grad_mu[i];
      for (std::size_t i = 0; i < n; ++i) (*out_gz)[i] = out_mu[i] * (grad_mu[i] - dot);
    }
    return f;
  };

  double step = cfg.step_size;
  double best_f = kInf;
  std::vector<double> best_mu;
  int stall = 0, used = 0;
  bool converged = false;
  // Last 10 objective values; a run that still moves more than the tolerance
  // across this window at exit is treated as oscillating (the signed-beta
  // objectives need not be convex) and reported converged=false.
  std::array<double, 10> window;
  window.fill(kInf);

  for (int t = 1; t <= cfg.max_iters; ++t) {
    used = t;
    const double f = eval(z, mu, &grad_z);
    window[static_cast<std::size_t>(t) % window.size()] = f;
    double gnorm = 0;
    for (double g : grad_z) gnorm += g * g;
    gnorm = std::sqrt(gnorm);

    if (f < best_f - 1e-15) {
      best_f = f;
      best_mu = mu;
      stall = 0;
    } else {
      if (best_mu.empty()) best_mu = mu, best_f = f;
      if (++stall >= 20) {
        step *= 0.5;
        stall = 0;
        if (step < 1e-13) break;
      }
    }
    if (gnorm < cfg.tolerance) {
      converged = true;
      break;
    }
    const double corr = std::sqrt(1.0 - std::pow(b2, t)) / (1.0 - std::pow(b1, t));
    for (std::size_t i = 0; i < n; ++i) {
      m1[i] = b1 * m1[i] + (1 - b1) * grad_z[i];
      m2[i] = b2 * m2[i] + (1 - b2) * grad_z[i] * grad_z[i];
      z[i] -= step * corr * m1[i] / (std::sqrt(m2[i]) + eps);
    }
  }
  if (!converged) {
    double lo = kInf, hi = -kInf;
    for (double v : window) {
      if (v == kInf) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    converged = (hi - lo) <= std::max(cfg.tolerance, 1e-12);
  }

  // The objective value plateaus at double precision while mu is still only
  // accurate to ~sqrt(eps). When a tight tolerance is requested and the value
  // has flattened without the gradient test being met, finish with plain
  // gradient steps judged by gradient norm, which stays informative down to
  // the arithmetic floor. Skipped for oscillating (non-convex) problems.
  if (converged && cfg.tolerance < 1e-9 && !best_mu.empty()) {
    for (std::size_t i = 0; i < n; ++i) z[i] = std::log(best_mu[i]);
    eval(z, mu, &grad_z);
    double gnorm = 0;
    for (double g : grad_z) gnorm += g * g;
    gnorm = std::sqrt(gnorm);
    double ps = 0.25;
    std::vector<double> zb = z;
    double best_g = gnorm;
    for (int t = 0; t < 3000 && best_g > cfg.tolerance && ps > 1e-13; ++t) {
      for (std::size_t i = 0; i < n; ++i) z[i] = zb[i] - ps * grad_z[i];
      const double f = eval(z, mu, &grad_z);
      gnorm = 0;
      for (double g : grad_z) gnorm += g * g;
      gnorm = std::sqrt(gnorm);
      if (gnorm < best_g && f < best_f + 1e-12) {
        best_g = gnorm;
        zb = z;
        best_mu = mu;
        if (f < best_f) best_f = f;
        ps *= 1.5;
      } else {
        eval(zb, mu, &grad_z);
        ps *= 0.5;
      }
    }
  }

  InconsistencyResult res;
  res.value = best_f;
  res.converged = converged;
  res.iterations_used = used;
  res.mu_star.scope = ws.scope;
  res.mu_star.sizes = ws.sizes;
  res.mu_star.probs.assign(ws.domain_cells, 0.0);
  for (std::size_t i = 0; i < n; ++i) res.mu_star.probs[ws.feasible[i]] = best_mu[i];
  return res;
}

double ParamGrad::norm() const {
  double s = 0;
  for (const auto& v : by_arc)
    for (double g : v) s += g * g;
  return std::sqrt(s);
}

ParamGrad envelope_grad(const ParametricPDG& pdg, const Focus& focus, const JointTable& mu_star) {
  focus.validate(pdg);
  ParamGrad out;
  out.by_arc.resize(pdg.arcs.size());
  for (std::size_t i = 0; i < pdg.arcs.size(); ++i) {
    const Hyperarc& a = pdg.arcs[i];
    if (!(focus.chi[i] > 0) || !a.cpd.learnable()) continue;
    if (focus.beta[i] == 0) {  // arc absent from the masked objective
      out.by_arc[i].assign(a.cpd.params.size(), 0.0);
      continue;
    }
    bool in_scope = true;
    for (const auto& id : arc_scope(a)) {
      bool found = false;
      for (const auto& s : mu_star.scope) found |= (s == id);
      in_scope &= found;
    }
    if (!in_scope) {  // pruned away: its term does not appear
      out.by_arc[i].assign(a.cpd.params.size(), 0.0);
      continue;
    }

    const JointTable pair = marginal(mu_star, arc_scope(a));
    const std::size_t nt = pdg.n_target_configs(a);
    const std::size_t ns = pair.probs.size() / nt;
    const auto table = pdg.cpd_table(a);
    std::vector<double> src(ns, 0.0);
    for (std::size_t s = 0; s < ns; ++s)
      for (std::size_t t = 0; t < nt; ++t) src[s] += pair.probs[s * nt + t];

    // d/dtheta of -beta * sum_st m[st] log p_theta(t|s); softmax rows give
    // dlogp(t|s)/dlogit(s,t') = delta - p(t'|s).
    std::vector<double> row_grad(ns * nt, 0.0);
    for (std::size_t s = 0; s < ns; ++s)
      for (std::size_t t = 0; t < nt; ++t)
        row_grad[s * nt + t] =
            focus.beta[i] * (src[s] * table[s * nt + t] - pair.probs[s * nt + t]);

    if (a.cpd.kind == CpdKind::LearnableTable) {
      out.by_arc[i] = std::move(row_grad);
    } else {  // LinearSoftmax: chain through the fixed feature matrix
      const int f = a.cpd.feat_dim;
      std::vector<double> g(static_cast<std::size_t>(f) * nt, 0.0);
      for (std::size_t s = 0; s < ns; ++s)
        for (int k = 0; k < f; ++k)
          for (std::size_t t = 0; t < nt; ++t)
            g[static_cast<std::size_t>(k) * nt + t] +=
                a.cpd.features[s * static_cast<std::size_t>(f) + static_cast<std::size_t>(k)] *
                row_grad[s * nt + t];
      out.by_arc[i] = std::move(g);
    }
  }
  return out;
}

}  // namespace lir
