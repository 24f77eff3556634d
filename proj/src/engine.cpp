#include "lir/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace lir {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kFullControlCap = 400;

bool scope_has(const JointTable& mu, const std::string& id) {
  for (const auto& s : mu.scope)
    if (s == id) return true;
  return false;
}

bool arc_in_scope(const Hyperarc& a, const JointTable& mu) {
  for (const auto& id : a.sources)
    if (!scope_has(mu, id)) return false;
  for (const auto& id : a.targets)
    if (!scope_has(mu, id)) return false;
  return true;
}

/// Per-parameter rate multipliers for one arc: scalar chi unless overridden.
std::vector<double> chi_per_param(const Focus& focus, int arc_idx, std::size_t n_params) {
  auto it = focus.chi_override.find(arc_idx);
  if (it != focus.chi_override.end()) return it->second;
  return std::vector<double>(n_params, focus.chi[static_cast<std::size_t>(arc_idx)]);
}

void apply_adam(OptimizerState& state, int arc_idx, std::vector<double>& params,
                const std::vector<double>& grad, const std::vector<double>& rate) {
  auto& slot = state.slots[arc_idx];
  if (slot.m1.size() != params.size()) {
    slot.m1.assign(params.size(), 0.0);
    slot.m2.assign(params.size(), 0.0);
    slot.t = 0;
  }
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++slot.t;
  const double corr =
      std::sqrt(1.0 - std::pow(b2, slot.t)) / (1.0 - std::pow(b1, static_cast<double>(slot.t)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    slot.m1[i] = b1 * slot.m1[i] + (1 - b1) * grad[i];
    slot.m2[i] = b2 * slot.m2[i] + (1 - b2) * grad[i] * grad[i];
    params[i] -= rate[i] * corr * slot.m1[i] / (std::sqrt(slot.m2[i]) + eps);
  }
}

/// Closed-form minimizer of the arc's data term at fixed mu: cpd <- mu(Tgt|Src).
void assign_conditional(ParametricPDG& pdg, std::size_t arc_idx, const JointTable& mu) {
  Hyperarc& a = pdg.arcs[arc_idx];
  const auto table = conditional(mu, a.targets, a.sources);
  a.cpd.params.resize(table.size());
  for (std::size_t i = 0; i < table.size(); ++i)
    a.cpd.params[i] = std::log(std::max(table[i], 1e-300));
}

double grad_norm_over(const ParamGrad& g, const std::vector<std::size_t>& arcs) {
  double s = 0;
  for (std::size_t i : arcs)
    for (double v : g.by_arc[i]) s += v * v;
  return std::sqrt(s);
}

}  // namespace

StepRecord lir_step(ParametricPDG& pdg, const Focus& focus, const OdeConfig& ode,
                    const InnerSolverConfig& inner, OptimizerState* state,
                    const JointTable* warm, bool timings) {
  focus.validate(pdg);
  if (ode.outer_iters_per_step < 1)
    throw std::invalid_argument("lir_step: outer_iters_per_step must be >= 1");
  if (!(ode.step_scale > 0)) throw std::invalid_argument("lir_step: step_scale must be positive");

  const auto t0 = std::chrono::steady_clock::now();
  StepRecord rec;
  rec.focus = focus;

  std::vector<std::size_t> finite_arcs, full_control_arcs;
  for (std::size_t i = 0; i < pdg.arcs.size(); ++i) {
    if (!pdg.arcs[i].cpd.learnable()) continue;
    const double chi = focus.chi[i];
    if (chi == kInf)
      full_control_arcs.push_back(i);
    else if (chi > 0 || focus.chi_override.count(static_cast<int>(i)))
      finite_arcs.push_back(i);
  }

  OptimizerState local_state;
  OptimizerState& opt = state ? *state : local_state;

  InnerSolverConfig cfg = inner;
  if (warm && !warm->probs.empty()) cfg.warm_start = *warm;

  auto solve = [&]() {
    InconsistencyResult res = solve_inconsistency(pdg, focus, cfg);
    rec.inner_iterations += res.iterations_used;
    cfg.warm_start = res.mu_star;
    return res;
  };

  if (finite_arcs.empty() && full_control_arcs.empty()) {
    const InconsistencyResult res = solve();
    rec.value = res.value;
    rec.mu_star = res.mu_star;
    rec.ok = std::isfinite(res.value);
  } else {
    // Finite-chi arcs: outer_iters_per_step rounds of (solve, envelope update).
    for (int round = 0; round < ode.outer_iters_per_step && !finite_arcs.empty(); ++round) {
      if (ode.integrator == Integrator::RK4) {
        // Classic RK4 on the gradient field theta' = -g(theta), one step of
        // size step_scale * chi per round. Each stage re-solves mu*.
        std::map<std::size_t, std::vector<double>> theta0, k1, k2, k3, k4;
        for (std::size_t i : finite_arcs) theta0[i] = pdg.arcs[i].cpd.params;
        auto field = [&](std::map<std::size_t, std::vector<double>>& out) {
          const InconsistencyResult res = solve();
          const ParamGrad g = envelope_grad(pdg, focus, res.mu_star);
          for (std::size_t i : finite_arcs) {
            out[i] = g.by_arc[i].empty() ? std::vector<double>(theta0[i].size(), 0.0)
                                         : g.by_arc[i];
            for (double& v : out[i]) v = -v;
          }
        };
        auto move_to = [&](const std::map<std::size_t, std::vector<double>>& k, double frac) {
          for (std::size_t i : finite_arcs) {
            const auto rate = chi_per_param(focus, static_cast<int>(i), theta0[i].size());
            auto& p = pdg.arcs[i].cpd.params;
            p = theta0[i];
            const auto& ki = k.at(i);
            for (std::size_t j = 0; j < p.size(); ++j)
              p[j] += frac * ode.step_scale * rate[j] * ki[j];
          }
        };
        field(k1);
        move_to(k1, 0.5);
        field(k2);
        move_to(k2, 0.5);
        field(k3);
        move_to(k3, 1.0);
        field(k4);
        for (std::size_t i : finite_arcs) {
          const auto rate = chi_per_param(focus, static_cast<int>(i), theta0[i].size());
          auto& p = pdg.arcs[i].cpd.params;
          p = theta0[i];
          for (std::size_t j = 0; j < p.size(); ++j)
            p[j] += ode.step_scale * rate[j] / 6.0 *
                    (k1[i][j] + 2 * k2[i][j] + 2 * k3[i][j] + k4[i][j]);
        }
      } else {
        const InconsistencyResult res = solve();
        const ParamGrad g = envelope_grad(pdg, focus, res.mu_star);
        for (std::size_t i : finite_arcs) {
          if (g.by_arc[i].empty()) continue;
          auto& p = pdg.arcs[i].cpd.params;
          auto rate = chi_per_param(focus, static_cast<int>(i), p.size());
          for (double& r : rate) r *= ode.step_scale;
          if (ode.integrator == Integrator::Euler) {
            for (std::size_t j = 0; j < p.size(); ++j) p[j] -= rate[j] * g.by_arc[i][j];
          } else {
            apply_adam(opt, static_cast<int>(i), p, g.by_arc[i], rate);
          }
        }
      }
    }

    // Full-control arcs: alternate inner solves with the per-arc closed-form
    // assignment (or descent for parameterizations without one) until the
    // masked objective is stationary in those parameters.
    if (!full_control_arcs.empty()) {
      OptimizerState fc_state;
      for (int it = 0; it < kFullControlCap; ++it) {
        const InconsistencyResult res = solve();
        const ParamGrad g = envelope_grad(pdg, focus, res.mu_star);
        if (grad_norm_over(g, full_control_arcs) < ode.full_control_tolerance) break;
        for (std::size_t i : full_control_arcs) {
          if (pdg.arcs[i].cpd.kind == CpdKind::LearnableTable && focus.beta[i] > 0 &&
              arc_in_scope(pdg.arcs[i], res.mu_star)) {
            assign_conditional(pdg, i, res.mu_star);
          } else if (!g.by_arc[i].empty()) {
            auto& p = pdg.arcs[i].cpd.params;
            apply_adam(fc_state, static_cast<int>(i), p,
                       g.by_arc[i], std::vector<double>(p.size(), ode.step_scale));
          }
        }
      }
    }

    const InconsistencyResult res = solve();
    rec.value = res.value;
    rec.mu_star = res.mu_star;
    rec.ok = std::isfinite(res.value);
  }

  rec.param_hash = parameter_hash(pdg);
  if (timings)
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

RefocusStrategy parse_strategy(const std::string& name, std::uint64_t seed) {
  RefocusStrategy s;
  s.seed = seed;
  if (name == "uniform")
    s.kind = RefocusStrategy::Kind::Uniform;
  else if (name == "partial")
    s.kind = RefocusStrategy::Kind::Partial;
  else if (name == "hub")
    s.kind = RefocusStrategy::Kind::Hub;
  else if (name == "smooth")
    s.kind = RefocusStrategy::Kind::SmoothExponential;
  else
    throw std::invalid_argument("unknown strategy '" + name +
                                "' (expected uniform, partial, hub, or smooth)");
  return s;
}

RefocusStream::RefocusStream(RefocusStrategy strategy, const ParametricPDG& pdg)
    : strategy_(std::move(strategy)), pdg_(&pdg), root_(strategy_.seed) {
  if (pdg.arcs.empty()) throw std::invalid_argument("refocus: pdg has no arcs");
  if (strategy_.kind == RefocusStrategy::Kind::Partial &&
      !(strategy_.fraction > 0 && strategy_.fraction <= 1))
    throw std::invalid_argument("refocus: Partial fraction must lie in (0, 1]");
  if (strategy_.kind == RefocusStrategy::Kind::FixedCycle && strategy_.cycle.empty())
    throw std::invalid_argument("refocus: FixedCycle needs at least one focus");
  if (strategy_.kind == RefocusStrategy::Kind::Custom && !strategy_.custom)
    throw std::invalid_argument("refocus: Custom needs a callback");
}

Focus RefocusStream::next() {
  const int t = step_++;
  const ParametricPDG& pdg = *pdg_;
  const std::size_t m = pdg.arcs.size();

  if (strategy_.kind == RefocusStrategy::Kind::FixedCycle)
    return strategy_.cycle[static_cast<std::size_t>(t) % strategy_.cycle.size()];
  if (strategy_.kind == RefocusStrategy::Kind::Custom) return strategy_.custom(t, pdg);

  Focus f = Focus::full_attention(pdg, strategy_.gamma);
  f.chi.assign(m, 1.0);
  Rng rng = root_.split(static_cast<std::uint64_t>(t));

  switch (strategy_.kind) {
    case RefocusStrategy::Kind::Uniform:
      for (std::size_t i = 0; i < m; ++i) f.beta[i] = 1.0;
      break;
    case RefocusStrategy::Kind::Partial: {
      const int k = std::max(1, static_cast<int>(std::floor(strategy_.fraction *
                                                            static_cast<double>(m))));
      std::fill(f.beta.begin(), f.beta.end(), 0.0);
      for (int i : rng.sample_without_replacement(static_cast<int>(m), k))
        f.beta[static_cast<std::size_t>(i)] = 1.0;
      break;
    }
    case RefocusStrategy::Kind::Hub: {
      std::vector<std::string> incident;
      for (const auto& v : pdg.variables) {
        bool touched = false;
        for (const auto& a : pdg.arcs) {
          for (const auto& s : a.sources) touched |= (s == v.id);
          for (const auto& tg : a.targets) touched |= (tg == v.id);
        }
        if (touched) incident.push_back(v.id);
      }
      const std::string hub = incident[static_cast<std::size_t>(
          rng.next_int(static_cast<int>(incident.size())))];
      for (std::size_t i = 0; i < m; ++i) {
        bool touches = false;
        for (const auto& s : pdg.arcs[i].sources) touches |= (s == hub);
        for (const auto& tg : pdg.arcs[i].targets) touches |= (tg == hub);
        f.beta[i] = touches ? 1.0 : 0.0;
      }
      break;
    }
    case RefocusStrategy::Kind::SmoothExponential:
      for (std::size_t i = 0; i < m; ++i) f.beta[i] = rng.next_exp(strategy_.rate);
      break;
    default: break;
  }
  return f;
}

RefocusStream make_refocus(const RefocusStrategy& strategy, const ParametricPDG& pdg) {
  return RefocusStream(strategy, pdg);
}

LirTrace lir_run(ParametricPDG& pdg, const RefocusStrategy& strategy, const LirRunConfig& cfg) {
  if (cfg.steps < 1) throw std::invalid_argument("lir_run: steps must be >= 1");
  pdg.reset_parameters();

  LirTrace trace;
  const Focus full = Focus::full_attention(pdg, strategy.gamma);
  {
    const InconsistencyResult init = solve_inconsistency(pdg, full, cfg.initial_solve);
    trace.initial_value = init.value;
    trace.mu_initial = init.mu_star;
  }

  RefocusStream stream = make_refocus(strategy, pdg);
  OptimizerState opt;
  JointTable last_mu = trace.mu_initial;
  int consecutive_failures = 0;

  for (int t = 0; t < cfg.steps; ++t) {
    const Focus focus = stream.next();
    StepRecord rec;
    try {
      rec = lir_step(pdg, focus, cfg.ode, cfg.inner, &opt, &last_mu, cfg.timings);
    } catch (const std::exception&) {
      rec.focus = focus;
      rec.ok = false;
      rec.value = std::numeric_limits<double>::quiet_NaN();
    }
    if (rec.ok && !rec.mu_star.probs.empty()) last_mu = rec.mu_star;
    trace.steps.push_back(std::move(rec));
    consecutive_failures = trace.steps.back().ok ? 0 : consecutive_failures + 1;
    if (consecutive_failures >= cfg.max_consecutive_failures) {
      trace.aborted = true;
      break;
    }
  }

  const InconsistencyResult fin = solve_inconsistency(pdg, full, cfg.final_solve);
  trace.final_value = fin.value;
  trace.mu_final = fin.mu_star;
  return trace;
}

double resolution_percentage(const LirTrace& trace) {
  if (trace.initial_value == 0)
    throw std::invalid_argument("resolution_percentage: undefined for initial value 0");
  return 100.0 * (trace.initial_value - trace.final_value) / trace.initial_value;
}

double tv_distortion(const JointTable& a, const JointTable& b) {
  if (a.scope.size() != b.scope.size())
    throw std::invalid_argument("tv_distortion: scopes differ");
  const JointTable aligned = marginal(b, a.scope);  // errors on unknown variables
  double s = 0;
  for (std::size_t i = 0; i < a.probs.size(); ++i) s += std::abs(a.probs[i] - aligned.probs[i]);
  return 0.5 * s;
}

}  // namespace lir
