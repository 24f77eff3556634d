#include "lir/bp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "lir/engine.hpp"
#include "lir/inconsistency.hpp"

namespace lir {

namespace {

std::vector<double> normalized(std::vector<double> v) {
  double total = 0.0;
  for (double x : v) total += x;
  if (!(total > 0.0)) throw std::runtime_error("message lost all mass");
  for (double& x : v) x /= total;
  return v;
}

std::vector<double> log_of(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::log(std::max(v[i], 1e-300));
  return out;
}

Hyperarc pinned_arc(std::string id, std::vector<std::string> targets, std::vector<double> table) {
  Hyperarc a;
  a.id = std::move(id);
  a.targets = std::move(targets);
  a.cpd.kind = CpdKind::ConstantTable;
  a.cpd.params = std::move(table);
  a.cpd.default_params = a.cpd.params;
  return a;
}

/// One message rewrite as a local resolution problem: every pinned arc is a
/// distribution the update conditions on (full attention, no control), the
/// last arc holds the message and is fully controlled with zero structural
/// weight. At gamma = 1 the stationary point of that arc's table is exactly
/// the sum-product update.
std::vector<double> resolve_message(ParametricPDG pdg, const std::vector<double>& current) {
  Hyperarc& msg = pdg.arcs.back();
  msg.cpd.kind = CpdKind::LearnableTable;
  msg.cpd.params = log_of(current);
  msg.cpd.default_params = msg.cpd.params;
  msg.alpha = 0.0;

  Focus focus = Focus::full_attention(pdg, 1.0);
  focus.chi.assign(pdg.arcs.size(), 0.0);
  focus.chi.back() = std::numeric_limits<double>::infinity();

  OdeConfig ode;
  ode.outer_iters_per_step = 1;  // unused: no finite-chi arcs in the local problem
  ode.full_control_tolerance = 1e-11;

  lir_step(pdg, focus, ode, InnerSolverConfig::stationary());

  std::vector<double> out(msg.cpd.params.size());
  const double peak = *std::max_element(msg.cpd.params.begin(), msg.cpd.params.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(msg.cpd.params[i] - peak);
  return normalized(std::move(out));
}

std::vector<double> product_of_incoming(const FactorGraph& g, const MessageState& state, int var,
                                        int skip_factor) {
  std::vector<double> prod(g.variables[var].domain_size, 1.0);
  for (const auto& [f, slot] : g.incident(var)) {
    if (f == skip_factor) continue;
    const auto& m = state.from_factor[f][slot];
    for (std::size_t i = 0; i < prod.size(); ++i) prod[i] *= m[i];
  }
  return normalized(std::move(prod));
}

std::vector<double> reference_factor_to_var(const FactorGraph& g, const MessageState& state,
                                            int factor, int var) {
  const auto& f = g.factors[factor];
  const std::vector<int> sizes = g.scope_sizes(f);
  const int slot_x = static_cast<int>(std::find(f.scope.begin(), f.scope.end(),
                                                g.variables[var].id) -
                                      f.scope.begin());
  std::vector<double> out(sizes[slot_x], 0.0);
  std::vector<int> assign(sizes.size());
  for (std::size_t cell = 0; cell < f.table.size(); ++cell) {
    unravel_index(cell, sizes, assign);
    double w = f.table[cell];
    for (std::size_t s = 0; s < sizes.size(); ++s) {
      if (static_cast<int>(s) == slot_x) continue;
      w *= state.to_factor[factor][s][assign[s]];
    }
    out[assign[slot_x]] += w;
  }
  return normalized(std::move(out));
}

}  // namespace

int FactorGraph::var_index(const std::string& id) const {
  for (std::size_t i = 0; i < variables.size(); ++i)
    if (variables[i].id == id) return static_cast<int>(i);
  throw std::out_of_range("unknown variable: " + id);
}

std::vector<int> FactorGraph::scope_sizes(const Factor& f) const {
  std::vector<int> sizes;
  sizes.reserve(f.scope.size());
  for (const auto& id : f.scope) sizes.push_back(variables[var_index(id)].domain_size);
  return sizes;
}

std::vector<std::pair<int, int>> FactorGraph::incident(int var) const {
  std::vector<std::pair<int, int>> out;
  const std::string& id = variables[var].id;
  for (std::size_t f = 0; f < factors.size(); ++f)
    for (std::size_t slot = 0; slot < factors[f].scope.size(); ++slot)
      if (factors[f].scope[slot] == id) out.emplace_back(static_cast<int>(f), static_cast<int>(slot));
  return out;
}

void FactorGraph::validate() const {
  for (const auto& v : variables)
    if (v.domain_size < 1) throw std::invalid_argument("variable '" + v.id + "' has empty domain");
  for (const auto& f : factors) {
    std::size_t cells = 1;
    for (const auto& id : f.scope) cells *= variables[var_index(id)].domain_size;
    if (f.table.size() != cells)
      throw std::invalid_argument("factor '" + f.id + "' table size does not match its scope");
    for (double x : f.table)
      if (!(x > 1e-12))
        throw std::invalid_argument("factor '" + f.id + "' has a non-positive entry");
  }
}

MessageState MessageState::uniform(const FactorGraph& g) {
  MessageState s;
  s.to_factor.resize(g.factors.size());
  s.from_factor.resize(g.factors.size());
  for (std::size_t f = 0; f < g.factors.size(); ++f) {
    const auto sizes = g.scope_sizes(g.factors[f]);
    for (int n : sizes) {
      s.to_factor[f].push_back(std::vector<double>(n, 1.0 / n));
      s.from_factor[f].push_back(std::vector<double>(n, 1.0 / n));
    }
  }
  return s;
}

std::vector<BpFocusStep> flooding_schedule(const FactorGraph& g, int sweeps) {
  std::vector<BpFocusStep> out;
  for (int s = 0; s < sweeps; ++s) {
    for (std::size_t v = 0; v < g.variables.size(); ++v)
      for (const auto& [f, slot] : g.incident(static_cast<int>(v))) {
        (void)slot;
        out.push_back({BpFocusStep::Kind::VarToFactor, f, static_cast<int>(v)});
      }
    for (std::size_t f = 0; f < g.factors.size(); ++f)
      for (const auto& id : g.factors[f].scope)
        out.push_back({BpFocusStep::Kind::FactorToVar, static_cast<int>(f), g.var_index(id)});
  }
  for (std::size_t v = 0; v < g.variables.size(); ++v)
    out.push_back({BpFocusStep::Kind::Beliefs, -1, static_cast<int>(v)});
  return out;
}

MessageState bp_via_lir(const FactorGraph& g, const std::vector<BpFocusStep>& schedule,
                        MessageState state) {
  g.validate();
  for (const auto& step : schedule) {
    const Variable& xv = g.variables[step.var];
    if (step.kind == BpFocusStep::Kind::VarToFactor) {
      // Pin every other incident factor's message to X; the controlled table
      // settles on their product.
      ParametricPDG pdg;
      pdg.variables = {xv};
      const auto incident = g.incident(step.var);
      int slot_in_factor = -1;
      for (const auto& [f, slot] : incident) {
        if (f == step.factor) {
          slot_in_factor = slot;
          continue;
        }
        pdg.arcs.push_back(pinned_arc(g.factors[f].id + "->" + xv.id, {xv.id},
                                      normalized(state.from_factor[f][slot])));
      }
      pdg.arcs.push_back(pinned_arc("msg", {xv.id}, {}));
      state.to_factor[step.factor][slot_in_factor] =
          resolve_message(std::move(pdg), state.to_factor[step.factor][slot_in_factor]);
    } else if (step.kind == BpFocusStep::Kind::FactorToVar) {
      // Pin the factor itself (as a joint over its scope) plus the incoming
      // messages on the other slots; the controlled table over X settles on
      // the marginalized product.
      const auto& f = g.factors[step.factor];
      ParametricPDG pdg;
      int slot_x = -1;
      for (std::size_t s = 0; s < f.scope.size(); ++s) {
        pdg.variables.push_back(g.variables[g.var_index(f.scope[s])]);
        if (f.scope[s] == xv.id) slot_x = static_cast<int>(s);
      }
      pdg.arcs.push_back(pinned_arc(f.id, f.scope, normalized(f.table)));
      for (std::size_t s = 0; s < f.scope.size(); ++s) {
        if (static_cast<int>(s) == slot_x) continue;
        pdg.arcs.push_back(pinned_arc(f.scope[s] + "->" + f.id, {f.scope[s]},
                                      normalized(state.to_factor[step.factor][s])));
      }
      pdg.arcs.push_back(pinned_arc("msg", {xv.id}, {}));
      state.from_factor[step.factor][slot_x] =
          resolve_message(std::move(pdg), state.from_factor[step.factor][slot_x]);
    } else {
      ParametricPDG pdg;
      pdg.variables = {xv};
      for (const auto& [f, slot] : g.incident(step.var))
        pdg.arcs.push_back(pinned_arc(g.factors[f].id + "->" + xv.id, {xv.id},
                                      normalized(state.from_factor[f][slot])));
      pdg.arcs.push_back(pinned_arc("belief", {xv.id}, {}));
      if (state.beliefs.empty()) state.beliefs.resize(g.variables.size());
      std::vector<double> prior(xv.domain_size, 1.0 / xv.domain_size);
      state.beliefs[step.var] = resolve_message(std::move(pdg), prior);
    }
  }
  return state;
}

MessageState bp_via_lir(const FactorGraph& g, const std::vector<BpFocusStep>& schedule) {
  return bp_via_lir(g, schedule, MessageState::uniform(g));
}

MessageState bp_reference(const FactorGraph& g, const std::vector<BpFocusStep>& schedule,
                          MessageState state) {
  g.validate();
  for (const auto& step : schedule) {
    if (step.kind == BpFocusStep::Kind::VarToFactor) {
      for (const auto& [f, slot] : g.incident(step.var))
        if (f == step.factor)
          state.to_factor[f][slot] = product_of_incoming(g, state, step.var, step.factor);
    } else if (step.kind == BpFocusStep::Kind::FactorToVar) {
      const auto& f = g.factors[step.factor];
      for (std::size_t s = 0; s < f.scope.size(); ++s)
        if (f.scope[s] == g.variables[step.var].id)
          state.from_factor[step.factor][s] =
              reference_factor_to_var(g, state, step.factor, step.var);
    } else {
      if (state.beliefs.empty()) state.beliefs.resize(g.variables.size());
      state.beliefs[step.var] = product_of_incoming(g, state, step.var, -1);
    }
  }
  return state;
}

MessageState bp_reference(const FactorGraph& g, const std::vector<BpFocusStep>& schedule) {
  return bp_reference(g, schedule, MessageState::uniform(g));
}

std::vector<std::vector<double>> beliefs_from_messages(const FactorGraph& g,
                                                       const MessageState& state) {
  std::vector<std::vector<double>> out(g.variables.size());
  for (std::size_t v = 0; v < g.variables.size(); ++v)
    out[v] = product_of_incoming(g, state, static_cast<int>(v), -1);
  return out;
}

std::vector<std::vector<double>> brute_force_marginals(const FactorGraph& g) {
  g.validate();
  std::vector<int> sizes;
  for (const auto& v : g.variables) sizes.push_back(v.domain_size);
  std::size_t cells = 1;
  for (int n : sizes) cells *= n;

  std::vector<std::vector<double>> out;
  for (const auto& v : g.variables) out.push_back(std::vector<double>(v.domain_size, 0.0));

  std::vector<int> assign(sizes.size());
  double total = 0.0;
  for (std::size_t cell = 0; cell < cells; ++cell) {
    unravel_index(cell, sizes, assign);
    double w = 1.0;
    for (const auto& f : g.factors) {
      const auto fsizes = g.scope_sizes(f);
      std::vector<int> sub(f.scope.size());
      for (std::size_t s = 0; s < f.scope.size(); ++s) sub[s] = assign[g.var_index(f.scope[s])];
      w *= f.table[joint_index(fsizes, sub)];
    }
    total += w;
    for (std::size_t v = 0; v < sizes.size(); ++v) out[v][assign[v]] += w;
  }
  for (auto& m : out)
    for (double& x : m) x /= total;
  return out;
}

}  // namespace lir
