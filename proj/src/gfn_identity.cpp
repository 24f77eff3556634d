#include "lir/gfn_identity.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace lir {

namespace {

std::vector<double> log_softmax(const std::vector<double>& logits) {
  if (logits.empty()) return {};
  const double peak = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - peak);
  const double log_z = peak + std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - log_z;
  return out;
}

/// Forward log-policy at state s over (out edges..., terminate?).
std::vector<double> forward_log_policy(const GfnDag& dag, const GfnPolicies& pol, int s) {
  const std::size_t want = dag.out_edges(s).size() + (dag.can_terminate[s] ? 1 : 0);
  if (pol.forward.size() != static_cast<std::size_t>(dag.n_states) ||
      pol.forward[s].size() != want)
    throw std::invalid_argument("forward logits do not match state " + std::to_string(s));
  return log_softmax(pol.forward[s]);
}

/// log P_B(parent-slot | s); uniform over parents when no logits are given.
std::vector<double> backward_log_policy(const GfnDag& dag, const GfnPolicies& pol, int s) {
  const auto in = dag.in_edges(s);
  if (pol.backward.empty() || pol.backward[s].empty())
    return std::vector<double>(in.size(), -std::log(static_cast<double>(in.size())));
  if (pol.backward.size() != static_cast<std::size_t>(dag.n_states) ||
      pol.backward[s].size() != in.size())
    throw std::invalid_argument("backward logits do not match state " + std::to_string(s));
  return log_softmax(pol.backward[s]);
}

int slot_of_edge(const std::vector<int>& edge_list, int edge) {
  const auto it = std::find(edge_list.begin(), edge_list.end(), edge);
  return static_cast<int>(it - edge_list.begin());
}

int edge_between(const GfnDag& dag, int from, int to) {
  for (std::size_t e = 0; e < dag.edges.size(); ++e)
    if (dag.edges[e].first == from && dag.edges[e].second == to) return static_cast<int>(e);
  throw std::logic_error("trajectory uses a missing edge");
}

}  // namespace

std::vector<int> GfnDag::out_edges(int s) const {
  std::vector<int> out;
  for (std::size_t e = 0; e < edges.size(); ++e)
    if (edges[e].first == s) out.push_back(static_cast<int>(e));
  return out;
}

std::vector<int> GfnDag::in_edges(int s) const {
  std::vector<int> in;
  for (std::size_t e = 0; e < edges.size(); ++e)
    if (edges[e].second == s) in.push_back(static_cast<int>(e));
  return in;
}

void GfnDag::validate() const {
  if (n_states < 1) throw std::invalid_argument("dag needs at least one state");
  if (start < 0 || start >= n_states) throw std::invalid_argument("start state out of range");
  if (can_terminate.size() != static_cast<std::size_t>(n_states) ||
      reward.size() != static_cast<std::size_t>(n_states))
    throw std::invalid_argument("can_terminate and reward must cover all states");
  for (const auto& [from, to] : edges) {
    if (from < 0 || from >= n_states || to < 0 || to >= n_states)
      throw std::invalid_argument("edge endpoint out of range");
    if (from == to) throw std::invalid_argument("self loops are not allowed");
  }
  for (int s = 0; s < n_states; ++s)
    if (can_terminate[s] && !(reward[s] > 0.0))
      throw std::invalid_argument("terminating state " + std::to_string(s) +
                                  " needs a positive reward");

  // Kahn's algorithm: cycles leave states unprocessed.
  std::vector<int> indegree(n_states, 0);
  for (const auto& [from, to] : edges) {
    (void)from;
    ++indegree[to];
  }
  std::vector<int> queue;
  for (int s = 0; s < n_states; ++s)
    if (indegree[s] == 0) queue.push_back(s);
  int seen = 0;
  while (!queue.empty()) {
    const int s = queue.back();
    queue.pop_back();
    ++seen;
    for (int e : out_edges(s))
      if (--indegree[edges[e].second] == 0) queue.push_back(edges[e].second);
  }
  if (seen != n_states) throw std::invalid_argument("graph has a cycle");

  // Every reachable dead end must be able to terminate.
  std::vector<char> reachable(n_states, 0);
  std::function<void(int)> visit = [&](int s) {
    if (reachable[s]) return;
    reachable[s] = 1;
    for (int e : out_edges(s)) visit(edges[e].second);
  };
  visit(start);
  for (int s = 0; s < n_states; ++s)
    if (reachable[s] && out_edges(s).empty() && !can_terminate[s])
      throw std::invalid_argument("state " + std::to_string(s) +
                                  " is a reachable dead end that cannot terminate");
}

std::vector<std::vector<int>> enumerate_trajectories(const GfnDag& dag, std::size_t cap) {
  dag.validate();
  std::vector<std::vector<int>> out;
  std::vector<int> path = {dag.start};
  std::function<void()> walk = [&]() {
    const int s = path.back();
    if (dag.can_terminate[s]) {
      if (out.size() >= cap) throw std::runtime_error("too many trajectories to enumerate");
      out.push_back(path);
    }
    for (int e : dag.out_edges(s)) {
      path.push_back(dag.edges[e].second);
      walk();
      path.pop_back();
    }
  };
  walk();
  return out;
}

GfnIdentityCheck gfn_identity_check(const GfnDag& dag, const GfnPolicies& pol,
                                    const std::vector<double>& q) {
  const auto trajectories = enumerate_trajectories(dag);
  if (q.size() != trajectories.size())
    throw std::invalid_argument("q must weight each of the " +
                                std::to_string(trajectories.size()) + " trajectories");
  double total = 0.0;
  for (std::size_t t = 0; t < q.size(); ++t) {
    if (!(q[t] > 0.0))
      throw std::invalid_argument("trajectory " + std::to_string(t) +
                                  " has zero probability under Q");
    total += q[t];
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("q must sum to 1");

  // Flattened forward-logit parameter layout.
  std::vector<std::size_t> param_base(dag.n_states, 0);
  std::size_t n_params = 0;
  for (int s = 0; s < dag.n_states; ++s) {
    param_base[s] = n_params;
    n_params += dag.out_edges(s).size() + (dag.can_terminate[s] ? 1 : 0);
  }

  std::vector<std::vector<double>> fwd_log(dag.n_states), bwd_log(dag.n_states);
  for (int s = 0; s < dag.n_states; ++s) {
    fwd_log[s] = forward_log_policy(dag, pol, s);
    bwd_log[s] = backward_log_policy(dag, pol, s);
  }

  GfnIdentityCheck out;
  out.grad_numeric.assign(n_params, 0.0);
  out.grad_modtb.assign(n_params, 0.0);

  for (std::size_t t = 0; t < trajectories.size(); ++t) {
    const auto& traj = trajectories[t];
    const int x = traj.back();
    const int steps = static_cast<int>(traj.size());  // includes the terminate move

    // Per-step log factors: forward policy along the path plus terminate,
    // backward policy along the path plus the reward sink row R(x)/Z.
    std::vector<double> step_f(steps), step_b(steps);
    std::vector<std::pair<int, int>> step_param(steps);  // (state, action slot)
    for (int i = 0; i + 1 < steps; ++i) {
      const int s = traj[i], nxt = traj[i + 1];
      const int e = edge_between(dag, s, nxt);
      const int slot = slot_of_edge(dag.out_edges(s), e);
      step_f[i] = fwd_log[s][slot];
      step_param[i] = {s, slot};
      step_b[i] = bwd_log[nxt][slot_of_edge(dag.in_edges(nxt), e)];
    }
    const int term_slot = static_cast<int>(dag.out_edges(x).size());
    step_f[steps - 1] = fwd_log[x][term_slot];
    step_param[steps - 1] = {x, term_slot};
    step_b[steps - 1] = std::log(dag.reward[x]) - pol.log_z;

    double a = 0.0, b = 0.0;
    for (int i = 0; i < steps; ++i) {
      a += step_f[i];
      b += step_b[i];
    }
    const double score = a - b;  // log( P_F(tau) Z / (R(x) P_B(tau|x)) )

    // Inconsistency contribution: per (tau, i) the forward arc is weighted by
    // the excess surprisal -score and penalized -log P_F of the step taken;
    // the backward arc mirrors it.
    for (int i = 0; i < steps; ++i)
      out.numeric += q[t] / steps * ((-score) * (-step_f[i]) + score * (-step_b[i]));
    out.modtb += q[t] * score * score / steps;

    // Frozen-attention gradient of the numeric side, and the direct gradient
    // of the loss. d log P_F(slot|s) / d logit_j = 1{j = slot} - pi_j.
    for (int i = 0; i < steps; ++i) {
      const auto [s, slot] = step_param[i];
      const auto& lp = fwd_log[s];
      for (std::size_t j = 0; j < lp.size(); ++j) {
        const double dlog = (static_cast<int>(j) == slot ? 1.0 : 0.0) - std::exp(lp[j]);
        out.grad_numeric[param_base[s] + j] += q[t] / steps * score * dlog;
        out.grad_modtb[param_base[s] + j] += q[t] / steps * 2.0 * score * dlog;
      }
    }
  }

  double dot = 0.0, n1 = 0.0, n2 = 0.0;
  for (std::size_t p = 0; p < n_params; ++p) {
    dot += out.grad_numeric[p] * out.grad_modtb[p];
    n1 += out.grad_numeric[p] * out.grad_numeric[p];
    n2 += out.grad_modtb[p] * out.grad_modtb[p];
  }
  out.cosine = (n1 > 0 && n2 > 0) ? dot / std::sqrt(n1 * n2) : 1.0;
  return out;
}

GfnPolicies balanced_policies(const GfnDag& dag) {
  dag.validate();

  // Flows by memoized descent: F(s) = R(s) + sum over children of
  // F(child) * P_B(s | child), with uniform backward.
  std::vector<double> flow(dag.n_states, -1.0);
  std::function<double(int)> f = [&](int s) -> double {
    if (flow[s] >= 0.0) return flow[s];
    double total = dag.can_terminate[s] ? dag.reward[s] : 0.0;
    for (int e : dag.out_edges(s)) {
      const int child = dag.edges[e].second;
      total += f(child) / static_cast<double>(dag.in_edges(child).size());
    }
    return flow[s] = total;
  };

  GfnPolicies pol;
  pol.forward.resize(dag.n_states);
  pol.backward.resize(dag.n_states);
  for (int s = 0; s < dag.n_states; ++s) {
    const auto out = dag.out_edges(s);
    std::vector<double> logits;
    for (int e : out) {
      const int child = dag.edges[e].second;
      logits.push_back(std::log(f(child) / static_cast<double>(dag.in_edges(child).size())));
    }
    if (dag.can_terminate[s]) logits.push_back(std::log(dag.reward[s]));
    // Softmax of log-masses reproduces P_F(.|s) without needing log F(s).
    pol.forward[s] = std::move(logits);
  }
  pol.log_z = std::log(f(dag.start));
  return pol;
}

}  // namespace lir
