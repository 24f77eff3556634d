#include "lir/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>

#ifdef LIR_HAVE_OPENMP
#include <omp.h>
#endif

namespace lir::kernels {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double xlogx(double x) { return x > 0 ? x * std::log(x) : 0.0; }

// Accumulates the pair and source marginals of one arc from cell masses.
void project_arc(const ArcSlot& a, const double* mu, std::size_t n_cells, double* pair,
                 double* src) {
  std::fill(pair, pair + a.n_src * a.n_tgt, 0.0);
  for (std::size_t c = 0; c < n_cells; ++c) pair[a.cell_to_pair[c]] += mu[c];
  std::fill(src, src + a.n_src, 0.0);
  for (std::size_t s = 0; s < a.n_src; ++s)
    for (std::size_t t = 0; t < a.n_tgt; ++t) src[s] += pair[s * a.n_tgt + t];
}

// Shared epilogue once arc projections are known. Computes the value and the
// per-pair gradient coefficients:
//   coef_a[st] = (beta_a - gamma*alpha_a) * (log m[st] - log ms[s]) - beta_a * logp_a[st]
// so that dF/dmu_c = sum_a coef_a[pair(c)] + gamma * (1 + log mu_c).
double assemble(const Workspace& ws, const std::vector<std::vector<double>>& pairs,
                const std::vector<std::vector<double>>& srcs, double neg_entropy,
                std::vector<std::vector<double>>& coefs) {
  double value = ws.gamma * neg_entropy;
  coefs.resize(ws.arcs.size());
  for (std::size_t ai = 0; ai < ws.arcs.size(); ++ai) {
    const ArcSlot& a = ws.arcs[ai];
    const auto& m = pairs[ai];
    const auto& ms = srcs[ai];
    const double w = a.beta - ws.gamma * a.alpha;
    double cond_neg_entropy = 0;  // sum m log m - sum ms log ms
    double cross = 0;             // sum m log p
    auto& coef = coefs[ai];
    coef.assign(a.n_src * a.n_tgt, 0.0);
    for (std::size_t s = 0; s < a.n_src; ++s) {
      const double log_ms = ms[s] > 0 ? std::log(ms[s]) : 0.0;
      cond_neg_entropy -= xlogx(ms[s]);
      for (std::size_t t = 0; t < a.n_tgt; ++t) {
        const std::size_t st = s * a.n_tgt + t;
        cond_neg_entropy += xlogx(m[st]);
        if (m[st] > 0) cross += m[st] * a.logp[st];
        const double log_cond = m[st] > 0 ? std::log(m[st]) - log_ms : 0.0;
        coef[st] = w * log_cond - a.beta * (a.logp[st] == kNegInf ? 0.0 : a.logp[st]);
      }
    }
    value += w * cond_neg_entropy - a.beta * cross;
  }
  return value;
}

int env_thread_cap() {
  const char* s = std::getenv("LIRLAB_THREADS");
  if (!s) return 0;
  int v = std::atoi(s);
  return v > 0 ? v : 0;
}

}  // namespace

int thread_budget() {
#ifdef LIR_HAVE_OPENMP
  int n = omp_get_max_threads();
#else
  int n = 1;
#endif
  const int cap = env_thread_cap();
  if (cap > 0 && cap < n) n = cap;
  return std::max(1, n);
}

Workspace build_workspace(const ParametricPDG& pdg, const Focus& focus) {
  focus.validate(pdg);

  // Retained arcs and variables.
  std::vector<int> keep;
  for (std::size_t i = 0; i < pdg.arcs.size(); ++i)
    if (focus.beta[i] != 0.0 || focus.gamma * focus.alpha[i] != 0.0) keep.push_back(static_cast<int>(i));

  Workspace ws;
  ws.gamma = focus.gamma;
  for (const auto& v : pdg.variables) {
    bool touched = false;
    for (int i : keep) {
      const auto& a = pdg.arcs[i];
      touched = std::find(a.sources.begin(), a.sources.end(), v.id) != a.sources.end() ||
                std::find(a.targets.begin(), a.targets.end(), v.id) != a.targets.end();
      if (touched) break;
    }
    if (touched) {
      ws.scope.push_back(v.id);
      ws.sizes.push_back(v.domain_size);
    }
  }
  if (ws.scope.empty())
    throw std::invalid_argument("focus retains no arcs; nothing to solve");

  std::size_t n_cells = 1;
  for (int s : ws.sizes) n_cells *= static_cast<std::size_t>(s);
  ws.domain_cells = n_cells;

  auto scope_pos = [&ws](const std::string& id) {
    for (std::size_t i = 0; i < ws.scope.size(); ++i)
      if (ws.scope[i] == id) return i;
    throw std::logic_error("pruned variable referenced");
  };

  // Pair index of every full-domain cell, per arc.
  std::vector<std::vector<std::int32_t>> full_maps(keep.size());
  std::vector<std::size_t> strides(ws.sizes.size(), 1);
  for (std::size_t i = ws.sizes.size(); i-- > 1;)
    strides[i - 1] = strides[i] * static_cast<std::size_t>(ws.sizes[i]);

  for (std::size_t ki = 0; ki < keep.size(); ++ki) {
    const Hyperarc& a = pdg.arcs[keep[ki]];
    ArcSlot slot;
    slot.arc_index = keep[ki];
    slot.beta = focus.beta[keep[ki]];
    slot.alpha = focus.alpha[keep[ki]];
    slot.n_src = pdg.n_source_configs(a);
    slot.n_tgt = pdg.n_target_configs(a);
    if (focus.gamma * slot.alpha > 0 && slot.beta < focus.gamma * slot.alpha)
      throw std::invalid_argument("arc '" + a.id + "': beta < gamma*alpha is outside the "
                                  "convex regime and has no assigned semantics");

    const auto table = pdg.cpd_table(a);
    slot.logp.resize(table.size());
    for (std::size_t i = 0; i < table.size(); ++i)
      slot.logp[i] = table[i] > 0 ? std::log(table[i]) : kNegInf;

    auto& map = full_maps[ki];
    map.resize(n_cells);
    for (std::size_t c = 0; c < n_cells; ++c) {
      std::size_t s_idx = 0, t_idx = 0;
      for (const auto& sv : a.sources) {
        const std::size_t p = scope_pos(sv);
        s_idx = s_idx * static_cast<std::size_t>(ws.sizes[p]) +
                (c / strides[p]) % static_cast<std::size_t>(ws.sizes[p]);
      }
      for (const auto& tv : a.targets) {
        const std::size_t p = scope_pos(tv);
        t_idx = t_idx * static_cast<std::size_t>(ws.sizes[p]) +
                (c / strides[p]) % static_cast<std::size_t>(ws.sizes[p]);
      }
      map[c] = static_cast<std::int32_t>(s_idx * slot.n_tgt + t_idx);
    }
    ws.arcs.push_back(std::move(slot));
  }

  // Zero-support mask: a cell is infeasible when a beta>0 arc scores it -inf.
  std::vector<char> ok(n_cells, 1);
  for (std::size_t ki = 0; ki < ws.arcs.size(); ++ki) {
    const ArcSlot& a = ws.arcs[ki];
    if (a.beta <= 0) continue;
    for (std::size_t c = 0; c < n_cells; ++c)
      if (a.logp[full_maps[ki][c]] == kNegInf) ok[c] = 0;
  }
  for (std::size_t ki = 0; ki < ws.arcs.size(); ++ki) {
    const ArcSlot& a = ws.arcs[ki];
    if (a.beta >= 0) continue;
    for (std::size_t c = 0; c < n_cells; ++c)
      if (ok[c] && a.logp[full_maps[ki][c]] == kNegInf)
        throw std::runtime_error("arc '" + pdg.arcs[a.arc_index].id +
                                 "': negative beta over a zero cpd cell makes the objective "
                                 "unbounded below");
  }

  for (std::size_t c = 0; c < n_cells; ++c)
    if (ok[c]) ws.feasible.push_back(c);
  if (ws.feasible.empty())
    throw std::runtime_error("non-finite objective at every feasible mu "
                             "(all-zero-support conflict)");

  for (std::size_t ki = 0; ki < ws.arcs.size(); ++ki) {
    auto& slot = ws.arcs[ki];
    slot.cell_to_pair.resize(ws.feasible.size());
    for (std::size_t i = 0; i < ws.feasible.size(); ++i)
      slot.cell_to_pair[i] = full_maps[ki][ws.feasible[i]];
  }
  return ws;
}

double objective_serial(const Workspace& ws, const double* mu, double* grad) {
  const std::size_t n = ws.n_cells();
  std::vector<std::vector<double>> pairs(ws.arcs.size()), srcs(ws.arcs.size());
  for (std::size_t ai = 0; ai < ws.arcs.size(); ++ai) {
    const ArcSlot& a = ws.arcs[ai];
    pairs[ai].resize(a.n_src * a.n_tgt);
    srcs[ai].resize(a.n_src);
    project_arc(a, mu, n, pairs[ai].data(), srcs[ai].data());
  }

  double neg_entropy = 0;
  for (std::size_t c = 0; c < n; ++c) neg_entropy += xlogx(mu[c]);

  std::vector<std::vector<double>> coefs;
  const double value = assemble(ws, pairs, srcs, neg_entropy, coefs);

  if (grad) {
    for (std::size_t c = 0; c < n; ++c) {
      double g = ws.gamma * (1.0 + (mu[c] > 0 ? std::log(mu[c]) : 0.0));
      for (std::size_t ai = 0; ai < ws.arcs.size(); ++ai)
        g += coefs[ai][ws.arcs[ai].cell_to_pair[c]];
      grad[c] = g;
    }
  }
  return value;
}

double objective_parallel(const Workspace& ws, const double* mu, double* grad, int threads) {
#ifndef LIR_HAVE_OPENMP
  (void)threads;
  return objective_serial(ws, mu, grad);
#else
  const std::size_t n = ws.n_cells();
  threads = std::max(1, threads);

  std::vector<std::vector<double>> pairs(ws.arcs.size()), srcs(ws.arcs.size());
  std::size_t table_sum = 0;
  for (const auto& a : ws.arcs) table_sum += a.n_src * a.n_tgt;

  // Per-thread scatter buffers, combined in thread order.
  std::vector<std::vector<double>> partial(static_cast<std::size_t>(threads),
                                           std::vector<double>(table_sum, 0.0));
  std::vector<std::size_t> offset(ws.arcs.size(), 0);
  for (std::size_t ai = 1; ai < ws.arcs.size(); ++ai)
    offset[ai] = offset[ai - 1] + ws.arcs[ai - 1].n_src * ws.arcs[ai - 1].n_tgt;

  std::vector<double> neg_entropy_partial(static_cast<std::size_t>(threads), 0.0);

#pragma omp parallel num_threads(threads)
  {
    const int tid = omp_get_thread_num();
    auto& buf = partial[static_cast<std::size_t>(tid)];
    double local_h = 0;
#pragma omp for schedule(static)
    for (std::int64_t c = 0; c < static_cast<std::int64_t>(n); ++c) {
      const double m = mu[c];
      local_h += xlogx(m);
      for (std::size_t ai = 0; ai < ws.arcs.size(); ++ai)
        buf[offset[ai] + static_cast<std::size_t>(ws.arcs[ai].cell_to_pair[c])] += m;
    }
    neg_entropy_partial[static_cast<std::size_t>(tid)] = local_h;
  }

  double neg_entropy = 0;
  for (int t = 0; t < threads; ++t) neg_entropy += neg_entropy_partial[static_cast<std::size_t>(t)];
  for (std::size_t ai = 0; ai < ws.arcs.size(); ++ai) {
    const ArcSlot& a = ws.arcs[ai];
    pairs[ai].assign(a.n_src * a.n_tgt, 0.0);
    srcs[ai].assign(a.n_src, 0.0);
    for (int t = 0; t < threads; ++t)
      for (std::size_t i = 0; i < pairs[ai].size(); ++i)
        pairs[ai][i] += partial[static_cast<std::size_t>(t)][offset[ai] + i];
    for (std::size_t s = 0; s < a.n_src; ++s)
      for (std::size_t tt = 0; tt < a.n_tgt; ++tt) srcs[ai][s] += pairs[ai][s * a.n_tgt + tt];
  }

  std::vector<std::vector<double>> coefs;
  const double value = assemble(ws, pairs, srcs, neg_entropy, coefs);

  if (grad) {
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::int64_t c = 0; c < static_cast<std::int64_t>(n); ++c) {
      double g = ws.gamma * (1.0 + (mu[c] > 0 ? std::log(mu[c]) : 0.0));
      for (std::size_t ai = 0; ai < ws.arcs.size(); ++ai)
        g += coefs[ai][ws.arcs[ai].cell_to_pair[c]];
      grad[c] = g;
    }
  }
  return value;
#endif
}

double objective(const Workspace& ws, const double* mu, double* grad) {
  const int threads = thread_budget();
  if (threads > 1 && ws.n_cells() * std::max<std::size_t>(ws.arcs.size(), 1) >= 1 << 15)
    return objective_parallel(ws, mu, grad, threads);
  return objective_serial(ws, mu, grad);
}

}  // namespace lir::kernels
