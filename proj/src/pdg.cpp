#include "lir/pdg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

namespace lir {

namespace {

std::string quoted(const std::string& s) { return "'" + s + "'"; }

void softmax_rows(const std::vector<double>& logits, std::size_t n_rows, std::size_t n_cols,
                  std::vector<double>& out) {
  out.resize(logits.size());
  for (std::size_t r = 0; r < n_rows; ++r) {
    const double* z = logits.data() + r * n_cols;
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n_cols; ++c) m = std::max(m, z[c]);
    double total = 0;
    for (std::size_t c = 0; c < n_cols; ++c) total += std::exp(z[c] - m);
    for (std::size_t c = 0; c < n_cols; ++c) out[r * n_cols + c] = std::exp(z[c] - m) / total;
  }
}

}  // namespace

int ParametricPDG::var_index(const std::string& id) const {
  for (std::size_t i = 0; i < variables.size(); ++i)
    if (variables[i].id == id) return static_cast<int>(i);
  throw std::invalid_argument("unknown variable " + quoted(id));
}

int ParametricPDG::arc_index(const std::string& id) const {
  for (std::size_t i = 0; i < arcs.size(); ++i)
    if (arcs[i].id == id) return static_cast<int>(i);
  throw std::invalid_argument("unknown arc " + quoted(id));
}

std::size_t ParametricPDG::n_source_configs(const Hyperarc& a) const {
  std::size_t n = 1;
  for (const auto& s : a.sources) n *= static_cast<std::size_t>(var(s).domain_size);
  return n;
}

std::size_t ParametricPDG::n_target_configs(const Hyperarc& a) const {
  std::size_t n = 1;
  for (const auto& t : a.targets) n *= static_cast<std::size_t>(var(t).domain_size);
  return n;
}

std::vector<double> ParametricPDG::cpd_table(const Hyperarc& a) const {
  const std::size_t ns = n_source_configs(a), nt = n_target_configs(a);
  std::vector<double> table;
  switch (a.cpd.kind) {
    case CpdKind::ConstantTable:
      if (a.cpd.params.size() != ns * nt)
        throw std::invalid_argument("arc " + quoted(a.id) + ": table has " +
                                    std::to_string(a.cpd.params.size()) + " entries, expected " +
                                    std::to_string(ns * nt));
      return a.cpd.params;
    case CpdKind::LearnableTable:
      if (a.cpd.params.size() != ns * nt)
        throw std::invalid_argument("arc " + quoted(a.id) + ": logits have wrong length");
      softmax_rows(a.cpd.params, ns, nt, table);
      return table;
    case CpdKind::LinearSoftmax: {
      const int f = a.cpd.feat_dim;
      if (f <= 0 || a.cpd.features.size() != ns * static_cast<std::size_t>(f))
        throw std::invalid_argument("arc " + quoted(a.id) + ": feature matrix has wrong shape");
      if (a.cpd.params.size() != static_cast<std::size_t>(f) * nt)
        throw std::invalid_argument("arc " + quoted(a.id) + ": weight matrix has wrong shape");
      std::vector<double> logits(ns * nt, 0.0);
      for (std::size_t s = 0; s < ns; ++s)
        for (int k = 0; k < f; ++k) {
          const double x = a.cpd.features[s * f + k];
          for (std::size_t t = 0; t < nt; ++t) logits[s * nt + t] += x * a.cpd.params[k * nt + t];
        }
      softmax_rows(logits, ns, nt, table);
      return table;
    }
    case CpdKind::IsotropicGaussianMean:
      throw std::invalid_argument("arc " + quoted(a.id) +
                                  ": Gaussian cpds have no discrete table; only density-scoring "
                                  "harnesses accept them");
  }
  throw std::logic_error("unreachable");
}

void ParametricPDG::validate() const {
  std::set<std::string> var_ids;
  for (const auto& v : variables) {
    if (v.domain_size < 1)
      throw std::invalid_argument("variable " + quoted(v.id) + ": domain_size must be >= 1");
    if (!var_ids.insert(v.id).second)
      throw std::invalid_argument("duplicate variable id " + quoted(v.id));
  }
  std::set<std::string> arc_ids;
  for (const auto& a : arcs) {
    if (!arc_ids.insert(a.id).second)
      throw std::invalid_argument("duplicate arc id " + quoted(a.id));
    if (a.targets.empty())
      throw std::invalid_argument("arc " + quoted(a.id) + ": targets must be nonempty");
    for (const auto& s : a.sources)
      if (!var_ids.count(s))
        throw std::invalid_argument("arc " + quoted(a.id) + ": unknown source " + quoted(s));
    for (const auto& t : a.targets) {
      if (!var_ids.count(t))
        throw std::invalid_argument("arc " + quoted(a.id) + ": unknown target " + quoted(t));
      if (std::find(a.sources.begin(), a.sources.end(), t) != a.sources.end())
        throw std::invalid_argument("arc " + quoted(a.id) + ": " + quoted(t) +
                                    " is both source and target");
    }
    if (a.cpd.kind == CpdKind::IsotropicGaussianMean) continue;
    const auto table = cpd_table(a);
    const std::size_t ns = n_source_configs(a), nt = n_target_configs(a);
    for (std::size_t s = 0; s < ns; ++s) {
      double row = 0;
      for (std::size_t t = 0; t < nt; ++t) {
        const double p = table[s * nt + t];
        if (!(p >= 0))
          throw std::invalid_argument("arc " + quoted(a.id) + ": negative entry in row " +
                                      std::to_string(s));
        row += p;
      }
      if (std::abs(row - 1.0) > 1e-9)
        throw std::invalid_argument("arc " + quoted(a.id) + ": row " + std::to_string(s) +
                                    " sums to " + std::to_string(row) +
                                    " (rows must sum to 1 within 1e-9)");
    }
  }
}

void ParametricPDG::reset_parameters() {
  for (auto& a : arcs)
    if (a.cpd.learnable() && !a.cpd.default_params.empty()) a.cpd.params = a.cpd.default_params;
}

Focus Focus::full_attention(const ParametricPDG& pdg, double gamma) {
  Focus f;
  f.gamma = gamma;
  f.alpha.reserve(pdg.arcs.size());
  f.beta.reserve(pdg.arcs.size());
  for (const auto& a : pdg.arcs) {
    f.alpha.push_back(a.alpha);
    f.beta.push_back(a.beta);
  }
  f.chi.assign(pdg.arcs.size(), 0.0);
  return f;
}

void Focus::validate(const ParametricPDG& pdg) const {
  const std::size_t m = pdg.arcs.size();
  if (alpha.size() != m || beta.size() != m || chi.size() != m)
    throw std::invalid_argument("focus masks must align with the PDG's arcs");
  if (gamma < 0) throw std::invalid_argument("focus gamma must be nonnegative");
  for (double c : chi)
    if (!(c >= 0)) throw std::invalid_argument("focus chi must be nonnegative");
  for (const auto& [idx, vec] : chi_override) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= m)
      throw std::invalid_argument("chi override for unknown arc index");
    if (vec.size() != pdg.arcs[idx].cpd.params.size())
      throw std::invalid_argument("chi override length must match arc parameter count");
  }
}

JointTable JointTable::uniform(std::vector<std::string> scope, std::vector<int> sizes) {
  JointTable mu;
  mu.scope = std::move(scope);
  mu.sizes = std::move(sizes);
  std::size_t n = 1;
  for (int s : mu.sizes) n *= static_cast<std::size_t>(s);
  mu.probs.assign(n, 1.0 / static_cast<double>(n));
  return mu;
}

int JointTable::scope_index(const std::string& id) const {
  for (std::size_t i = 0; i < scope.size(); ++i)
    if (scope[i] == id) return static_cast<int>(i);
  throw std::invalid_argument("variable " + quoted(id) + " not in joint table scope");
}

void JointTable::validate() const {
  std::size_t n = 1;
  for (int s : sizes) n *= static_cast<std::size_t>(s);
  if (probs.size() != n || scope.size() != sizes.size())
    throw std::invalid_argument("joint table shape mismatch");
  double total = 0;
  for (double p : probs) {
    if (!(p >= 0)) throw std::invalid_argument("joint table has a negative entry");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("joint table sums to " + std::to_string(total) +
                                " (must be 1 within 1e-9)");
}

std::size_t joint_index(const std::vector<int>& sizes, const std::vector<int>& assignment) {
  if (sizes.size() != assignment.size())
    throw std::invalid_argument("joint_index: assignment length mismatch");
  std::size_t idx = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (assignment[i] < 0 || assignment[i] >= sizes[i])
      throw std::invalid_argument("joint_index: value out of range at position " +
                                  std::to_string(i));
    idx = idx * static_cast<std::size_t>(sizes[i]) + static_cast<std::size_t>(assignment[i]);
  }
  return idx;
}

void unravel_index(std::size_t flat, const std::vector<int>& sizes, std::vector<int>& out) {
  out.resize(sizes.size());
  for (std::size_t i = sizes.size(); i-- > 0;) {
    out[i] = static_cast<int>(flat % static_cast<std::size_t>(sizes[i]));
    flat /= static_cast<std::size_t>(sizes[i]);
  }
}

namespace {

// Strides of `subset` positions inside mu's flat index, so a projection is a
// single pass over cells.
std::vector<std::size_t> subset_strides(const JointTable& mu, const std::vector<std::string>& subset,
                                        std::vector<int>& subset_sizes) {
  std::vector<std::size_t> mu_strides(mu.sizes.size(), 1);
  for (std::size_t i = mu.sizes.size(); i-- > 1;)
    mu_strides[i - 1] = mu_strides[i] * static_cast<std::size_t>(mu.sizes[i]);

  subset_sizes.clear();
  std::vector<std::size_t> strides;
  for (const auto& id : subset) {
    int pos = mu.scope_index(id);
    subset_sizes.push_back(mu.sizes[pos]);
    strides.push_back(mu_strides[pos]);
  }
  return strides;
}

}  // namespace

JointTable marginal(const JointTable& mu, const std::vector<std::string>& subset) {
  std::vector<int> out_sizes;
  const auto strides = subset_strides(mu, subset, out_sizes);

  JointTable out;
  out.scope = subset;
  out.sizes = out_sizes;
  std::size_t n_out = 1;
  for (int s : out_sizes) n_out *= static_cast<std::size_t>(s);
  out.probs.assign(n_out, 0.0);

  for (std::size_t c = 0; c < mu.probs.size(); ++c) {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < subset.size(); ++i)
      idx = idx * static_cast<std::size_t>(out_sizes[i]) +
            static_cast<std::size_t>((c / strides[i]) % static_cast<std::size_t>(out_sizes[i]));
    out.probs[idx] += mu.probs[c];
  }
  double total = std::accumulate(out.probs.begin(), out.probs.end(), 0.0);
  if (total > 0)
    for (double& p : out.probs) p /= total;
  return out;
}

std::vector<double> conditional(const JointTable& mu, const std::vector<std::string>& targets,
                                const std::vector<std::string>& sources) {
  for (const auto& t : targets)
    for (const auto& s : sources)
      if (t == s) throw std::invalid_argument("conditional: targets and sources must be disjoint");

  std::vector<std::string> joint_scope = sources;
  joint_scope.insert(joint_scope.end(), targets.begin(), targets.end());
  JointTable st = marginal(mu, joint_scope);

  std::size_t nt = 1;
  for (const auto& t : targets) nt *= static_cast<std::size_t>(mu.sizes[mu.scope_index(t)]);
  const std::size_t ns = st.probs.size() / std::max<std::size_t>(nt, 1);

  std::vector<double> table(st.probs);
  for (std::size_t s = 0; s < ns; ++s) {
    double row = 0;
    for (std::size_t t = 0; t < nt; ++t) row += table[s * nt + t];
    if (row > 0) {
      for (std::size_t t = 0; t < nt; ++t) table[s * nt + t] /= row;
    } else {
      for (std::size_t t = 0; t < nt; ++t) table[s * nt + t] = 1.0 / static_cast<double>(nt);
    }
  }
  return table;
}

JointTable joint_from_cpds(const ParametricPDG& pdg, const std::vector<std::string>& arc_ids) {
  std::map<std::string, int> defined_by;  // variable -> arc position in arc_ids
  for (std::size_t i = 0; i < arc_ids.size(); ++i) {
    const Hyperarc& a = pdg.arc(arc_ids[i]);
    for (const auto& t : a.targets) {
      if (defined_by.count(t))
        throw std::invalid_argument("joint_from_cpds: variable " + quoted(t) +
                                    " targeted by more than one arc");
      defined_by[t] = static_cast<int>(i);
    }
  }
  for (const auto& v : pdg.variables)
    if (!defined_by.count(v.id))
      throw std::invalid_argument("joint_from_cpds: variable " + quoted(v.id) +
                                  " has no defining arc");

  JointTable mu;
  for (const auto& v : pdg.variables) {
    mu.scope.push_back(v.id);
    mu.sizes.push_back(v.domain_size);
  }
  std::size_t n = 1;
  for (int s : mu.sizes) n *= static_cast<std::size_t>(s);
  mu.probs.assign(n, 1.0);

  std::vector<int> digits;
  for (const auto& id : arc_ids) {
    const Hyperarc& a = pdg.arc(id);
    const auto table = pdg.cpd_table(a);
    const std::size_t nt = pdg.n_target_configs(a);
    for (std::size_t c = 0; c < n; ++c) {
      unravel_index(c, mu.sizes, digits);
      std::size_t s_idx = 0, t_idx = 0;
      for (const auto& sv : a.sources)
        s_idx = s_idx * static_cast<std::size_t>(pdg.var(sv).domain_size) +
                static_cast<std::size_t>(digits[mu.scope_index(sv)]);
      for (const auto& tv : a.targets)
        t_idx = t_idx * static_cast<std::size_t>(pdg.var(tv).domain_size) +
                static_cast<std::size_t>(digits[mu.scope_index(tv)]);
      mu.probs[c] *= table[s_idx * nt + t_idx];
    }
  }
  double total = std::accumulate(mu.probs.begin(), mu.probs.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-6)
    throw std::invalid_argument("joint_from_cpds: arcs do not form a topological chain "
                                "(product mass " + std::to_string(total) + ")");
  for (double& p : mu.probs) p /= total;
  return mu;
}

std::uint64_t parameter_hash(const ParametricPDG& pdg) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&h](const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& a : pdg.arcs)
    if (a.cpd.learnable() && !a.cpd.params.empty())
      feed(a.cpd.params.data(), a.cpd.params.size() * sizeof(double));
  return h;
}

}  // namespace lir
