#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lir {

struct Variable {
  std::string id;
  int domain_size = 0;  // values indexed 0 .. domain_size-1
};

enum class CpdKind { ConstantTable, LearnableTable, LinearSoftmax, IsotropicGaussianMean };

/// Parameterized cpd attached to a hyperarc.
///
/// Table kinds store row-major [source config][target config] data:
///   ConstantTable    params are the rows themselves (not trainable).
///   LearnableTable   params are unconstrained logits, rows = softmax(params).
///   LinearSoftmax    params are a weight matrix W (feat_dim x n_target_configs);
///                    row s = softmax(features[s] . W). Features are fixed data.
///   IsotropicGaussianMean  params are a mean vector; only modules that score
///                    continuous points by negative log density accept it.
struct CpdParameterization {
  CpdKind kind = CpdKind::ConstantTable;
  std::vector<double> params;
  std::vector<double> default_params;  // theta_0, restored by lir_run
  std::vector<double> features;        // LinearSoftmax only, row-major [src][feat]
  int feat_dim = 0;

  bool learnable() const { return kind == CpdKind::LearnableTable || kind == CpdKind::LinearSoftmax; }
};

struct Hyperarc {
  std::string id;
  std::vector<std::string> sources;
  std::vector<std::string> targets;
  CpdParameterization cpd;
  double alpha = 1.0;  // default structural confidence
  double beta = 1.0;   // default observational confidence
};

struct ParametricPDG {
  std::vector<Variable> variables;
  std::vector<Hyperarc> arcs;

  int var_index(const std::string& id) const;
  const Variable& var(const std::string& id) const { return variables[var_index(id)]; }
  int arc_index(const std::string& id) const;
  const Hyperarc& arc(const std::string& id) const { return arcs[arc_index(id)]; }

  std::size_t n_source_configs(const Hyperarc& a) const;
  std::size_t n_target_configs(const Hyperarc& a) const;

  /// Realizes the arc's cpd as a row-stochastic table, row-major
  /// [source config][target config]. Throws for IsotropicGaussianMean.
  std::vector<double> cpd_table(const Hyperarc& a) const;

  /// Throws std::invalid_argument naming the first violated invariant.
  void validate() const;

  /// Resets every learnable arc to its default parameters.
  void reset_parameters();
};

/// Per-arc attention and control masks. Vectors are aligned with pdg.arcs.
/// beta may be negative; chi uses +infinity for full control.
struct Focus {
  std::vector<double> alpha;
  std::vector<double> beta;
  double gamma = 0.0;
  std::vector<double> chi;
  /// Optional per-parameter control overriding the scalar chi for an arc.
  std::map<int, std::vector<double>> chi_override;

  /// Attention from the arcs' stored weights, chi = 0 everywhere.
  static Focus full_attention(const ParametricPDG& pdg, double gamma = 0.0);
  void validate(const ParametricPDG& pdg) const;
};

/// Dense distribution over the product domain of an ordered variable subset.
struct JointTable {
  std::vector<std::string> scope;
  std::vector<int> sizes;  // aligned with scope
  std::vector<double> probs;  // row-major, length = prod(sizes)

  static JointTable uniform(std::vector<std::string> scope, std::vector<int> sizes);
  std::size_t n_cells() const { return probs.size(); }
  int scope_index(const std::string& id) const;
  /// Throws unless entries are nonnegative and sum to 1 within 1e-9.
  void validate() const;
};

/// Row-major flat index of an assignment (values aligned with sizes).
std::size_t joint_index(const std::vector<int>& sizes, const std::vector<int>& assignment);
void unravel_index(std::size_t flat, const std::vector<int>& sizes, std::vector<int>& out);

/// Marginal onto `subset` (any order); result is normalized.
JointTable marginal(const JointTable& mu, const std::vector<std::string>& subset);

/// Row-stochastic table of mu(targets | sources), row-major
/// [source config][target config]. Zero-mass source rows are uniform.
std::vector<double> conditional(const JointTable& mu,
                                const std::vector<std::string>& targets,
                                const std::vector<std::string>& sources);

/// Joint distribution induced by arcs that form a Bayes-net shape: every
/// variable is the target of exactly one of `arc_ids` and the arcs admit a
/// topological order. Scope is pdg.variables order.
JointTable joint_from_cpds(const ParametricPDG& pdg, const std::vector<std::string>& arc_ids);

/// FNV-1a over the bit patterns of all learnable parameters.
std::uint64_t parameter_hash(const ParametricPDG& pdg);

}  // namespace lir
