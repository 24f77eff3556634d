#pragma once

#include <vector>

namespace lir {

/// Self-attention instance over n token vectors in R^d. Matrices are
/// row-major d x d and act on tokens as column vectors; rows of `x` are the
/// token representations. `sigma` optionally supplies one d x d covariance
/// per (source i, target j) pair, row-major [i][j][r][c]; empty means the
/// identity everywhere.
struct TransformerInstance {
  int n = 0;
  int d = 0;
  std::vector<double> x;              // n x d
  std::vector<double> w_k, w_q, w_v;  // d x d
  std::vector<double> sigma;          // n * n * d * d, or empty

  std::vector<double> keys() const;     // row i = W_K x_i
  std::vector<double> queries() const;  // row i = W_Q x_i
  std::vector<double> values() const;   // row i = W_V x_i
  /// phi[i * n + j] = exp<k_i, q_j>
  std::vector<double> attention_weights() const;
  void validate() const;
};

struct TransformerResult {
  std::vector<double> closed_form;  // n x d, row j
  std::vector<double> flow;         // n x d
  int flow_iterations = 0;
};

/// sum_ij phi_ij [ (x'_j - v_i)' Sigma_ij^-1 (x'_j - v_i) / 2
///                 + log((2 pi)^d det Sigma_ij) / 2 ]  at the given x'.
double attention_objective(const TransformerInstance& inst, const std::vector<double>& x_prime);

/// Gradient of attention_objective in x' (n x d flat).
std::vector<double> attention_gradient(const TransformerInstance& inst,
                                       const std::vector<double>& x_prime);

/// Returns both the matrix-weighted average
///   x'_j = (sum_i phi_ij Sigma_ij^-1)^-1 sum_i phi_ij Sigma_ij^-1 v_i
/// and the gradient-flow minimizer of attention_objective started from x.
/// With identity covariances both reduce to softmax-weighted value averages.
/// Throws "singular normalizer matrix" when a per-token normalizer cannot be
/// inverted.
TransformerResult transformer_fixed_point(const TransformerInstance& inst);

}  // namespace lir
