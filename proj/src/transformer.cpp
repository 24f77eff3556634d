#include "lir/transformer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace lir {

namespace {

constexpr double kPi = 3.14159265358979323846;

/// Gauss-Jordan with partial pivoting; also reports log|det|. Throws the
/// supplied message when a pivot collapses.
std::vector<double> invert(std::vector<double> a, int d, double* log_det, const char* err) {
  std::vector<double> inv(d * d, 0.0);
  for (int i = 0; i < d; ++i) inv[i * d + i] = 1.0;
  double logdet = 0.0;
  for (int col = 0; col < d; ++col) {
    int pivot = col;
    for (int r = col + 1; r < d; ++r)
      if (std::abs(a[r * d + col]) > std::abs(a[pivot * d + col])) pivot = r;
    if (std::abs(a[pivot * d + col]) < 1e-12) throw std::runtime_error(err);
    if (pivot != col)
      for (int c = 0; c < d; ++c) {
        std::swap(a[pivot * d + c], a[col * d + c]);
        std::swap(inv[pivot * d + c], inv[col * d + c]);
      }
    const double diag = a[col * d + col];
    logdet += std::log(std::abs(diag));
    for (int c = 0; c < d; ++c) {
      a[col * d + c] /= diag;
      inv[col * d + c] /= diag;
    }
    for (int r = 0; r < d; ++r) {
      if (r == col) continue;
      const double factor = a[r * d + col];
      if (factor == 0.0) continue;
      for (int c = 0; c < d; ++c) {
        a[r * d + c] -= factor * a[col * d + c];
        inv[r * d + c] -= factor * inv[col * d + c];
      }
    }
  }
  if (log_det) *log_det = logdet;
  return inv;
}

std::vector<double> mat_rows(const std::vector<double>& w, const std::vector<double>& x, int n,
                             int d) {
  std::vector<double> out(n * d, 0.0);
  for (int i = 0; i < n; ++i)
    for (int r = 0; r < d; ++r) {
      double acc = 0.0;
      for (int c = 0; c < d; ++c) acc += w[r * d + c] * x[i * d + c];
      out[i * d + r] = acc;
    }
  return out;
}

/// Inverse and log-determinant of Sigma_ij for every pair; identity when the
/// instance omits covariances.
struct PairGaussians {
  int n, d;
  bool identity;
  std::vector<double> inv;      // n*n*d*d
  std::vector<double> log_det;  // n*n

  explicit PairGaussians(const TransformerInstance& inst)
      : n(inst.n), d(inst.d), identity(inst.sigma.empty()) {
    if (identity) return;
    inv.resize(static_cast<std::size_t>(n) * n * d * d);
    log_det.resize(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        std::vector<double> s(inst.sigma.begin() + pair_offset(i, j),
                              inst.sigma.begin() + pair_offset(i, j) + d * d);
        double ld = 0.0;
        const auto si = invert(std::move(s), d, &ld, "singular covariance matrix");
        std::copy(si.begin(), si.end(), inv.begin() + pair_offset(i, j));
        log_det[i * n + j] = ld;
      }
  }

  std::size_t pair_offset(int i, int j) const {
    return (static_cast<std::size_t>(i) * n + j) * d * d;
  }

  /// y = Sigma_ij^-1 v
  void apply(int i, int j, const double* v, double* y) const {
    if (identity) {
      for (int r = 0; r < d; ++r) y[r] = v[r];
      return;
    }
    const double* m = inv.data() + pair_offset(i, j);
    for (int r = 0; r < d; ++r) {
      double acc = 0.0;
      for (int c = 0; c < d; ++c) acc += m[r * d + c] * v[c];
      y[r] = acc;
    }
  }

  double logdet(int i, int j) const { return identity ? 0.0 : log_det[i * n + j]; }
};

}  // namespace

void TransformerInstance::validate() const {
  if (n < 1 || d < 1) throw std::invalid_argument("n and d must be positive");
  const std::size_t nd = static_cast<std::size_t>(n) * d;
  const std::size_t dd = static_cast<std::size_t>(d) * d;
  if (x.size() != nd) throw std::invalid_argument("x must hold n x d values");
  if (w_k.size() != dd || w_q.size() != dd || w_v.size() != dd)
    throw std::invalid_argument("weight matrices must be d x d");
  if (!sigma.empty() && sigma.size() != static_cast<std::size_t>(n) * n * dd)
    throw std::invalid_argument("sigma must be empty or hold n*n d x d matrices");
}

std::vector<double> TransformerInstance::keys() const { return mat_rows(w_k, x, n, d); }
std::vector<double> TransformerInstance::queries() const { return mat_rows(w_q, x, n, d); }
std::vector<double> TransformerInstance::values() const { return mat_rows(w_v, x, n, d); }

std::vector<double> TransformerInstance::attention_weights() const {
  const auto k = keys();
  const auto q = queries();
  std::vector<double> phi(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double dot = 0.0;
      for (int r = 0; r < d; ++r) dot += k[i * d + r] * q[j * d + r];
      phi[i * n + j] = std::exp(dot);
    }
  return phi;
}

double attention_objective(const TransformerInstance& inst, const std::vector<double>& x_prime) {
  inst.validate();
  if (x_prime.size() != inst.x.size())
    throw std::invalid_argument("x_prime must hold n x d values");
  const int n = inst.n, d = inst.d;
  const auto phi = inst.attention_weights();
  const auto v = inst.values();
  const PairGaussians gauss(inst);

  std::vector<double> diff(d), wdiff(d);
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      for (int r = 0; r < d; ++r) diff[r] = x_prime[j * d + r] - v[i * d + r];
      gauss.apply(i, j, diff.data(), wdiff.data());
      double quad = 0.0;
      for (int r = 0; r < d; ++r) quad += diff[r] * wdiff[r];
      total += phi[i * n + j] *
               0.5 * (quad + d * std::log(2.0 * kPi) + gauss.logdet(i, j));
    }
  return total;
}

std::vector<double> attention_gradient(const TransformerInstance& inst,
                                       const std::vector<double>& x_prime) {
  const int n = inst.n, d = inst.d;
  const auto phi = inst.attention_weights();
  const auto v = inst.values();
  const PairGaussians gauss(inst);

  std::vector<double> grad(x_prime.size(), 0.0);
  std::vector<double> diff(d), wdiff(d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      for (int r = 0; r < d; ++r) diff[r] = x_prime[j * d + r] - v[i * d + r];
      gauss.apply(i, j, diff.data(), wdiff.data());
      for (int r = 0; r < d; ++r) grad[j * d + r] += phi[i * n + j] * wdiff[r];
    }
  return grad;
}

TransformerResult transformer_fixed_point(const TransformerInstance& inst) {
  inst.validate();
  const int n = inst.n, d = inst.d;
  const auto phi = inst.attention_weights();
  const auto v = inst.values();
  const PairGaussians gauss(inst);

  TransformerResult out;
  out.closed_form.resize(static_cast<std::size_t>(n) * d);
  std::vector<double> col(d), wcol(d);
  for (int j = 0; j < n; ++j) {
    std::vector<double> normalizer(static_cast<std::size_t>(d) * d, 0.0);
    std::vector<double> rhs(d, 0.0);
    for (int i = 0; i < n; ++i) {
      const double w = phi[i * n + j];
      if (gauss.identity) {
        for (int r = 0; r < d; ++r) normalizer[r * d + r] += w;
      } else {
        const double* m = gauss.inv.data() + gauss.pair_offset(i, j);
        for (int r = 0; r < d * d; ++r) normalizer[r] += w * m[r];
      }
      gauss.apply(i, j, v.data() + i * d, wcol.data());
      for (int r = 0; r < d; ++r) rhs[r] += w * wcol[r];
    }
    const auto ninv = invert(std::move(normalizer), d, nullptr, "singular normalizer matrix");
    for (int r = 0; r < d; ++r) {
      double acc = 0.0;
      for (int c = 0; c < d; ++c) acc += ninv[r * d + c] * rhs[c];
      out.closed_form[j * d + r] = acc;
    }
  }

  // Gradient flow from the current representations: Adam with plateau-halved
  // steps on the strongly convex objective.
  std::vector<double> xp = inst.x;
  std::vector<double> m1(xp.size(), 0.0), m2(xp.size(), 0.0);
  double step = 0.1;
  double best = attention_objective(inst, xp);
  int stall = 0;
  const int cap = 200000;
  int it = 0;
  for (; it < cap; ++it) {
    const auto g = attention_gradient(inst, xp);
    double norm = 0.0;
    for (double gi : g) norm += gi * gi;
    if (std::sqrt(norm) < 1e-10) break;
    const double b1 = 0.9, b2 = 0.999;
    const double c1 = 1.0 - std::pow(b1, it + 1);
    const double c2 = 1.0 - std::pow(b2, it + 1);
    for (std::size_t p = 0; p < xp.size(); ++p) {
      m1[p] = b1 * m1[p] + (1 - b1) * g[p];
      m2[p] = b2 * m2[p] + (1 - b2) * g[p] * g[p];
      xp[p] -= step * (m1[p] / c1) / (std::sqrt(m2[p] / c2) + 1e-8);
    }
    const double val = attention_objective(inst, xp);
    if (val < best - 1e-15) {
      best = val;
      stall = 0;
    } else if (++stall >= 20) {
      step *= 0.5;
      stall = 0;
      if (step < 1e-13) break;
    }
  }
  out.flow = std::move(xp);
  out.flow_iterations = it;
  return out;
}

}  // namespace lir
