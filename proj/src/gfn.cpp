#include "lir/gfn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lir {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double coord_offset(int v, int height) {
  return std::abs(static_cast<double>(v) / (height - 1) - 0.5);
}

double cosine_factor(double a) {
  const double z = 5.0 * a;
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846);
  return (std::cos(50.0 * a) + 1.0) * pdf;
}

bool xor_tier_holds(const RewardSpec& spec, const std::vector<int>& s, int tier) {
  const auto [lo, hi] = spec.bit_ranges[tier];
  for (int b = lo; b <= hi; ++b) {
    int parity = 0;
    for (int v : s) parity ^= (v >> b) & 1;
    if (parity != 0) return false;
  }
  return true;
}

/// Nonzero product of spec.primes with exponents at most exponent_cap.
bool coprime_valid(const RewardSpec& spec, int v) {
  if (v <= 0) return false;
  for (int p : spec.primes) {
    int e = 0;
    while (v % p == 0) {
      v /= p;
      if (++e > spec.exponent_cap) return false;
    }
  }
  return v == 1;
}

int highest_cumulative_tier(const RewardSpec& spec, const std::vector<int>& s) {
  const int tiers = static_cast<int>(spec.tier_weights.size());
  int earned = -1;
  for (int t = 0; t < tiers; ++t) {
    bool ok = true;
    if (spec.variant == RewardVariant::BitwiseXor) {
      ok = xor_tier_holds(spec, s, t);
    } else {
      for (int v : s) {
        if (!coprime_valid(spec, v)) {
          ok = false;
          break;
        }
      }
    }
    if (!ok) break;
    earned = t;
  }
  return earned;
}

double tiered_reward(const RewardSpec& spec, const std::vector<int>& s) {
  const int earned = highest_cumulative_tier(spec, s);
  double r = 0.0;
  for (int t = 0; t <= earned; ++t) r += spec.tier_weights[t];
  return r;
}

struct AdamState {
  std::vector<double> m1, m2;
  long long t = 0;

  explicit AdamState(std::size_t n) : m1(n, 0.0), m2(n, 0.0) {}

  void apply(std::vector<double>& params, const std::vector<double>& grad,
             const std::vector<double>& rates) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++t;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m1[i] = b1 * m1[i] + (1.0 - b1) * grad[i];
      m2[i] = b2 * m2[i] + (1.0 - b2) * grad[i] * grad[i];
      params[i] -= rates[i] * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + eps);
    }
  }
};

}  // namespace

long long HyperGrid::n_states() const {
  long long n = 1;
  for (int i = 0; i < dims; ++i) n *= height;
  return n;
}

long long HyperGrid::index_of(const std::vector<int>& s) const {
  long long idx = 0;
  for (int i = 0; i < dims; ++i) idx = idx * height + s[i];
  return idx;
}

void HyperGrid::state_of(long long index, std::vector<int>& s) const {
  s.resize(dims);
  for (int i = dims - 1; i >= 0; --i) {
    s[i] = static_cast<int>(index % height);
    index /= height;
  }
}

int HyperGrid::parent_count(const std::vector<int>& s) const {
  int n = 0;
  for (int v : s) n += (v > 0);
  return n;
}

void HyperGrid::validate() const {
  if (dims < 1) throw std::invalid_argument("HyperGrid: dims must be at least 1");
  if (height < 2) throw std::invalid_argument("HyperGrid: height must be at least 2");
  double cells = std::pow(static_cast<double>(height), dims);
  if (cells > 1e15) throw std::invalid_argument("HyperGrid: state space too large to index");
}

RewardSpec RewardSpec::by_name(const std::string& name) {
  RewardSpec spec;
  if (name == "original") {
    spec.variant = RewardVariant::Original;
  } else if (name == "cosine") {
    spec.variant = RewardVariant::Cosine;
  } else if (name == "xor") {
    spec.variant = RewardVariant::BitwiseXor;
  } else if (name == "coprime") {
    spec.variant = RewardVariant::MultiplicativeCoprime;
  } else {
    throw std::invalid_argument("unknown reward variant '" + name +
                                "' (expected original, cosine, xor, or coprime)");
  }
  return spec;
}

std::string RewardSpec::name() const {
  switch (variant) {
    case RewardVariant::Original: return "original";
    case RewardVariant::Cosine: return "cosine";
    case RewardVariant::BitwiseXor: return "xor";
    case RewardVariant::MultiplicativeCoprime: return "coprime";
  }
  return "?";
}

double reward(const RewardSpec& spec, const std::vector<int>& s, int height) {
  switch (spec.variant) {
    case RewardVariant::Original: {
      double outer = 1.0, inner = 1.0;
      for (int v : s) {
        const double a = coord_offset(v, height);
        outer *= (a > 0.25) ? 1.0 : 0.0;
        inner *= (a > 0.3 && a < 0.4) ? 1.0 : 0.0;
      }
      return spec.r0 + spec.r1 * outer + spec.r2 * inner;
    }
    case RewardVariant::Cosine: {
      double prod = 1.0;
      for (int v : s) prod *= cosine_factor(coord_offset(v, height));
      return spec.r0 + spec.r1 * prod;
    }
    case RewardVariant::BitwiseXor:
    case RewardVariant::MultiplicativeCoprime:
      return tiered_reward(spec, s);
  }
  return 0.0;
}

double log_floored_reward(const RewardSpec& spec, const std::vector<int>& s, int height) {
  return std::log(std::max(reward(spec, s, height), spec.reward_floor));
}

double cosine_peak_factor(const RewardSpec& spec, int height) {
  (void)spec;
  double best = 0.0;
  for (int v = 0; v < height; ++v) best = std::max(best, cosine_factor(coord_offset(v, height)));
  return best;
}

std::vector<long long> enumerate_modes(const RewardSpec& spec, const HyperGrid& grid) {
  grid.validate();
  std::vector<long long> modes;
  std::vector<int> s;
  const long long n = grid.n_states();
  const int top = static_cast<int>(spec.tier_weights.size()) - 1;
  const double peak = (spec.variant == RewardVariant::Cosine)
                          ? cosine_peak_factor(spec, grid.height)
                          : 0.0;
  double cosine_threshold = 1.0;
  for (int i = 0; i < grid.dims; ++i) cosine_threshold *= spec.closeness * peak;

  for (long long idx = 0; idx < n; ++idx) {
    grid.state_of(idx, s);
    bool is_mode = false;
    switch (spec.variant) {
      case RewardVariant::Original: {
        is_mode = true;
        for (int v : s) {
          const double a = coord_offset(v, grid.height);
          if (!(a > 0.3 && a < 0.4)) {
            is_mode = false;
            break;
          }
        }
        break;
      }
      case RewardVariant::Cosine: {
        double prod = 1.0;
        for (int v : s) prod *= cosine_factor(coord_offset(v, grid.height));
        is_mode = prod >= cosine_threshold;
        break;
      }
      case RewardVariant::BitwiseXor:
      case RewardVariant::MultiplicativeCoprime:
        is_mode = highest_cumulative_tier(spec, s) == top;
        break;
    }
    if (is_mode) modes.push_back(idx);
  }
  return modes;
}

TabularGFN TabularGFN::uniform_init(const HyperGrid& grid) {
  grid.validate();
  TabularGFN gfn;
  gfn.grid = grid;
  gfn.forward_logits.assign(static_cast<std::size_t>(grid.n_states()) * grid.n_actions(), 0.0);
  gfn.log_z = 0.0;
  return gfn;
}

void TabularGFN::log_policy(long long index, const std::vector<int>& s,
                            std::vector<double>& out) const {
  const int na = grid.n_actions();
  out.resize(na);
  const double* row = forward_logits.data() + static_cast<std::size_t>(index) * na;
  double maxv = kNegInf;
  for (int a = 0; a < na; ++a) {
    const bool valid = (a == grid.dims) || (s[a] < grid.height - 1);
    out[a] = valid ? row[a] : kNegInf;
    maxv = std::max(maxv, out[a]);
  }
  double total = 0.0;
  for (int a = 0; a < na; ++a) total += (out[a] == kNegInf) ? 0.0 : std::exp(out[a] - maxv);
  const double lse = maxv + std::log(total);
  for (int a = 0; a < na; ++a)
    if (out[a] != kNegInf) out[a] -= lse;
}

TrajectoryBatch sample_trajectories(const TabularGFN& gfn, const RewardSpec& spec, int m,
                                    Rng& rng, double epsilon_uniform) {
  TrajectoryBatch batch;
  batch.items.resize(m);
  const HyperGrid& grid = gfn.grid;
  std::vector<int> s(grid.dims, 0);
  std::vector<double> lp;
  std::vector<int> legal;
  for (int i = 0; i < m; ++i) {
    Trajectory& t = batch.items[i];
    std::fill(s.begin(), s.end(), 0);
    long long idx = 0;
    t.states.push_back(idx);
    while (true) {
      gfn.log_policy(idx, s, lp);
      int action;
      if (epsilon_uniform > 0.0 && rng.next_double() < epsilon_uniform) {
        legal.clear();
        for (int a = 0; a < grid.n_actions(); ++a)
          if (lp[a] != kNegInf) legal.push_back(a);
        action = legal[rng.next_int(static_cast<int>(legal.size()))];
      } else {
        double u = rng.next_double();
        action = grid.dims;  // terminate slot always legal
        for (int a = 0; a < grid.n_actions(); ++a) {
          if (lp[a] == kNegInf) continue;
          const double p = std::exp(lp[a]);
          if (u < p) {
            action = a;
            break;
          }
          u -= p;
        }
      }
      t.actions.push_back(action);
      t.log_pf += lp[action];
      if (action == grid.dims) break;
      ++s[action];
      idx = grid.index_of(s);
      t.states.push_back(idx);
      t.log_pb -= std::log(static_cast<double>(grid.parent_count(s)));
    }
    t.terminal = idx;
    t.log_r = log_floored_reward(spec, s, grid.height);
  }
  return batch;
}

double trajectory_score(const Trajectory& t, double log_z) {
  return t.log_pf + log_z - t.log_r - t.log_pb;
}

double loss_tb(const TrajectoryBatch& batch, double log_z) {
  double total = 0.0;
  for (const Trajectory& t : batch.items) {
    const double s = trajectory_score(t, log_z);
    total += s * s;
  }
  return total / batch.items.size();
}

double loss_modtb(const TrajectoryBatch& batch, double log_z) {
  double total = 0.0;
  for (const Trajectory& t : batch.items) {
    const double s = trajectory_score(t, log_z);
    total += s * s / t.length();
  }
  return total / batch.items.size();
}

double loss_lpv(const TrajectoryBatch& batch) {
  const std::size_t m = batch.items.size();
  double mean = 0.0;
  for (const Trajectory& t : batch.items) mean += trajectory_score(t, 0.0);
  mean /= m;
  double total = 0.0;
  for (const Trajectory& t : batch.items) {
    const double d = trajectory_score(t, 0.0) - mean;
    total += d * d;
  }
  return total / m;
}

double loss_modlpv(const TrajectoryBatch& batch) {
  const std::size_t m = batch.items.size();
  double mean = 0.0;
  for (const Trajectory& t : batch.items) mean += trajectory_score(t, 0.0);
  mean /= m;
  double total = 0.0;
  for (const Trajectory& t : batch.items) {
    const double d = trajectory_score(t, 0.0) - mean;
    total += d * d / t.length();
  }
  return total / m;
}

GfnLoss parse_gfn_loss(const std::string& name) {
  if (name == "tb") return GfnLoss::TB;
  if (name == "modtb") return GfnLoss::ModTB;
  if (name == "lpv") return GfnLoss::LPV;
  if (name == "modlpv") return GfnLoss::ModLPV;
  throw std::invalid_argument("unknown loss '" + name + "' (expected tb, modtb, lpv, or modlpv)");
}

std::string to_string(GfnLoss loss) {
  switch (loss) {
    case GfnLoss::TB: return "tb";
    case GfnLoss::ModTB: return "modtb";
    case GfnLoss::LPV: return "lpv";
    case GfnLoss::ModLPV: return "modlpv";
  }
  return "?";
}

GfnTrainResult train_gfn(TabularGFN gfn, const RewardSpec& spec, const GfnTrainConfig& cfg) {
  if (cfg.batch < 1) throw std::invalid_argument("train_gfn: batch must be positive");
  if (cfg.iters < 0) throw std::invalid_argument("train_gfn: iters must be nonnegative");
  const HyperGrid& grid = gfn.grid;
  const int na = grid.n_actions();
  const std::size_t n_logits = gfn.forward_logits.size();
  const bool uses_z = (cfg.loss == GfnLoss::TB || cfg.loss == GfnLoss::ModTB);

  // Flat parameter vector: logits then log Z.
  std::vector<double> params = gfn.forward_logits;
  params.push_back(gfn.log_z);
  std::vector<double> rates(params.size(), cfg.rate);
  rates.back() = cfg.rate * cfg.logz_rate_multiplier;
  AdamState adam(params.size());

  GfnTrainResult result;
  Rng root(cfg.seed);

  std::vector<double> grad(params.size());
  std::vector<double> lp;
  std::vector<int> s;
  std::vector<double> scores, coeffs;

  auto sync = [&]() {
    std::copy(params.begin(), params.begin() + n_logits, gfn.forward_logits.begin());
    gfn.log_z = params.back();
  };

  auto record_eval = [&](int iter, double loss_value) {
    sync();
    const GfnEvalMetrics m = eval_metrics(gfn, spec, &result.discovered);
    result.evals.push_back({iter, loss_value, m.l1, m.jsd, m.mode_coverage});
  };

  double last_loss = 0.0;
  for (int iter = 0; iter < cfg.iters; ++iter) {
    sync();
    Rng stream = root.split(static_cast<std::uint64_t>(iter));
    TrajectoryBatch batch =
        sample_trajectories(gfn, spec, cfg.batch, stream, cfg.epsilon_uniform);
    for (const Trajectory& t : batch.items) result.discovered.insert(t.terminal);

    const std::size_t m = batch.items.size();
    scores.resize(m);
    coeffs.resize(m);
    for (std::size_t i = 0; i < m; ++i)
      scores[i] = trajectory_score(batch.items[i], uses_z ? params.back() : 0.0);

    // Per-trajectory loss and d(loss)/d(score); contributions above the clamp
    // are frozen out of the gradient.
    double mean = 0.0;
    if (!uses_z) {
      for (double v : scores) mean += v;
      mean /= m;
    }
    double loss_value = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double n = batch.items[i].length();
      const double d = uses_z ? scores[i] : scores[i] - mean;
      const bool mod = (cfg.loss == GfnLoss::ModTB || cfg.loss == GfnLoss::ModLPV);
      const double cell = d * d / (mod ? n : 1.0);
      if (cell > cfg.loss_clamp) {
        loss_value += cfg.loss_clamp;
        coeffs[i] = 0.0;
      } else {
        loss_value += cell;
        coeffs[i] = 2.0 * d / (mod ? n : 1.0);
      }
    }
    loss_value /= m;
    last_loss = loss_value;

    std::fill(grad.begin(), grad.end(), 0.0);
    // Centered losses: d(mean)/d(score_j) feeds back through every term.
    double coeff_mean = 0.0;
    if (!uses_z) {
      for (double c : coeffs) coeff_mean += c;
      coeff_mean /= m;
    }
    for (std::size_t i = 0; i < m; ++i) {
      const Trajectory& t = batch.items[i];
      const double dl_ds = (coeffs[i] - (uses_z ? 0.0 : coeff_mean)) / m;
      if (dl_ds == 0.0) continue;
      if (uses_z) grad.back() += dl_ds;
      long long idx = t.states.front();
      grid.state_of(idx, s);
      for (std::size_t k = 0; k < t.actions.size(); ++k) {
        idx = t.states[k];
        grid.state_of(idx, s);
        gfn.log_policy(idx, s, lp);
        const int chosen = t.actions[k];
        double* g = grad.data() + static_cast<std::size_t>(idx) * na;
        for (int a = 0; a < na; ++a) {
          if (lp[a] == kNegInf) continue;
          g[a] += dl_ds * ((a == chosen ? 1.0 : 0.0) - std::exp(lp[a]));
        }
      }
    }

    adam.apply(params, grad, rates);

    if (cfg.eval_every > 0 && (iter + 1) % cfg.eval_every == 0 && iter + 1 < cfg.iters)
      record_eval(iter + 1, loss_value);
  }
  record_eval(cfg.iters, last_loss);
  result.gfn = std::move(gfn);
  std::copy(params.begin(), params.begin() + n_logits, result.gfn.forward_logits.begin());
  result.gfn.log_z = params.back();
  return result;
}

JointTable exact_terminal_distribution(const TabularGFN& gfn) {
  const HyperGrid& grid = gfn.grid;
  grid.validate();
  const long long n = grid.n_states();
  if (n > 1000000)
    throw std::invalid_argument("exact_terminal_distribution: more than 10^6 states");

  std::vector<double> reach(n, 0.0), terminal(n, 0.0);
  reach[0] = 1.0;
  std::vector<int> s;
  std::vector<double> lp;
  // Ascending flat index is a topological order: increments only raise it.
  for (long long idx = 0; idx < n; ++idx) {
    if (reach[idx] == 0.0) continue;
    grid.state_of(idx, s);
    gfn.log_policy(idx, s, lp);
    terminal[idx] = reach[idx] * std::exp(lp[grid.dims]);
    for (int a = 0; a < grid.dims; ++a) {
      if (lp[a] == kNegInf) continue;
      ++s[a];
      reach[grid.index_of(s)] += reach[idx] * std::exp(lp[a]);
      --s[a];
    }
  }

  JointTable table;
  table.sizes.assign(grid.dims, grid.height);
  for (int i = 0; i < grid.dims; ++i) table.scope.push_back("x" + std::to_string(i));
  table.probs = std::move(terminal);
  double total = 0.0;
  for (double p : table.probs) total += p;
  if (std::abs(total - 1.0) > 1e-10)
    throw std::runtime_error("exact_terminal_distribution: mass does not sum to 1");
  for (double& p : table.probs) p /= total;
  return table;
}

GfnEvalMetrics eval_metrics(const TabularGFN& gfn, const RewardSpec& spec,
                            const std::unordered_set<long long>* discovered) {
  const HyperGrid& grid = gfn.grid;
  const JointTable p = exact_terminal_distribution(gfn);
  const long long n = grid.n_states();

  std::vector<double> target(n);
  std::vector<int> s;
  double z = 0.0;
  for (long long idx = 0; idx < n; ++idx) {
    grid.state_of(idx, s);
    target[idx] = std::max(reward(spec, s, grid.height), spec.reward_floor);
    z += target[idx];
  }
  for (double& v : target) v /= z;

  GfnEvalMetrics m;
  for (long long idx = 0; idx < n; ++idx) {
    const double a = p.probs[idx], b = target[idx];
    m.l1 += std::abs(a - b);
    const double mid = 0.5 * (a + b);
    if (a > 0.0) m.jsd += 0.5 * a * std::log(a / mid);
    if (b > 0.0) m.jsd += 0.5 * b * std::log(b / mid);
  }

  const std::vector<long long> modes = enumerate_modes(spec, grid);
  if (discovered != nullptr && !modes.empty()) {
    long long hit = 0;
    for (long long idx : modes) hit += discovered->count(idx) ? 1 : 0;
    m.mode_coverage = static_cast<double>(hit) / modes.size();
  }
  return m;
}

TabularGFN balanced_gfn(const HyperGrid& grid, const RewardSpec& spec) {
  grid.validate();
  const long long n = grid.n_states();
  if (n > 1000000) throw std::invalid_argument("balanced_gfn: more than 10^6 states");
  TabularGFN gfn = TabularGFN::uniform_init(grid);

  // Flow fixed point F(s) = R(s) + sum_children F(c) / parents(c), filled in
  // reverse topological (descending index) order.
  std::vector<double> flow(n, 0.0);
  std::vector<int> s;
  for (long long idx = n - 1; idx >= 0; --idx) {
    grid.state_of(idx, s);
    double f = std::max(reward(spec, s, grid.height), spec.reward_floor);
    for (int a = 0; a < grid.dims; ++a) {
      if (s[a] >= grid.height - 1) continue;
      ++s[a];
      f += flow[grid.index_of(s)] / grid.parent_count(s);
      --s[a];
    }
    flow[idx] = f;
    double* row = gfn.forward_logits.data() + static_cast<std::size_t>(idx) * grid.n_actions();
    for (int a = 0; a < grid.dims; ++a) {
      if (s[a] >= grid.height - 1) continue;
      ++s[a];
      row[a] = std::log(flow[grid.index_of(s)] / grid.parent_count(s));
      --s[a];
    }
    row[grid.dims] = std::log(std::max(reward(spec, s, grid.height), spec.reward_floor));
  }
  gfn.log_z = std::log(flow[0]);
  return gfn;
}

}  // namespace lir
