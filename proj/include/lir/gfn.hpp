#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lir/pdg.hpp"
#include "lir/rng.hpp"

namespace lir {

/// Hypergrid environment: states are integer lattice points in
/// {0..height-1}^dims, the start state is the origin, action i < dims
/// increments coordinate i, and action dims terminates (always legal).
struct HyperGrid {
  int dims = 2;
  int height = 8;

  long long n_states() const;
  int n_actions() const { return dims + 1; }

  /// Row-major flat index, last coordinate fastest. Incrementing any
  /// coordinate strictly increases the index, so ascending index order is a
  /// topological order of the DAG.
  long long index_of(const std::vector<int>& s) const;
  void state_of(long long index, std::vector<int>& s) const;

  int parent_count(const std::vector<int>& s) const;

  void validate() const;
};

enum class RewardVariant { Original, Cosine, BitwiseXor, MultiplicativeCoprime };

struct RewardSpec {
  RewardVariant variant = RewardVariant::Original;

  // Original / Cosine terms.
  double r0 = 0.1;
  double r1 = 0.5;
  double r2 = 2.0;
  /// Cosine mode threshold: per-coordinate factor must reach this fraction of
  /// the best value attainable on the grid's discrete coordinate set.
  double closeness = 0.8;

  // BitwiseXor tiers: weight t is earned when every bit position in
  // [ranges[t].first, ranges[t].second] has even parity across coordinates,
  // and all earlier tiers are earned too.
  std::vector<double> tier_weights = {1.0, 10.0, 100.0};
  std::vector<std::pair<int, int>> bit_ranges = {{0, 5}, {0, 7}, {0, 9}};

  // MultiplicativeCoprime: coordinates must be nonzero products of the primes
  // with per-prime exponent at most exponent_cap.
  std::vector<int> primes = {2, 3, 5};
  int exponent_cap = 2;

  /// Floor applied wherever a reward enters a logarithm or a target
  /// distribution; reward() itself returns the raw value.
  double reward_floor = 1e-6;

  static RewardSpec by_name(const std::string& name);
  std::string name() const;
};

double reward(const RewardSpec& spec, const std::vector<int>& s, int height);
double log_floored_reward(const RewardSpec& spec, const std::vector<int>& s, int height);

/// Peak per-coordinate Cosine factor over the grid's discrete coordinate
/// values (not the continuous maximum).
double cosine_peak_factor(const RewardSpec& spec, int height);

/// Exact mode set: flat indices of the states that satisfy the variant's top
/// tier (Original: inner band in every coordinate; Cosine: factor product
/// within closeness^dims of the peak; BitwiseXor / MultiplicativeCoprime: all
/// tiers earned).
std::vector<long long> enumerate_modes(const RewardSpec& spec, const HyperGrid& grid);

/// Tabular forward policy: one logit per (state, action), terminate slot
/// last, plus a log-partition estimate. Invalid increments are masked out of
/// the softmax rather than trained toward -inf.
struct TabularGFN {
  HyperGrid grid;
  std::vector<double> forward_logits;  // n_states * (dims + 1)
  double log_z = 0.0;

  static TabularGFN uniform_init(const HyperGrid& grid);

  /// Masked log-policy at a state; invalid slots are set to -infinity.
  void log_policy(long long index, const std::vector<int>& s, std::vector<double>& out) const;
};

struct Trajectory {
  std::vector<long long> states;  // s_0 .. terminal, flat indices
  std::vector<int> actions;       // one per step, terminate included
  double log_pf = 0.0;            // model probability of the action sequence
  double log_pb = 0.0;            // uniform-parents probability of the path back
  double log_r = 0.0;             // floored terminal reward
  long long terminal = 0;

  int length() const { return static_cast<int>(actions.size()); }
};

struct TrajectoryBatch {
  std::vector<Trajectory> items;
};

/// Rolls out m trajectories. The behavior policy mixes the model policy with
/// a uniform draw over legal actions (probability epsilon_uniform); log_pf
/// always records the model policy.
TrajectoryBatch sample_trajectories(const TabularGFN& gfn, const RewardSpec& spec, int m,
                                    Rng& rng, double epsilon_uniform = 0.0);

/// Per-trajectory score: log P_F(tau) + log Z - log R(x) - log P_B(tau | x).
double trajectory_score(const Trajectory& t, double log_z);

double loss_tb(const TrajectoryBatch& batch, double log_z);
double loss_modtb(const TrajectoryBatch& batch, double log_z);
/// Z-free variants: center the logZ-less scores at the batch mean.
double loss_lpv(const TrajectoryBatch& batch);
double loss_modlpv(const TrajectoryBatch& batch);

enum class GfnLoss { TB, ModTB, LPV, ModLPV };

GfnLoss parse_gfn_loss(const std::string& name);
std::string to_string(GfnLoss loss);

struct GfnTrainConfig {
  GfnLoss loss = GfnLoss::ModTB;
  int iters = 3000;
  int batch = 64;
  double rate = 0.05;
  /// log Z moves on a faster clock than the policy logits.
  double logz_rate_multiplier = 100.0;
  double epsilon_uniform = 0.05;
  std::uint64_t seed = 0;
  int eval_every = 100;
  /// Per-trajectory loss contributions above this value are clamped and
  /// excluded from the gradient.
  double loss_clamp = 100.0;
};

struct GfnEvalRow {
  int iter = 0;
  double loss = 0.0;
  double l1 = 0.0;
  double jsd = 0.0;
  double mode_coverage = 0.0;
};

struct GfnTrainResult {
  TabularGFN gfn;
  std::vector<GfnEvalRow> evals;
  /// Terminal states visited by any sampled trajectory, in discovery order.
  std::unordered_set<long long> discovered;
};

GfnTrainResult train_gfn(TabularGFN gfn, const RewardSpec& spec, const GfnTrainConfig& cfg);

/// Exact terminal distribution of the policy by forward DP over the grid DAG.
/// Returned as a joint table over the coordinate variables x0..x{d-1}.
/// Refuses grids with more than 10^6 states.
JointTable exact_terminal_distribution(const TabularGFN& gfn);

struct GfnEvalMetrics {
  double l1 = 0.0;
  double jsd = 0.0;
  double mode_coverage = 0.0;
};

/// Compares the exact terminal distribution against the floored-reward target
/// p* proportional to max(R, floor). Mode coverage is the fraction of modes in
/// `discovered` (0 when discovered is null).
GfnEvalMetrics eval_metrics(const TabularGFN& gfn, const RewardSpec& spec,
                            const std::unordered_set<long long>* discovered = nullptr);

/// Policy built from the exact flow fixed point F(s) = R(s) + sum over
/// children of F(child) / parent_count(child), with log Z = log F(origin).
/// Every trajectory scores exactly zero, so all four losses vanish.
TabularGFN balanced_gfn(const HyperGrid& grid, const RewardSpec& spec);

}  // namespace lir
