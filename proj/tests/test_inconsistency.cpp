#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "lir/inconsistency.hpp"
#include "lir/pdg.hpp"
#include "lir/rng.hpp"

using namespace lir;

namespace {

Hyperarc belief_arc(std::string id, std::string var, std::vector<double> table) {
  Hyperarc a;
  a.id = std::move(id);
  a.targets = {std::move(var)};
  a.cpd.kind = CpdKind::ConstantTable;
  a.cpd.params = std::move(table);
  a.cpd.default_params = a.cpd.params;
  return a;
}

ParametricPDG two_belief_pdg() {
  ParametricPDG pdg;
  pdg.variables = {{"X", 2}};
  pdg.arcs = {belief_arc("p1", "X", {0.9, 0.1}), belief_arc("p2", "X", {0.1, 0.9})};
  return pdg;
}

JointTable point(const std::vector<double>& probs) {
  JointTable mu;
  mu.scope = {"X"};
  mu.sizes = {static_cast<int>(probs.size())};
  mu.probs = probs;
  return mu;
}

}  // namespace

TEST_CASE("two contradicting beliefs settle on the uniform compromise") {
  const ParametricPDG pdg = two_belief_pdg();
  const InconsistencyResult res =
      solve_inconsistency(pdg, Focus::full_attention(pdg, 0.0), InnerSolverConfig::stationary());
  CHECK(res.converged);
  CHECK(res.value == doctest::Approx(1.0216512475319814).epsilon(1e-6));
  REQUIRE(res.mu_star.probs.size() == 2);
  CHECK(res.mu_star.probs[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(res.mu_star.probs[1] == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("oinc at a pinned joint reproduces the KL sum") {
  const ParametricPDG pdg = two_belief_pdg();
  // At mu = p1 the first term vanishes and the second is KL(p1 || p2).
  const double v = oinc(pdg, point({0.9, 0.1}), {1.0, 1.0});
  CHECK(v == doctest::Approx(0.8 * std::log(9.0)).epsilon(1e-12));

  // Attention weights scale the terms.
  const double half = oinc(pdg, point({0.9, 0.1}), {1.0, 0.5});
  CHECK(half == doctest::Approx(0.4 * std::log(9.0)).epsilon(1e-12));
}

TEST_CASE("oinc reports infinity when mass escapes a weighted support") {
  ParametricPDG pdg;
  pdg.variables = {{"X", 2}};
  pdg.arcs = {belief_arc("p", "X", {1.0, 0.0})};
  const double v = oinc(pdg, point({0.5, 0.5}), {1.0});
  CHECK(std::isinf(v));
  CHECK(v > 0);

  // Negligible escaped mass is forgiven.
  const double ok = oinc(pdg, point({1.0 - 1e-13, 1e-13}), {1.0});
  CHECK(std::isfinite(ok));
}

TEST_CASE("sdef reproduces entropy bookkeeping") {
  ParametricPDG pdg;
  pdg.variables = {{"X", 2}};
  pdg.arcs = {belief_arc("p", "X", {0.5, 0.5})};
  const JointTable u = point({0.5, 0.5});

  // No structural weight: -H(X).
  CHECK(sdef(pdg, u, {0.0}) == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
  // Unit weight on an unconditional arc: -H(X) + H(X) = 0.
  CHECK(sdef(pdg, u, {1.0}) == doctest::Approx(0.0).epsilon(1e-12));
  // Double weight: +H(X).
  CHECK(sdef(pdg, u, {2.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("solver validates its configuration and the focus regime") {
  const ParametricPDG pdg = two_belief_pdg();
  InnerSolverConfig cfg;
  cfg.max_iters = 0;
  CHECK_THROWS_AS(solve_inconsistency(pdg, Focus::full_attention(pdg, 0.0), cfg),
                  std::invalid_argument);

  Focus bad = Focus::full_attention(pdg, 1.0);
  bad.beta[0] = 0.25;  // below gamma * alpha
  CHECK_THROWS(solve_inconsistency(pdg, bad));
}

TEST_CASE("warm start near the optimum converges in a short budget") {
  const ParametricPDG pdg = two_belief_pdg();
  const Focus focus = Focus::full_attention(pdg, 0.0);
  const InconsistencyResult tight =
      solve_inconsistency(pdg, focus, InnerSolverConfig::stationary());
  const InconsistencyResult quick =
      solve_inconsistency(pdg, focus, InnerSolverConfig::warm(tight.mu_star));
  CHECK(quick.value == doctest::Approx(tight.value).epsilon(1e-8));
  CHECK(quick.iterations_used <= 20);
}

TEST_CASE("warm starts from a different scope are ignored, not misapplied") {
  const ParametricPDG pdg = two_belief_pdg();
  const Focus focus = Focus::full_attention(pdg, 0.0);
  JointTable foreign;
  foreign.scope = {"Y"};
  foreign.sizes = {3};
  foreign.probs = {0.2, 0.3, 0.5};
  InnerSolverConfig cfg = InnerSolverConfig::stationary();
  cfg.warm_start = foreign;
  const InconsistencyResult res = solve_inconsistency(pdg, focus, cfg);
  CHECK(res.value == doctest::Approx(1.0216512475319814).epsilon(1e-6));
}

TEST_CASE("unattended variables are pruned from the optimizing scope") {
  ParametricPDG pdg;
  pdg.variables = {{"X", 2}, {"Z", 3}};
  pdg.arcs = {belief_arc("p1", "X", {0.9, 0.1}), belief_arc("p2", "X", {0.1, 0.9}),
              belief_arc("pz", "Z", {0.2, 0.3, 0.5})};
  Focus focus = Focus::full_attention(pdg, 0.0);
  focus.beta[2] = 0.0;
  const InconsistencyResult res = solve_inconsistency(pdg, focus, InnerSolverConfig::stationary());
  CHECK(res.mu_star.scope == std::vector<std::string>{"X"});
  CHECK(res.value == doctest::Approx(1.0216512475319814).epsilon(1e-6));
}

TEST_CASE("gamma interpolates toward the entropy-regularized optimum") {
  const ParametricPDG pdg = two_belief_pdg();
  const InconsistencyResult flat =
      solve_inconsistency(pdg, Focus::full_attention(pdg, 0.0), InnerSolverConfig::stationary());
  Focus soft = Focus::full_attention(pdg, 0.5);
  for (auto& a : soft.alpha) a = 0.0;  // pure joint-entropy bonus
  const InconsistencyResult reg =
      solve_inconsistency(pdg, soft, InnerSolverConfig::stationary());
  // The entropy bonus can only lower the optimal value.
  CHECK(reg.value < flat.value);
}

TEST_CASE("midpoint convexity holds in the convex regime") {
  Rng rng(5);
  const ParametricPDG pdg = two_belief_pdg();
  const Focus focus = Focus::full_attention(pdg, 0.5);
  for (int trial = 0; trial < 25; ++trial) {
    const auto a = rng.next_simplex(2), b = rng.next_simplex(2);
    std::vector<double> mid = {(a[0] + b[0]) / 2, (a[1] + b[1]) / 2};
    const auto value = [&](const std::vector<double>& probs) {
      return oinc(pdg, point(probs), focus.beta) + focus.gamma * sdef(pdg, point(probs), focus.alpha);
    };
    CHECK(value(mid) <= (value(a) + value(b)) / 2 + 1e-9);
  }
}

TEST_CASE("envelope gradient matches finite differences of the solved value") {
  ParametricPDG pdg;
  pdg.variables = {{"X", 2}};
  Hyperarc q;
  q.id = "q";
  q.targets = {"X"};
  q.cpd.kind = CpdKind::LearnableTable;
  q.cpd.params = {0.3, -0.4};
  q.cpd.default_params = q.cpd.params;
  pdg.arcs = {q, belief_arc("p", "X", {0.8, 0.2})};

  Focus focus = Focus::full_attention(pdg, 0.0);
  focus.chi = {1.0, 0.0};

  const InconsistencyResult res =
      solve_inconsistency(pdg, focus, InnerSolverConfig::stationary());
  const ParamGrad g = envelope_grad(pdg, focus, res.mu_star);
  REQUIRE(g.by_arc.size() == 2);
  REQUIRE(g.by_arc[0].size() == 2);
  CHECK(g.by_arc[1].empty());

  const double h = 1e-5;
  for (int j = 0; j < 2; ++j) {
    ParametricPDG up = pdg, dn = pdg;
    up.arcs[0].cpd.params[j] += h;
    dn.arcs[0].cpd.params[j] -= h;
    const double fu =
        solve_inconsistency(up, focus, InnerSolverConfig::stationary()).value;
    const double fd =
        solve_inconsistency(dn, focus, InnerSolverConfig::stationary()).value;
    const double fdg = (fu - fd) / (2 * h);
    CHECK(g.by_arc[0][j] == doctest::Approx(fdg).epsilon(1e-4));
  }
}

TEST_CASE("solver value agrees with a dense grid search on a tiny problem") {
  ParametricPDG pdg;
  pdg.variables = {{"X", 2}, {"Y", 2}};
  Hyperarc link;
  link.id = "link";
  link.sources = {"X"};
  link.targets = {"Y"};
  link.cpd.kind = CpdKind::ConstantTable;
  link.cpd.params = {0.7, 0.3, 0.4, 0.6};
  link.cpd.default_params = link.cpd.params;
  pdg.arcs = {belief_arc("px", "X", {0.6, 0.4}), belief_arc("py", "Y", {0.2, 0.8}), link};

  const Focus focus = Focus::full_attention(pdg, 0.0);
  const double solved =
      solve_inconsistency(pdg, focus, InnerSolverConfig::stationary()).value;

  double best = 1e300;
  const int steps = 100;
  std::vector<double> mu(4);
  JointTable probe;
  probe.scope = {"X", "Y"};
  probe.sizes = {2, 2};
  for (int i = 0; i <= steps; ++i)
    for (int j = 0; i + j <= steps; ++j)
      for (int k = 0; i + j + k <= steps; ++k) {
        probe.probs = {i / 100.0, j / 100.0, k / 100.0, (steps - i - j - k) / 100.0};
        const double v = oinc(pdg, probe, focus.beta);
        if (v < best) best = v;
      }
  CHECK(solved == doctest::Approx(best).epsilon(2e-3));
  CHECK(solved <= best + 1e-6);
}
