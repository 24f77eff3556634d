#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "lir/engine.hpp"

using namespace lir;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Hyperarc const_arc(std::string id, std::string var, std::vector<double> table) {
  Hyperarc a;
  a.id = std::move(id);
  a.targets = {std::move(var)};
  a.cpd.kind = CpdKind::ConstantTable;
  a.cpd.params = std::move(table);
  a.cpd.default_params = a.cpd.params;
  return a;
}

Hyperarc learn_arc(std::string id, std::string var, std::vector<double> logits) {
  Hyperarc a;
  a.id = std::move(id);
  a.targets = {std::move(var)};
  a.cpd.kind = CpdKind::LearnableTable;
  a.cpd.params = std::move(logits);
  a.cpd.default_params = a.cpd.params;
  return a;
}

/// Learnable belief q about a binary X, pinned against a constant belief p.
ParametricPDG projection_pdg() {
  ParametricPDG pdg;
  pdg.variables = {{"X", 2}};
  pdg.arcs = {learn_arc("q", "X", {0.0, 0.0}), const_arc("p", "X", {0.8, 0.2})};
  return pdg;
}

std::vector<double> softmax2(const std::vector<double>& z) {
  const double m = std::max(z[0], z[1]);
  std::vector<double> q = {std::exp(z[0] - m), std::exp(z[1] - m)};
  const double s = q[0] + q[1];
  return {q[0] / s, q[1] / s};
}

/// Envelope gradient flow of projection_pdg in closed form. The inner optimum
/// is mu ~ sqrt(q p), and the flow on q's logits is theta' = mu - q.
std::vector<double> flow_field(const std::vector<double>& theta, const std::vector<double>& p) {
  const auto q = softmax2(theta);
  std::vector<double> mu = {std::sqrt(q[0] * p[0]), std::sqrt(q[1] * p[1])};
  const double z = mu[0] + mu[1];
  return {mu[0] / z - q[0], mu[1] / z - q[1]};
}

std::vector<double> integrate_reference(std::vector<double> theta, double total, int substeps) {
  const std::vector<double> p = {0.8, 0.2};
  const double h = total / substeps;
  for (int s = 0; s < substeps; ++s) {
    const auto k1 = flow_field(theta, p);
    std::vector<double> t2 = {theta[0] + 0.5 * h * k1[0], theta[1] + 0.5 * h * k1[1]};
    const auto k2 = flow_field(t2, p);
    std::vector<double> t3 = {theta[0] + 0.5 * h * k2[0], theta[1] + 0.5 * h * k2[1]};
    const auto k3 = flow_field(t3, p);
    std::vector<double> t4 = {theta[0] + h * k3[0], theta[1] + h * k3[1]};
    const auto k4 = flow_field(t4, p);
    for (int j = 0; j < 2; ++j)
      theta[j] += h / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
  }
  return theta;
}

double dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("a step with no control solves but leaves parameters alone") {
  ParametricPDG pdg = projection_pdg();
  const std::uint64_t before = parameter_hash(pdg);
  const Focus focus = Focus::full_attention(pdg, 0.0);
  const StepRecord rec = lir_step(pdg, focus, OdeConfig{}, InnerSolverConfig::stationary());
  CHECK(rec.ok);
  CHECK(rec.param_hash == before);
  CHECK(parameter_hash(pdg) == before);
  const double direct =
      solve_inconsistency(pdg, focus, InnerSolverConfig::stationary()).value;
  CHECK(rec.value == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("full control projects the learnable belief onto the constant one") {
  ParametricPDG pdg = projection_pdg();
  Focus focus = Focus::full_attention(pdg, 0.0);
  focus.chi = {kInf, 0.0};
  const StepRecord rec = lir_step(pdg, focus, OdeConfig{}, InnerSolverConfig::stationary());
  CHECK(rec.ok);
  CHECK(rec.value < 1e-9);
  const auto q = softmax2(pdg.arcs[0].cpd.params);
  CHECK(q[0] == doctest::Approx(0.8).epsilon(1e-5));
  CHECK(q[1] == doctest::Approx(0.2).epsilon(1e-5));
  const ParamGrad g = envelope_grad(pdg, focus, rec.mu_star);
  double norm = 0;
  for (double v : g.by_arc[0]) norm += v * v;
  CHECK(std::sqrt(norm) < 1e-6);
}

TEST_CASE("integrators follow the envelope flow at their stated order") {
  const double h = 1.0;
  const std::vector<double> ref = integrate_reference({0.0, 0.0}, h, 512);

  const auto advance = [&](Integrator kind, int rounds, double scale) {
    ParametricPDG pdg = projection_pdg();
    Focus focus = Focus::full_attention(pdg, 0.0);
    focus.chi = {1.0, 0.0};
    OdeConfig ode;
    ode.integrator = kind;
    ode.outer_iters_per_step = rounds;
    ode.step_scale = scale;
    lir_step(pdg, focus, ode, InnerSolverConfig::stationary());
    return pdg.arcs[0].cpd.params;
  };

  const double euler_h = dist(advance(Integrator::Euler, 1, h), ref);
  const double euler_h2 = dist(advance(Integrator::Euler, 2, h / 2), ref);
  const double rk4_h = dist(advance(Integrator::RK4, 1, h), ref);
  const double rk4_h2 = dist(advance(Integrator::RK4, 2, h / 2), ref);

  CHECK(rk4_h < euler_h / 10);  // fourth order beats first at the same step
  CHECK(rk4_h / rk4_h2 > 3.5);  // halving the step pays off at higher order
  CHECK(euler_h / euler_h2 > 1.4);
  CHECK(euler_h / euler_h2 < 3.5);
}

TEST_CASE("step configuration is validated") {
  ParametricPDG pdg = projection_pdg();
  const Focus focus = Focus::full_attention(pdg, 0.0);
  OdeConfig bad;
  bad.outer_iters_per_step = 0;
  CHECK_THROWS_AS(lir_step(pdg, focus, bad, InnerSolverConfig{}), std::invalid_argument);
  bad.outer_iters_per_step = 1;
  bad.step_scale = 0.0;
  CHECK_THROWS_AS(lir_step(pdg, focus, bad, InnerSolverConfig{}), std::invalid_argument);
}

TEST_CASE("strategy names parse and unknown ones are rejected") {
  CHECK(parse_strategy("uniform", 1).kind == RefocusStrategy::Kind::Uniform);
  CHECK(parse_strategy("partial", 1).kind == RefocusStrategy::Kind::Partial);
  CHECK(parse_strategy("hub", 1).kind == RefocusStrategy::Kind::Hub);
  CHECK(parse_strategy("smooth", 1).kind == RefocusStrategy::Kind::SmoothExponential);
  CHECK_THROWS_WITH_AS(parse_strategy("all-at-once", 1),
                       doctest::Contains("unknown strategy"), std::invalid_argument);
}

TEST_CASE("refocus streams validate their inputs") {
  ParametricPDG empty;
  empty.variables = {{"X", 2}};
  CHECK_THROWS_AS(make_refocus(parse_strategy("uniform", 1), empty), std::invalid_argument);

  ParametricPDG pdg = projection_pdg();
  RefocusStrategy partial = parse_strategy("partial", 1);
  partial.fraction = 0.0;
  CHECK_THROWS_AS(make_refocus(partial, pdg), std::invalid_argument);
  partial.fraction = 1.5;
  CHECK_THROWS_AS(make_refocus(partial, pdg), std::invalid_argument);

  RefocusStrategy cycle;
  cycle.kind = RefocusStrategy::Kind::FixedCycle;
  CHECK_THROWS_AS(make_refocus(cycle, pdg), std::invalid_argument);

  RefocusStrategy custom;
  custom.kind = RefocusStrategy::Kind::Custom;
  CHECK_THROWS_AS(make_refocus(custom, pdg), std::invalid_argument);
}

namespace {

/// Five arcs over a 3-variable chain, enough structure for masking tests.
ParametricPDG five_arc_pdg() {
  ParametricPDG pdg;
  pdg.variables = {{"A", 2}, {"B", 2}, {"C", 2}};
  pdg.arcs = {const_arc("a1", "A", {0.5, 0.5}), const_arc("a2", "B", {0.6, 0.4}),
              const_arc("a3", "C", {0.3, 0.7})};
  Hyperarc ab;
  ab.id = "a4";
  ab.sources = {"A"};
  ab.targets = {"B"};
  ab.cpd.kind = CpdKind::ConstantTable;
  ab.cpd.params = {0.9, 0.1, 0.2, 0.8};
  ab.cpd.default_params = ab.cpd.params;
  Hyperarc bc = ab;
  bc.id = "a5";
  bc.sources = {"B"};
  bc.targets = {"C"};
  pdg.arcs.push_back(ab);
  pdg.arcs.push_back(bc);
  return pdg;
}

int active_count(const Focus& f) {
  int n = 0;
  for (double b : f.beta) n += (b != 0.0);
  return n;
}

}  // namespace

TEST_CASE("partial foci activate exactly the configured fraction of arcs") {
  const ParametricPDG pdg = five_arc_pdg();
  RefocusStream stream = make_refocus(parse_strategy("partial", 11), pdg);
  std::set<std::vector<double>> seen;
  for (int t = 0; t < 12; ++t) {
    const Focus f = stream.next();
    CHECK(active_count(f) == 2);  // floor(0.5 * 5)
    for (double b : f.beta) CHECK((b == 0.0 || b == 1.0));
    for (double c : f.chi) CHECK(c == 1.0);
    seen.insert(f.beta);
  }
  CHECK(seen.size() > 1);
}

TEST_CASE("hub foci are exactly the arcs incident to one variable") {
  const ParametricPDG pdg = five_arc_pdg();
  RefocusStream stream = make_refocus(parse_strategy("hub", 3), pdg);
  for (int t = 0; t < 12; ++t) {
    const Focus f = stream.next();
    bool matched = false;
    for (const auto& v : pdg.variables) {
      bool all_match = true;
      for (std::size_t i = 0; i < pdg.arcs.size(); ++i) {
        bool touches = false;
        for (const auto& s : pdg.arcs[i].sources) touches |= (s == v.id);
        for (const auto& tg : pdg.arcs[i].targets) touches |= (tg == v.id);
        all_match &= (touches == (f.beta[i] == 1.0));
      }
      matched |= all_match;
    }
    CHECK(matched);
  }
}

TEST_CASE("smooth foci are positive and uniform foci are all ones") {
  const ParametricPDG pdg = five_arc_pdg();
  RefocusStream smooth = make_refocus(parse_strategy("smooth", 5), pdg);
  const Focus fs = smooth.next();
  for (double b : fs.beta) CHECK(b > 0.0);

  RefocusStream uniform = make_refocus(parse_strategy("uniform", 5), pdg);
  const Focus fu = uniform.next();
  for (double b : fu.beta) CHECK(b == 1.0);
}

TEST_CASE("the focus stream is a pure function of seed and step") {
  const ParametricPDG pdg = five_arc_pdg();
  RefocusStream a = make_refocus(parse_strategy("partial", 42), pdg);
  RefocusStream b = make_refocus(parse_strategy("partial", 42), pdg);
  RefocusStream c = make_refocus(parse_strategy("partial", 43), pdg);
  bool any_diff = false;
  for (int t = 0; t < 8; ++t) {
    const Focus fa = a.next(), fb = b.next(), fc = c.next();
    CHECK(fa.beta == fb.beta);
    any_diff |= (fa.beta != fc.beta);
  }
  CHECK(any_diff);
}

TEST_CASE("custom strategies are invoked with the step index") {
  const ParametricPDG pdg = five_arc_pdg();
  RefocusStrategy s;
  s.kind = RefocusStrategy::Kind::Custom;
  s.custom = [](int step, const ParametricPDG& p) {
    Focus f = Focus::full_attention(p, 0.0);
    f.beta[0] = static_cast<double>(step + 7);
    return f;
  };
  RefocusStream stream = make_refocus(s, pdg);
  CHECK(stream.next().beta[0] == 7.0);
  CHECK(stream.next().beta[0] == 8.0);
}

TEST_CASE("a one-focus cycle descends the masked objective monotonically") {
  ParametricPDG pdg;
  pdg.variables = {{"X", 2}};
  pdg.arcs = {learn_arc("q", "X", {0.0, 0.0}), const_arc("p1", "X", {0.9, 0.1}),
              const_arc("p2", "X", {0.2, 0.8})};
  Focus focus = Focus::full_attention(pdg, 0.0);
  focus.chi = {1.0, 0.0, 0.0};

  RefocusStrategy s;
  s.kind = RefocusStrategy::Kind::FixedCycle;
  s.cycle = {focus};

  LirRunConfig cfg;
  cfg.steps = 5;
  cfg.ode.integrator = Integrator::Euler;
  cfg.ode.step_scale = 0.05;
  cfg.inner = InnerSolverConfig::stationary();

  const LirTrace trace = lir_run(pdg, s, cfg);
  REQUIRE(trace.steps.size() == 5);
  CHECK_FALSE(trace.aborted);
  for (std::size_t t = 1; t < trace.steps.size(); ++t)
    CHECK(trace.steps[t].value <= trace.steps[t - 1].value + 1e-6);
  CHECK(trace.final_value < trace.initial_value);
}

TEST_CASE("runs reset parameters and are reproducible") {
  ParametricPDG pdg = five_arc_pdg();
  pdg.arcs.push_back(learn_arc("q", "A", {0.0, 0.0}));

  auto run_once = [&]() {
    ParametricPDG copy = pdg;
    copy.arcs.back().cpd.params = {3.0, -1.0};  // junk that lir_run must reset
    RefocusStrategy s = parse_strategy("uniform", 9);
    LirRunConfig cfg;
    cfg.steps = 4;
    return lir_run(copy, s, cfg);
  };

  const LirTrace t1 = run_once();
  const LirTrace t2 = run_once();
  REQUIRE(t1.steps.size() == 4);
  CHECK(t1.initial_value == t2.initial_value);
  CHECK(t1.final_value == t2.final_value);
  for (std::size_t i = 0; i < t1.steps.size(); ++i) {
    CHECK(t1.steps[i].param_hash == t2.steps[i].param_hash);
    CHECK(t1.steps[i].value == t2.steps[i].value);
  }

  ParametricPDG fresh = pdg;
  const double at_defaults =
      solve_inconsistency(fresh, Focus::full_attention(fresh, 0.0), InnerSolverConfig::cold())
          .value;
  CHECK(t1.initial_value == doctest::Approx(at_defaults).epsilon(1e-9));
}

TEST_CASE("runs abort after repeated step failures") {
  ParametricPDG pdg;
  pdg.variables = {{"X", 2}};
  pdg.arcs = {learn_arc("q", "X", {0.0, 0.0}), const_arc("p", "X", {1.0, 0.0})};
  Focus poison = Focus::full_attention(pdg, 0.0);
  poison.beta[1] = -1.0;  // negative attention over a zero cpd cell is unbounded below

  RefocusStrategy s;
  s.kind = RefocusStrategy::Kind::FixedCycle;
  s.cycle = {poison};
  LirRunConfig cfg;
  cfg.steps = 10;
  const LirTrace trace = lir_run(pdg, s, cfg);
  CHECK(trace.aborted);
  CHECK(trace.steps.size() == 3);
  for (const auto& rec : trace.steps) CHECK_FALSE(rec.ok);
}

TEST_CASE("resolution percentage comes from the bracketing values") {
  LirTrace trace;
  trace.initial_value = 0.5;
  trace.final_value = 0.1;
  CHECK(resolution_percentage(trace) == doctest::Approx(80.0));
  trace.initial_value = 0.0;
  CHECK_THROWS_AS(resolution_percentage(trace), std::invalid_argument);
}

TEST_CASE("tv distortion realigns scopes before comparing") {
  JointTable a;
  a.scope = {"X", "Y"};
  a.sizes = {2, 2};
  a.probs = {0.1, 0.2, 0.3, 0.4};

  JointTable b;  // same distribution, transposed scope
  b.scope = {"Y", "X"};
  b.sizes = {2, 2};
  b.probs = {0.1, 0.3, 0.2, 0.4};
  CHECK(tv_distortion(a, b) == doctest::Approx(0.0).epsilon(1e-12));

  JointTable u = JointTable::uniform({"X", "Y"}, {2, 2});
  CHECK(tv_distortion(a, u) == doctest::Approx(0.2).epsilon(1e-12));

  JointTable wrong;
  wrong.scope = {"X"};
  wrong.sizes = {2};
  wrong.probs = {0.5, 0.5};
  CHECK_THROWS_AS(tv_distortion(a, wrong), std::invalid_argument);
}
