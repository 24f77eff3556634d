#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "lir/inconsistency.hpp"
#include "lir/triad.hpp"

using namespace lir;

namespace {

TriadModel small_model() {
  TriadModel m;
  m.d = 2;
  m.k = 3;
  m.w = {0.5, -0.2, 0.1, 0.3, 0.4, -0.6};
  return m;
}

}  // namespace

TEST_CASE("classifier forward pass matches hand arithmetic") {
  const TriadModel m = small_model();
  const std::vector<double> x = {1.0, -1.0};

  const auto z = m.logits(x);
  CHECK(z[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(z[1] == doctest::Approx(-0.6).epsilon(1e-12));
  CHECK(z[2] == doctest::Approx(0.7).epsilon(1e-12));

  const double e0 = std::exp(0.2), e1 = std::exp(-0.6), e2 = std::exp(0.7);
  const double s = e0 + e1 + e2;
  const auto p = m.predict(x);
  CHECK(p[0] == doctest::Approx(e0 / s).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(e1 / s).epsilon(1e-12));
  CHECK(p[2] == doctest::Approx(e2 / s).epsilon(1e-12));

  const std::vector<double> y = {0.2, 0.5, 0.3};
  const double expected =
      -(0.2 * std::log(e0 / s) + 0.5 * std::log(e1 / s) + 0.3 * std::log(e2 / s));
  CHECK(m.nll(x, y) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("sample validation names the offending part") {
  const TriadModel m = small_model();
  const std::vector<double> y = {1.0, 0.0, 0.0};
  TriadConfig cfg;
  CHECK_THROWS_AS(triad_resolve(m, {1.0}, y, TriadControl::Theta, cfg), std::invalid_argument);
  CHECK_THROWS_AS(triad_resolve(m, {1.0, 0.0}, {0.5, 0.5}, TriadControl::Theta, cfg),
                  std::invalid_argument);
  CHECK_THROWS_AS(triad_resolve(m, {1.0, 0.0}, {0.7, 0.6, -0.3}, TriadControl::Theta, cfg),
                  std::invalid_argument);
  TriadModel broken = m;
  broken.w.pop_back();
  CHECK_THROWS_AS(triad_resolve(broken, {1.0, 0.0}, y, TriadControl::Theta, cfg),
                  std::invalid_argument);
}

TEST_CASE("weight control descends the cross-entropy") {
  const TriadModel m = small_model();
  const std::vector<double> x = {1.0, -0.5};
  const std::vector<double> y = {0.0, 1.0, 0.0};
  const TriadResult res = triad_resolve(m, x, y, TriadControl::Theta, TriadConfig{});
  REQUIRE(res.objective.size() == 51);
  for (std::size_t t = 1; t < res.objective.size(); ++t)
    CHECK(res.objective[t] <= res.objective[t - 1] + 1e-12);
  CHECK(res.objective.back() < res.objective.front());
  CHECK(res.x == x);  // only the controlled corner moves
  CHECK(res.y == y);
  const auto p = res.model.predict(x);
  CHECK(p[1] > m.predict(x)[1]);
}

TEST_CASE("input control descends the cross-entropy") {
  const TriadModel m = small_model();
  const std::vector<double> x = {0.5, 0.5};
  const std::vector<double> y = {0.0, 0.0, 1.0};
  const TriadResult res = triad_resolve(m, x, y, TriadControl::Input, TriadConfig{});
  for (std::size_t t = 1; t < res.objective.size(); ++t)
    CHECK(res.objective[t] <= res.objective[t - 1] + 1e-12);
  CHECK(res.model.w == m.w);
  CHECK(res.y == y);
  CHECK(res.x != x);
}

TEST_CASE("full label control snaps to the predictive distribution") {
  const TriadModel m = small_model();
  const std::vector<double> x = {1.0, -1.0};
  const std::vector<double> y = {0.6, 0.2, 0.2};
  TriadConfig cfg;
  cfg.full_control = true;
  const TriadResult res = triad_resolve(m, x, y, TriadControl::Label, cfg);
  REQUIRE(res.objective.size() == 2);
  CHECK(res.objective[0] > 0.0);
  CHECK(res.objective[1] == 0.0);
  const auto p = m.predict(x);
  for (int c = 0; c < m.k; ++c) CHECK(res.y[c] == p[c]);
}

TEST_CASE("gradual label control shrinks the divergence toward zero") {
  const TriadModel m = small_model();
  const std::vector<double> x = {1.0, -1.0};
  const std::vector<double> y = {0.6, 0.2, 0.2};
  TriadConfig cfg;
  cfg.steps = 200;
  const TriadResult res = triad_resolve(m, x, y, TriadControl::Label, cfg);
  CHECK(res.objective.front() > 0.01);
  CHECK(res.objective.back() < 0.05 * res.objective.front());
  for (double v : res.objective) CHECK(v > -1e-12);
}

TEST_CASE("adversarial cycles alternate convergent attack and patch phases") {
  const TriadModel m = small_model();
  const std::vector<double> x = {1.0, -1.0};
  AdversarialCycleConfig cfg;
  cfg.cycles = 2;
  const AdversarialTrace tr = adversarial_cycle(m, x, 2, 1, cfg);

  const std::size_t attack_len = std::size_t(cfg.attack_steps) + 1;
  const std::size_t patch_len = std::size_t(cfg.patch_steps) + 1;
  REQUIRE(tr.attack_objective.size() == cfg.cycles * attack_len);
  REQUIRE(tr.patch_objective.size() == cfg.cycles * patch_len);

  for (int c = 0; c < cfg.cycles; ++c) {
    for (std::size_t t = 1; t < attack_len; ++t)
      CHECK(tr.attack_objective[c * attack_len + t] <=
            tr.attack_objective[c * attack_len + t - 1] + 1e-10);
    for (std::size_t t = 1; t < patch_len; ++t)
      CHECK(tr.patch_objective[c * patch_len + t] <=
            tr.patch_objective[c * patch_len + t - 1] + 1e-10);
  }
  // The patched model classifies the perturbed point correctly again.
  const auto p = tr.model.predict(tr.x_adv);
  CHECK(p[2] > p[1]);

  CHECK_THROWS_AS(adversarial_cycle(m, x, 3, 0, cfg), std::invalid_argument);
  CHECK_THROWS_AS(adversarial_cycle(m, x, 0, -1, cfg), std::invalid_argument);
}

TEST_CASE("the dataset view's envelope gradient is the mean nll gradient") {
  TriadModel m;
  m.d = 2;
  m.k = 2;
  m.w = {0.4, -0.1, -0.3, 0.2};
  const std::vector<std::vector<double>> xs = {{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}};
  const std::vector<int> labels = {0, 1, 0};

  const ParametricPDG pdg = make_classification_pdg(m, xs, labels);
  REQUIRE(pdg.arcs.size() == 2);
  CHECK(pdg.arcs[0].cpd.kind == CpdKind::ConstantTable);
  CHECK(pdg.arcs[1].cpd.kind == CpdKind::LinearSoftmax);

  Focus focus = Focus::full_attention(pdg, 0.0);
  focus.chi = {0.0, 1.0};
  const JointTable mu = empirical_joint(3, 2, labels);
  const ParamGrad g = envelope_grad(pdg, focus, mu);
  REQUIRE(g.by_arc[0].empty());
  REQUIRE(g.by_arc[1].size() == m.w.size());

  const int n = 3;
  for (int f = 0; f < m.d; ++f)
    for (int c = 0; c < m.k; ++c) {
      double expect = 0;
      for (int i = 0; i < n; ++i) {
        const auto p = m.predict(xs[i]);
        expect += xs[i][f] * (p[c] - (labels[i] == c ? 1.0 : 0.0));
      }
      expect /= n;
      CHECK(g.by_arc[1][std::size_t(f) * m.k + c] == doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("the empirical joint is the normalized point-mass table") {
  const JointTable mu = empirical_joint(3, 2, {0, 1, 0});
  mu.validate();
  CHECK(mu.sizes == std::vector<int>{3, 2});
  CHECK(mu.probs == std::vector<double>{1.0 / 3, 0.0, 0.0, 1.0 / 3, 1.0 / 3, 0.0});

  const TriadModel m = small_model();
  CHECK_THROWS_AS(make_classification_pdg(m, {}, {}), std::invalid_argument);
  CHECK_THROWS_AS(make_classification_pdg(m, {{1.0, 0.0}}, {7}), std::invalid_argument);
  CHECK_THROWS_AS(make_classification_pdg(m, {{1.0}}, {0}), std::invalid_argument);
}
