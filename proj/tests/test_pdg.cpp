#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "lir/pdg.hpp"

using namespace lir;

namespace {

ParametricPDG two_var_pdg() {
  ParametricPDG pdg;
  pdg.variables = {{"A", 2}, {"B", 2}};
  Hyperarc prior;
  prior.id = "prior";
  prior.targets = {"A"};
  prior.cpd.kind = CpdKind::ConstantTable;
  prior.cpd.params = {0.3, 0.7};
  prior.cpd.default_params = prior.cpd.params;
  Hyperarc cond;
  cond.id = "cond";
  cond.sources = {"A"};
  cond.targets = {"B"};
  cond.cpd.kind = CpdKind::ConstantTable;
  cond.cpd.params = {0.9, 0.1, 0.2, 0.8};
  cond.cpd.default_params = cond.cpd.params;
  pdg.arcs = {prior, cond};
  return pdg;
}

JointTable table_ab() {
  JointTable mu;
  mu.scope = {"A", "B"};
  mu.sizes = {2, 2};
  mu.probs = {0.1, 0.2, 0.3, 0.4};
  return mu;
}

}  // namespace

TEST_CASE("joint_index and unravel_index are row-major inverses") {
  const std::vector<int> sizes = {2, 3};
  CHECK(joint_index(sizes, {0, 0}) == 0);
  CHECK(joint_index(sizes, {0, 2}) == 2);
  CHECK(joint_index(sizes, {1, 2}) == 5);
  std::vector<int> out(2);
  for (std::size_t flat = 0; flat < 6; ++flat) {
    unravel_index(flat, sizes, out);
    CHECK(joint_index(sizes, out) == flat);
  }
}

TEST_CASE("uniform joint table is valid and flat") {
  const JointTable u = JointTable::uniform({"A", "B"}, {2, 3});
  REQUIRE(u.n_cells() == 6);
  for (double p : u.probs) CHECK(p == doctest::Approx(1.0 / 6));
  u.validate();
  CHECK(u.scope_index("B") == 1);
  CHECK_THROWS_AS(u.scope_index("Z"), std::invalid_argument);
}

TEST_CASE("joint table validation rejects bad mass") {
  JointTable mu = table_ab();
  mu.probs[0] = -0.1;
  CHECK_THROWS_AS(mu.validate(), std::invalid_argument);
  mu = table_ab();
  mu.probs[3] = 0.9;
  CHECK_THROWS_AS(mu.validate(), std::invalid_argument);
}

TEST_CASE("marginal reduces and reorders") {
  const JointTable mu = table_ab();
  const JointTable ma = marginal(mu, {"A"});
  REQUIRE(ma.probs.size() == 2);
  CHECK(ma.probs[0] == doctest::Approx(0.3));
  CHECK(ma.probs[1] == doctest::Approx(0.7));

  const JointTable mb = marginal(mu, {"B"});
  CHECK(mb.probs[0] == doctest::Approx(0.4));
  CHECK(mb.probs[1] == doctest::Approx(0.6));

  // Reordered scope transposes the table.
  const JointTable ba = marginal(mu, {"B", "A"});
  REQUIRE(ba.scope[0] == "B");
  CHECK(ba.probs[joint_index(ba.sizes, {1, 0})] == doctest::Approx(0.2));
  CHECK(ba.probs[joint_index(ba.sizes, {0, 1})] == doctest::Approx(0.3));
}

TEST_CASE("conditional normalizes rows and fills empty rows uniformly") {
  const JointTable mu = table_ab();
  const auto c = conditional(mu, {"B"}, {"A"});
  REQUIRE(c.size() == 4);
  CHECK(c[0] == doctest::Approx(1.0 / 3));
  CHECK(c[1] == doctest::Approx(2.0 / 3));
  CHECK(c[2] == doctest::Approx(3.0 / 7));
  CHECK(c[3] == doctest::Approx(4.0 / 7));

  JointTable degenerate = table_ab();
  degenerate.probs = {0.0, 0.0, 0.5, 0.5};
  const auto d = conditional(degenerate, {"B"}, {"A"});
  CHECK(d[0] == doctest::Approx(0.5));
  CHECK(d[1] == doctest::Approx(0.5));

  // Unconditional form: single row.
  const auto m = conditional(mu, {"A"}, {});
  REQUIRE(m.size() == 2);
  CHECK(m[0] == doctest::Approx(0.3));
}

TEST_CASE("cpd_table realizes each table parameterization") {
  ParametricPDG pdg = two_var_pdg();
  const auto rows = pdg.cpd_table(pdg.arc("cond"));
  CHECK(rows == std::vector<double>{0.9, 0.1, 0.2, 0.8});

  Hyperarc learn;
  learn.id = "learn";
  learn.sources = {"A"};
  learn.targets = {"B"};
  learn.cpd.kind = CpdKind::LearnableTable;
  learn.cpd.params = {std::log(0.25), std::log(0.75), 0.0, 0.0};
  learn.cpd.default_params = learn.cpd.params;
  pdg.arcs.push_back(learn);
  const auto soft = pdg.cpd_table(pdg.arc("learn"));
  CHECK(soft[0] == doctest::Approx(0.25));
  CHECK(soft[1] == doctest::Approx(0.75));
  CHECK(soft[2] == doctest::Approx(0.5));
  CHECK(soft[3] == doctest::Approx(0.5));

  Hyperarc lin;
  lin.id = "lin";
  lin.sources = {"A"};
  lin.targets = {"B"};
  lin.cpd.kind = CpdKind::LinearSoftmax;
  lin.cpd.feat_dim = 1;
  lin.cpd.features = {1.0, -1.0};       // feature per source config
  lin.cpd.params = {0.4, -0.6};         // 1 x 2 weight matrix
  lin.cpd.default_params = lin.cpd.params;
  pdg.arcs.push_back(lin);
  const auto linrows = pdg.cpd_table(pdg.arc("lin"));
  const double z0 = std::exp(0.4) + std::exp(-0.6);
  CHECK(linrows[0] == doctest::Approx(std::exp(0.4) / z0));
  const double z1 = std::exp(-0.4) + std::exp(0.6);
  CHECK(linrows[3] == doctest::Approx(std::exp(0.6) / z1));
}

TEST_CASE("validate names the first violated invariant") {
  ParametricPDG pdg = two_var_pdg();
  pdg.validate();

  ParametricPDG dup = pdg;
  dup.variables.push_back({"A", 2});
  CHECK_THROWS_AS(dup.validate(), std::invalid_argument);

  ParametricPDG ghost = pdg;
  ghost.arcs[1].sources = {"Q"};
  CHECK_THROWS_AS(ghost.validate(), std::invalid_argument);

  ParametricPDG shape = pdg;
  shape.arcs[0].cpd.params = {0.5, 0.25, 0.25};
  CHECK_THROWS_AS(shape.validate(), std::invalid_argument);

  ParametricPDG domain = pdg;
  domain.variables[0].domain_size = 0;
  CHECK_THROWS_AS(domain.validate(), std::invalid_argument);

  ParametricPDG rows = pdg;
  rows.arcs[0].cpd.params = {0.6, 0.6};
  CHECK_THROWS_AS(rows.validate(), std::invalid_argument);
}

TEST_CASE("joint_from_cpds multiplies a Bayes-net shaped arc set") {
  const ParametricPDG pdg = two_var_pdg();
  const JointTable mu = joint_from_cpds(pdg, {"prior", "cond"});
  REQUIRE(mu.scope == std::vector<std::string>{"A", "B"});
  CHECK(mu.probs[joint_index(mu.sizes, {0, 0})] == doctest::Approx(0.3 * 0.9));
  CHECK(mu.probs[joint_index(mu.sizes, {0, 1})] == doctest::Approx(0.3 * 0.1));
  CHECK(mu.probs[joint_index(mu.sizes, {1, 0})] == doctest::Approx(0.7 * 0.2));
  CHECK(mu.probs[joint_index(mu.sizes, {1, 1})] == doctest::Approx(0.7 * 0.8));
  mu.validate();

  // Missing a variable's arc is not a Bayes-net cover.
  CHECK_THROWS_AS(joint_from_cpds(pdg, {"cond"}), std::invalid_argument);
}

TEST_CASE("parameter_hash tracks learnable parameters only") {
  ParametricPDG pdg = two_var_pdg();
  Hyperarc learn;
  learn.id = "learn";
  learn.targets = {"A"};
  learn.cpd.kind = CpdKind::LearnableTable;
  learn.cpd.params = {0.0, 0.0};
  learn.cpd.default_params = learn.cpd.params;
  pdg.arcs.push_back(learn);

  const std::uint64_t h0 = parameter_hash(pdg);
  CHECK(parameter_hash(pdg) == h0);

  pdg.arcs[0].cpd.params = {0.4, 0.6};  // constant arc: not hashed
  CHECK(parameter_hash(pdg) == h0);

  pdg.arcs[2].cpd.params[0] = 0.125;
  CHECK(parameter_hash(pdg) != h0);
}

TEST_CASE("reset_parameters restores defaults on learnable arcs") {
  ParametricPDG pdg = two_var_pdg();
  Hyperarc learn;
  learn.id = "learn";
  learn.targets = {"A"};
  learn.cpd.kind = CpdKind::LearnableTable;
  learn.cpd.params = {0.0, 0.0};
  learn.cpd.default_params = {1.0, -1.0};
  pdg.arcs.push_back(learn);
  pdg.reset_parameters();
  CHECK(pdg.arcs[2].cpd.params == std::vector<double>{1.0, -1.0});
}

TEST_CASE("full_attention focus mirrors stored weights and validates") {
  ParametricPDG pdg = two_var_pdg();
  pdg.arcs[1].beta = 0.25;
  pdg.arcs[1].alpha = 0.5;
  const Focus f = Focus::full_attention(pdg, 0.75);
  REQUIRE(f.beta.size() == 2);
  CHECK(f.beta[1] == doctest::Approx(0.25));
  CHECK(f.alpha[1] == doctest::Approx(0.5));
  CHECK(f.gamma == doctest::Approx(0.75));
  CHECK(f.chi == std::vector<double>{0.0, 0.0});
  f.validate(pdg);

  Focus bad = f;
  bad.beta.pop_back();
  CHECK_THROWS_AS(bad.validate(pdg), std::invalid_argument);
}
