#include <cstdio>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "lir/io.hpp"
#include "lir/pdg.hpp"

using namespace lir;

namespace {

ParametricPDG sample_pdg() {
  ParametricPDG pdg;
  pdg.variables = {{"X", 2}, {"Y", 3}};
  Hyperarc a;
  a.id = "belief";
  a.targets = {"X"};
  a.cpd.kind = CpdKind::ConstantTable;
  a.cpd.params = {0.25, 0.75};
  a.cpd.default_params = a.cpd.params;
  a.beta = 2.0;
  Hyperarc b;
  b.id = "link";
  b.sources = {"X"};
  b.targets = {"Y"};
  b.cpd.kind = CpdKind::LearnableTable;
  b.cpd.params = {0.1, -0.2, 0.3, 0.0, 0.5, -0.5};
  b.cpd.default_params = b.cpd.params;
  b.alpha = 0.5;
  pdg.arcs = {a, b};
  return pdg;
}

}  // namespace

TEST_CASE("pdg json round trip preserves structure and parameters") {
  const ParametricPDG pdg = sample_pdg();
  const std::string text = io::pdg_to_json_text(pdg);
  const ParametricPDG back = io::pdg_from_json_text(text);

  REQUIRE(back.variables.size() == 2);
  CHECK(back.variables[1].id == "Y");
  CHECK(back.variables[1].domain_size == 3);
  REQUIRE(back.arcs.size() == 2);
  CHECK(back.arcs[0].beta == doctest::Approx(2.0));
  CHECK(back.arcs[1].alpha == doctest::Approx(0.5));
  CHECK(back.arcs[1].cpd.kind == CpdKind::LearnableTable);
  CHECK(back.arcs[1].cpd.params == pdg.arcs[1].cpd.params);
  CHECK(back.arcs[1].sources == pdg.arcs[1].sources);
}

TEST_CASE("serialization is stable across a round trip") {
  const ParametricPDG pdg = sample_pdg();
  const std::string once = io::pdg_to_json_text(pdg);
  const std::string twice = io::pdg_to_json_text(io::pdg_from_json_text(once));
  CHECK(once == twice);
}

TEST_CASE("file save and load round trip") {
  const ParametricPDG pdg = sample_pdg();
  const std::string path = "io_roundtrip_test.json";
  io::save_pdg(pdg, path);
  const ParametricPDG back = io::load_pdg(path);
  CHECK(io::pdg_to_json_text(back) == io::pdg_to_json_text(pdg));
  std::remove(path.c_str());
}

TEST_CASE("load failures and malformed documents throw") {
  CHECK_THROWS(io::load_pdg("definitely_missing_file.json"));
  CHECK_THROWS(io::pdg_from_json_text("not json at all"));
  CHECK_THROWS(io::pdg_from_json_text("[1, 2, 3]"));
}

TEST_CASE("parsing stops at the first violated invariant") {
  // Non-positive domain size.
  CHECK_THROWS_AS(io::pdg_from_json_text(R"({"variables": [{"id": "X", "size": 0}], "arcs": []})"),
                  std::invalid_argument);
  // Arc over an unknown variable.
  CHECK_THROWS_AS(io::pdg_from_json_text(R"({
    "variables": [{"id": "X", "size": 2}],
    "arcs": [{"id": "a", "src": [], "tgt": ["Q"], "kind": "constant",
              "table": [0.5, 0.5], "alpha": 1, "beta": 1}]})"),
                  std::invalid_argument);
  // Row that does not normalize.
  CHECK_THROWS_AS(io::pdg_from_json_text(R"({
    "variables": [{"id": "X", "size": 2}],
    "arcs": [{"id": "a", "src": [], "tgt": ["X"], "kind": "constant",
              "table": [0.9, 0.9], "alpha": 1, "beta": 1}]})"),
                  std::invalid_argument);
  // Unknown cpd kind.
  CHECK_THROWS(io::pdg_from_json_text(R"({
    "variables": [{"id": "X", "size": 2}],
    "arcs": [{"id": "a", "src": [], "tgt": ["X"], "kind": "mystery",
              "table": [0.5, 0.5], "alpha": 1, "beta": 1}]})"));
}

TEST_CASE("error messages name the offending invariant") {
  try {
    io::pdg_from_json_text(R"({"variables": [{"id": "X", "size": -1}], "arcs": []})");
    FAIL("expected a throw");
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    CHECK(msg.find("X") != std::string::npos);
  }
}

TEST_CASE("joint table serialization carries scope, sizes, and probabilities") {
  JointTable mu;
  mu.scope = {"A"};
  mu.sizes = {2};
  mu.probs = {0.25, 0.75};
  const std::string text = io::joint_to_json_text(mu);
  CHECK(text.find("\"scope\"") != std::string::npos);
  CHECK(text.find("\"probs\"") != std::string::npos);
  CHECK(text.find("0.75") != std::string::npos);
}
