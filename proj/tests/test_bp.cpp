#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "lir/bp.hpp"

using namespace lir;

namespace {

/// A - f - B - g - C with mixed domain sizes and a unary factor on B.
FactorGraph small_tree() {
  FactorGraph g;
  g.variables = {{"A", 2}, {"B", 3}, {"C", 2}};
  g.factors = {{"f", {"A", "B"}, {1.2, 0.4, 0.9, 0.3, 2.0, 0.7}},
               {"g", {"B", "C"}, {0.5, 1.5, 0.8, 0.2, 1.1, 0.6}},
               {"u", {"B"}, {0.9, 0.4, 1.7}}};
  return g;
}

FactorGraph four_cycle() {
  FactorGraph g;
  g.variables = {{"A", 2}, {"B", 2}, {"C", 2}, {"D", 2}};
  g.factors = {{"ab", {"A", "B"}, {1.4, 0.6, 0.5, 1.2}},
               {"bc", {"B", "C"}, {0.8, 1.6, 1.1, 0.3}},
               {"cd", {"C", "D"}, {0.7, 0.9, 1.8, 0.4}},
               {"da", {"D", "A"}, {1.0, 0.5, 0.6, 1.3}}};
  return g;
}

double max_gap(const MessageState& a, const MessageState& b) {
  double worst = 0;
  for (std::size_t f = 0; f < a.to_factor.size(); ++f)
    for (std::size_t s = 0; s < a.to_factor[f].size(); ++s) {
      for (std::size_t i = 0; i < a.to_factor[f][s].size(); ++i)
        worst = std::max(worst, std::abs(a.to_factor[f][s][i] - b.to_factor[f][s][i]));
      for (std::size_t i = 0; i < a.from_factor[f][s].size(); ++i)
        worst = std::max(worst, std::abs(a.from_factor[f][s][i] - b.from_factor[f][s][i]));
    }
  return worst;
}

}  // namespace

TEST_CASE("factor graphs validate their tables") {
  FactorGraph g = small_tree();
  CHECK_NOTHROW(g.validate());

  FactorGraph zero = small_tree();
  zero.factors[1].table[2] = 0.0;
  CHECK_THROWS_WITH_AS(zero.validate(), doctest::Contains("g"), std::invalid_argument);

  FactorGraph unknown = small_tree();
  unknown.factors[0].scope[1] = "Q";
  CHECK_THROWS_AS(unknown.validate(), std::invalid_argument);

  FactorGraph short_table = small_tree();
  short_table.factors[2].table.pop_back();
  CHECK_THROWS_AS(short_table.validate(), std::invalid_argument);
}

TEST_CASE("the flooding schedule sweeps messages then reads beliefs") {
  const FactorGraph g = small_tree();
  const auto schedule = flooding_schedule(g, 2);
  // 5 (factor, slot) pairs; each sweep sends both directions, then 3 readouts.
  REQUIRE(schedule.size() == 2 * (5 + 5) + 3);
  for (int t = 0; t < 5; ++t) CHECK(schedule[t].kind == BpFocusStep::Kind::VarToFactor);
  for (int t = 5; t < 10; ++t) CHECK(schedule[t].kind == BpFocusStep::Kind::FactorToVar);
  for (std::size_t t = schedule.size() - 3; t < schedule.size(); ++t)
    CHECK(schedule[t].kind == BpFocusStep::Kind::Beliefs);
}

TEST_CASE("resolving message foci reproduces sum-product step for step on a tree") {
  const FactorGraph g = small_tree();
  const auto full = flooding_schedule(g, 3);

  MessageState lir_state = MessageState::uniform(g);
  MessageState ref_state = MessageState::uniform(g);
  for (const auto& step : full) {
    lir_state = bp_via_lir(g, {step}, lir_state);
    ref_state = bp_reference(g, {step}, ref_state);
    CHECK(max_gap(lir_state, ref_state) < 1e-8);
  }
  for (std::size_t v = 0; v < g.variables.size(); ++v) {
    REQUIRE(lir_state.beliefs[v].size() == ref_state.beliefs[v].size());
    for (std::size_t i = 0; i < lir_state.beliefs[v].size(); ++i)
      CHECK(lir_state.beliefs[v][i] == doctest::Approx(ref_state.beliefs[v][i]).epsilon(1e-8));
  }
}

TEST_CASE("resolving message foci reproduces sum-product step for step on a cycle") {
  const FactorGraph g = four_cycle();
  const auto full = flooding_schedule(g, 2);

  MessageState lir_state = MessageState::uniform(g);
  MessageState ref_state = MessageState::uniform(g);
  for (const auto& step : full) {
    lir_state = bp_via_lir(g, {step}, lir_state);
    ref_state = bp_reference(g, {step}, ref_state);
    CHECK(max_gap(lir_state, ref_state) < 1e-8);
  }
}

TEST_CASE("converged tree beliefs are the exact marginals") {
  const FactorGraph g = small_tree();
  const MessageState state = bp_via_lir(g, flooding_schedule(g, 6));
  const auto exact = brute_force_marginals(g);
  REQUIRE(state.beliefs.size() == exact.size());
  for (std::size_t v = 0; v < exact.size(); ++v)
    for (std::size_t i = 0; i < exact[v].size(); ++i)
      CHECK(state.beliefs[v][i] == doctest::Approx(exact[v][i]).epsilon(1e-8));
}

TEST_CASE("reference sum-product on a tree also lands on the exact marginals") {
  const FactorGraph g = small_tree();
  const MessageState state = bp_reference(g, flooding_schedule(g, 6));
  const auto exact = brute_force_marginals(g);
  for (std::size_t v = 0; v < exact.size(); ++v)
    for (std::size_t i = 0; i < exact[v].size(); ++i)
      CHECK(state.beliefs[v][i] == doctest::Approx(exact[v][i]).epsilon(1e-10));
}

TEST_CASE("belief readout multiplies incoming messages") {
  const FactorGraph g = small_tree();
  MessageState state = MessageState::uniform(g);
  // Hand-set the three messages into B.
  state.from_factor[0][1] = {0.2, 0.3, 0.5};
  state.from_factor[1][0] = {0.6, 0.1, 0.3};
  state.from_factor[2][0] = {0.25, 0.5, 0.25};
  const auto beliefs = beliefs_from_messages(g, state);
  std::vector<double> expect = {0.2 * 0.6 * 0.25, 0.3 * 0.1 * 0.5, 0.5 * 0.3 * 0.25};
  const double z = expect[0] + expect[1] + expect[2];
  for (auto& e : expect) e /= z;
  for (int i = 0; i < 3; ++i) CHECK(beliefs[1][i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("a single-factor graph is solved by one sweep") {
  FactorGraph g;
  g.variables = {{"X", 2}, {"Y", 2}};
  g.factors = {{"f", {"X", "Y"}, {0.1, 0.2, 0.3, 0.4}}};
  const MessageState state = bp_via_lir(g, flooding_schedule(g, 1));
  const auto exact = brute_force_marginals(g);
  for (std::size_t v = 0; v < exact.size(); ++v)
    for (std::size_t i = 0; i < exact[v].size(); ++i)
      CHECK(state.beliefs[v][i] == doctest::Approx(exact[v][i]).epsilon(1e-8));

  CHECK(exact[0][0] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(exact[1][1] == doctest::Approx(0.6).epsilon(1e-12));
}
