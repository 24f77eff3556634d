#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lir/pdg.hpp"

namespace lir {

/// Discrete factor graph with strictly positive factor tables.
struct FactorGraph {
  struct Factor {
    std::string id;
    std::vector<std::string> scope;
    std::vector<double> table;  // row-major over scope
  };

  std::vector<Variable> variables;
  std::vector<Factor> factors;

  int var_index(const std::string& id) const;
  std::vector<int> scope_sizes(const Factor& f) const;
  /// (factor index, slot in that factor's scope) pairs covering the variable.
  std::vector<std::pair<int, int>> incident(int var) const;
  /// Throws on non-positive entries (floor 1e-12), unknown scope variables,
  /// or table sizes that do not match the scope.
  void validate() const;
};

/// One message update (or belief readout) in a schedule.
struct BpFocusStep {
  enum class Kind { VarToFactor, FactorToVar, Beliefs };
  Kind kind = Kind::VarToFactor;
  int factor = -1;  // unused for Beliefs
  int var = -1;
};

/// Normalized positive messages per (factor, slot), in both directions.
struct MessageState {
  std::vector<std::vector<std::vector<double>>> to_factor;    // [factor][slot] over the variable
  std::vector<std::vector<std::vector<double>>> from_factor;  // [factor][slot]
  std::vector<std::vector<double>> beliefs;                   // [var]; empty until a Beliefs step

  static MessageState uniform(const FactorGraph& g);
};

/// Per sweep: every variable-to-factor message, then every factor-to-variable
/// message; a final pass of belief readouts closes the schedule.
std::vector<BpFocusStep> flooding_schedule(const FactorGraph& g, int sweeps);

/// Runs the schedule by building, for each step, the small PDG whose
/// stationary point under full control of the focused message is the
/// sum-product update (attention gamma = 1, context arcs weighted alpha =
/// beta = 1), and driving it with the generic full-control machinery.
MessageState bp_via_lir(const FactorGraph& g, const std::vector<BpFocusStep>& schedule,
                        MessageState state);
MessageState bp_via_lir(const FactorGraph& g, const std::vector<BpFocusStep>& schedule);

/// Textbook sum-product applied to the same schedule, for lockstep checks.
MessageState bp_reference(const FactorGraph& g, const std::vector<BpFocusStep>& schedule,
                          MessageState state);
MessageState bp_reference(const FactorGraph& g, const std::vector<BpFocusStep>& schedule);

/// b_X proportional to the product of all incoming factor messages.
std::vector<std::vector<double>> beliefs_from_messages(const FactorGraph& g,
                                                       const MessageState& state);

/// Exact marginals of the normalized factor product, by enumeration.
std::vector<std::vector<double>> brute_force_marginals(const FactorGraph& g);

}  // namespace lir
