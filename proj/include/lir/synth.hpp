#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lir/engine.hpp"
#include "lir/pdg.hpp"

namespace lir {

struct GeneratorSpec {
  std::string name;  // "chain_<n>v_<m>e"
  int n_vars = 4;
  int m_edges = 3;
  std::uint64_t seed = 0;
};

/// Parses "chain_<n>v_<m>e" names.
GeneratorSpec parse_generator_spec(const std::string& name, std::uint64_t seed);

/// Random inconsistent PDG: floor(m/2) chain edges i -> i+1, the remaining
/// edges aimed at nodes that already have an incoming edge (distinct pairs,
/// no self-loops). Every cpd is a learnable table whose rows are drawn
/// uniformly from the probability simplex. Deterministic in spec.seed.
ParametricPDG generate_chain_pdg(const GeneratorSpec& spec);

struct SuiteCell {
  std::string pdg;
  std::string strategy;
  int seed = 0;
  double init = 0.0;
  double final_value = 0.0;
  double resolution_pct = 0.0;
  double tv = 0.0;
  double seconds = 0.0;
  long inner_iterations = 0;
  bool failed = false;
  std::string error;  // empty unless failed; not part of the CSV schema
};

struct ExperimentReport {
  std::vector<SuiteCell> cells;
};

/// Runs lir_run for every (spec, strategy, seed index) cell. Failures are
/// recorded and the suite continues.
ExperimentReport run_strategy_suite(const std::vector<GeneratorSpec>& specs,
                                    const std::vector<std::string>& strategies, int n_seeds,
                                    const LirRunConfig& cfg, std::uint64_t base_seed);

/// Fixed schema: pdg,strategy,seed,init,final,resolution_pct,tv,seconds.
std::string report_to_csv(const ExperimentReport& report);

double mean_resolution(const ExperimentReport& report, const std::string& strategy);
double mean_tv(const ExperimentReport& report, const std::string& strategy);

}  // namespace lir
