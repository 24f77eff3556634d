#pragma once

#include <string>

#include "lir/pdg.hpp"

namespace lir::io {

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// PDG JSON: {variables: [{id, size}], arcs: [{id, src, tgt, kind, table|params,
// alpha, beta, features?}]}. Parsing stops at the first violated invariant.
ParametricPDG pdg_from_json_text(const std::string& text);
std::string pdg_to_json_text(const ParametricPDG& pdg);
ParametricPDG load_pdg(const std::string& path);
void save_pdg(const ParametricPDG& pdg, const std::string& path);

std::string joint_to_json_text(const JointTable& mu);

}  // namespace lir::io
