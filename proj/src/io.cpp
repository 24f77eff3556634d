#include "lir/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace lir::io {

using json = nlohmann::ordered_json;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
}

namespace {

CpdKind kind_from_string(const std::string& s, const std::string& arc_id) {
  if (s == "constant") return CpdKind::ConstantTable;
  if (s == "learnable") return CpdKind::LearnableTable;
  if (s == "linear_softmax") return CpdKind::LinearSoftmax;
  throw std::runtime_error("arc '" + arc_id + "': unknown cpd kind '" + s +
                           "' (expected constant, learnable, or linear_softmax)");
}

const char* kind_to_string(CpdKind k) {
  switch (k) {
    case CpdKind::ConstantTable: return "constant";
    case CpdKind::LearnableTable: return "learnable";
    case CpdKind::LinearSoftmax: return "linear_softmax";
    case CpdKind::IsotropicGaussianMean: return "gaussian_mean";
  }
  return "?";
}

std::vector<double> flatten_rows(const json& rows, const std::string& arc_id, const char* key) {
  if (!rows.is_array() || rows.empty())
    throw std::runtime_error("arc '" + arc_id + "': '" + key + "' must be a nonempty array of rows");
  std::vector<double> flat;
  std::size_t width = 0;
  for (const auto& row : rows) {
    if (!row.is_array())
      throw std::runtime_error("arc '" + arc_id + "': '" + key + "' rows must be arrays");
    if (width == 0) width = row.size();
    if (row.size() != width)
      throw std::runtime_error("arc '" + arc_id + "': '" + key + "' rows have unequal lengths");
    for (const auto& v : row) {
      if (!v.is_number())
        throw std::runtime_error("arc '" + arc_id + "': '" + key + "' entries must be numbers");
      flat.push_back(v.get<double>());
    }
  }
  return flat;
}

json rows_to_json(const std::vector<double>& flat, std::size_t n_rows, std::size_t n_cols) {
  json rows = json::array();
  for (std::size_t r = 0; r < n_rows; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < n_cols; ++c) row.push_back(flat[r * n_cols + c]);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

ParametricPDG pdg_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("variables") || !doc.contains("arcs"))
    throw std::runtime_error("PDG document must contain 'variables' and 'arcs'");

  ParametricPDG pdg;
  for (const auto& v : doc["variables"]) {
    if (!v.contains("id") || !v.contains("size"))
      throw std::runtime_error("each variable needs 'id' and 'size'");
    Variable var;
    var.id = v["id"].get<std::string>();
    var.domain_size = v["size"].get<int>();
    pdg.variables.push_back(std::move(var));
  }

  for (const auto& a : doc["arcs"]) {
    for (const char* key : {"id", "tgt", "kind"})
      if (!a.contains(key))
        throw std::runtime_error(std::string("each arc needs '") + key + "'");
    Hyperarc arc;
    arc.id = a["id"].get<std::string>();
    if (a.contains("src"))
      for (const auto& s : a["src"]) arc.sources.push_back(s.get<std::string>());
    for (const auto& t : a["tgt"]) arc.targets.push_back(t.get<std::string>());
    arc.alpha = a.value("alpha", 1.0);
    arc.beta = a.value("beta", 1.0);
    arc.cpd.kind = kind_from_string(a["kind"].get<std::string>(), arc.id);

    switch (arc.cpd.kind) {
      case CpdKind::ConstantTable: {
        if (!a.contains("table"))
          throw std::runtime_error("arc '" + arc.id + "': constant cpds need 'table'");
        arc.cpd.params = flatten_rows(a["table"], arc.id, "table");
        break;
      }
      case CpdKind::LearnableTable: {
        if (a.contains("params")) {
          arc.cpd.params = flatten_rows(a["params"], arc.id, "params");
        } else if (a.contains("table")) {
          arc.cpd.params = flatten_rows(a["table"], arc.id, "table");
          for (double& p : arc.cpd.params) {
            if (p <= 0)
              throw std::runtime_error("arc '" + arc.id +
                                       "': probability tables for learnable cpds must be strictly "
                                       "positive to convert to logits");
            p = std::log(p);
          }
        } else {
          throw std::runtime_error("arc '" + arc.id + "': learnable cpds need 'params' or 'table'");
        }
        break;
      }
      case CpdKind::LinearSoftmax: {
        if (!a.contains("params") || !a.contains("features"))
          throw std::runtime_error("arc '" + arc.id +
                                   "': linear_softmax cpds need 'params' and 'features'");
        arc.cpd.params = flatten_rows(a["params"], arc.id, "params");
        arc.cpd.features = flatten_rows(a["features"], arc.id, "features");
        arc.cpd.feat_dim = static_cast<int>(a["params"].size());
        break;
      }
      default: break;
    }
    arc.cpd.default_params = arc.cpd.params;
    pdg.arcs.push_back(std::move(arc));
  }

  pdg.validate();
  return pdg;
}

std::string pdg_to_json_text(const ParametricPDG& pdg) {
  json doc;
  doc["variables"] = json::array();
  for (const auto& v : pdg.variables)
    doc["variables"].push_back({{"id", v.id}, {"size", v.domain_size}});
  doc["arcs"] = json::array();
  for (const auto& a : pdg.arcs) {
    json arc;
    arc["id"] = a.id;
    arc["src"] = a.sources;
    arc["tgt"] = a.targets;
    arc["kind"] = kind_to_string(a.cpd.kind);
    const std::size_t nt = pdg.n_target_configs(a);
    const std::size_t ns = a.cpd.params.size() / std::max<std::size_t>(nt, 1);
    if (a.cpd.kind == CpdKind::ConstantTable) {
      arc["table"] = rows_to_json(a.cpd.params, ns, nt);
    } else if (a.cpd.kind == CpdKind::LinearSoftmax) {
      arc["params"] = rows_to_json(a.cpd.params, static_cast<std::size_t>(a.cpd.feat_dim), nt);
      arc["features"] = rows_to_json(a.cpd.features,
                                     a.cpd.features.size() /
                                         static_cast<std::size_t>(std::max(a.cpd.feat_dim, 1)),
                                     static_cast<std::size_t>(a.cpd.feat_dim));
    } else {
      arc["params"] = rows_to_json(a.cpd.params, ns, nt);
    }
    arc["alpha"] = a.alpha;
    arc["beta"] = a.beta;
    doc["arcs"].push_back(std::move(arc));
  }
  return doc.dump(2) + "\n";
}

ParametricPDG load_pdg(const std::string& path) {
  try {
    return pdg_from_json_text(read_text_file(path));
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void save_pdg(const ParametricPDG& pdg, const std::string& path) {
  write_text_file(path, pdg_to_json_text(pdg));
}

std::string joint_to_json_text(const JointTable& mu) {
  json doc;
  doc["scope"] = mu.scope;
  doc["sizes"] = mu.sizes;
  doc["probs"] = mu.probs;
  return doc.dump();
}

}  // namespace lir::io
