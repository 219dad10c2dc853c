#pragma once

#include "rdv/dynamics.hpp"

#include <yaml-cpp/yaml.h>

#include <Eigen/Dense>

#include <initializer_list>
#include <set>
#include <string>

namespace rdv::yaml {

inline void check_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!node.IsMap()) throw ConfigError(where + ": expected a mapping");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

inline const YAML::Node require(const YAML::Node& node, const std::string& where, const char* key) {
  const YAML::Node v = node[key];
  if (!v) throw ConfigError(where + ": missing key '" + key + "'");
  return v;
}

inline double as_double(const YAML::Node& v, const std::string& where) {
  try {
    return v.as<double>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where + ": expected a number");
  }
}

inline Eigen::MatrixXd as_matrix(const YAML::Node& v, const std::string& where) {
  if (!v.IsSequence() || v.size() == 0) throw ConfigError(where + ": expected a list of rows");
  const auto rows = static_cast<Eigen::Index>(v.size());
  Eigen::Index cols = -1;
  Eigen::MatrixXd M;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const YAML::Node row = v[static_cast<size_t>(i)];
    if (!row.IsSequence()) throw ConfigError(where + ": expected a list of rows");
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(row.size());
      if (cols == 0) throw ConfigError(where + ": empty row");
      M.resize(rows, cols);
    } else if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError(where + ": ragged rows");
    }
    for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = as_double(row[static_cast<size_t>(j)], where);
  }
  return M;
}

inline void emit_matrix(YAML::Emitter& out, const Eigen::MatrixXd& M) {
  out << YAML::BeginSeq;
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    out << YAML::Flow << YAML::BeginSeq;
    for (Eigen::Index j = 0; j < M.cols(); ++j) out << M(i, j);
    out << YAML::EndSeq;
  }
  out << YAML::EndSeq;
}

inline void configure(YAML::Emitter& out) { out.SetDoublePrecision(17); }

}  // namespace rdv::yaml
