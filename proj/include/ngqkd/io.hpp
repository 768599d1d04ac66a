#pragma once

// JSON and CSV persistence for states and small tables.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ngqkd/fock.hpp"

namespace ngqkd {

using json = nlohmann::json;

/// {"cutoff": n_max, "re": [...], "im": [...]} with row-major flat arrays.
inline json state_to_json(const TwoModeState& s) {
  const Matrix& m = s.matrix();
  std::vector<double> re;
  std::vector<double> im;
  re.reserve(m.size());
  im.reserve(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      re.push_back(m(i, j).real());
      im.push_back(m(i, j).imag());
    }
  return json{{"cutoff", s.cutoff().n_max()}, {"re", re}, {"im", im}};
}

inline TwoModeState state_from_json(const json& j) {
  try {
    const Cutoff c(j.at("cutoff").get<int>());
    const auto re = j.at("re").get<std::vector<double>>();
    const auto im = j.at("im").get<std::vector<double>>();
    const int n = c.two_mode_dim();
    if (re.size() != static_cast<std::size_t>(n) * n || im.size() != re.size()) {
      throw Error(ErrorKind::dimension_mismatch, "state JSON arrays do not match the cutoff");
    }
    Matrix m(n, n);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) m(i, k) = cplx(re[i * n + k], im[i * n + k]);
    return TwoModeState::validated(std::move(m), c);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::io, std::string("malformed state JSON: ") + e.what());
  }
}

inline std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::io, "cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partially written file.
inline void write_text_atomic(const std::string& path, const std::string& text) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorKind::io, "cannot write " + tmp.string());
    os << text;
    if (!os) throw Error(ErrorKind::io, "write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

inline void save_state(const std::string& path, const TwoModeState& s) {
  write_text_atomic(path, state_to_json(s).dump());
}

inline TwoModeState load_state(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::io, path + ": " + e.what());
  }
  return state_from_json(j);
}

inline std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Real matrix as CSV: the first row holds the column axis (after an empty
/// corner cell), each following row starts with its row-axis value.
inline std::string matrix_csv(const std::vector<double>& row_axis, const std::vector<double>& col_axis,
                              const RealMatrix& values, const std::string& corner = "") {
  std::string out = corner;
  for (double c : col_axis) out += "," + fmt_g(c);
  out += "\n";
  for (std::size_t i = 0; i < row_axis.size(); ++i) {
    out += fmt_g(row_axis[i]);
    for (std::size_t j = 0; j < col_axis.size(); ++j) {
      out += "," + fmt_g(values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    out += "\n";
  }
  return out;
}

}  // namespace ngqkd
