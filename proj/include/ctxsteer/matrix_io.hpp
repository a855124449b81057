#pragma once

// Distance-matrix CSV (+ JSON sidecar) and small file helpers.
//
// CSV layout:
//   id,<id_1>,...,<id_N>
//   <id_i>,<v_i1>,...,<v_iN>
// Values use the shortest decimal that round-trips to the same double.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "ctxsteer/distances.hpp"
#include "ctxsteer/error.hpp"

namespace ctxsteer {

using json = nlohmann::json;

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc{} && res.ptr == s.data() + s.size(), Errc::invalid_input,
          "not a number: '" + std::string(s) + "'");
  return v;
}

/// Writes via a sibling temp file and rename, so readers never observe a
/// partially written artifact.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), Errc::io_error, "cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    require(static_cast<bool>(out), Errc::io_error, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, Errc::io_error, "rename to " + path.string() + " failed: " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::io_error, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  require(!in.bad(), Errc::io_error, "read failed: " + path.string());
  return ss.str();
}

// --- RowStats <-> JSON ------------------------------------------------------

inline json row_stats_to_json(const RowStats& s) {
  json rows = json::object();
  for (const auto& [id, st] : s.rows) rows[id] = json::array({st.mean, st.std});
  return {{"provenance", std::string(to_string(s.provenance))}, {"reference_ids", s.reference_ids}, {"rows", rows}};
}

inline RowStats row_stats_from_json(const json& j) {
  RowStats s;
  s.provenance = j.value("provenance", std::string("external")) == "pipeline" ? StatsProvenance::pipeline
                                                                             : StatsProvenance::external;
  if (j.contains("reference_ids")) s.reference_ids = j.at("reference_ids").get<std::vector<std::string>>();
  for (const auto& [id, v] : j.at("rows").items()) s.rows[id] = RowStat{v.at(0).get<double>(), v.at(1).get<double>()};
  return s;
}

// --- CSV --------------------------------------------------------------------

inline std::string matrix_to_csv(const DistanceMatrix& m) {
  std::string out = "id";
  for (const auto& id : m.ids) out += "," + id;
  out += "\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    out += m.ids[i];
    for (std::size_t j = 0; j < m.values.cols(); ++j) out += "," + format_double(m.values(i, j));
    out += "\n";
  }
  return out;
}

struct CsvMatrix {
  std::vector<std::string> ids;
  Matrix values;
};

inline CsvMatrix matrix_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(s);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  require(static_cast<bool>(std::getline(in, line)), Errc::invalid_input, "empty matrix CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split(line);
  require(!header.empty() && header[0] == "id", Errc::invalid_input, "matrix CSV header must start with 'id'");
  CsvMatrix out;
  out.ids.assign(header.begin() + 1, header.end());
  const std::size_t n = out.ids.size();
  out.values = Matrix(n, n);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    require(row < n, Errc::invalid_input, "matrix CSV has more rows than columns");
    require(cells.size() == n + 1, Errc::invalid_input, "matrix CSV row " + std::to_string(row + 1) + " has wrong width");
    require(cells[0] == out.ids[row], Errc::invalid_input, "matrix CSV row id '" + cells[0] + "' out of order");
    for (std::size_t j = 0; j < n; ++j) out.values(row, j) = parse_double(cells[j + 1]);
    ++row;
  }
  require(row == n, Errc::invalid_input, "matrix CSV is not square");
  return out;
}

// --- sidecar ----------------------------------------------------------------

inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  p += ".meta.json";
  return p;
}

inline json matrix_sidecar(const DistanceMatrix& m, const json& manifest = json::object()) {
  json j = {{"measure", std::string(to_string(m.measure))},
            {"codec", std::string(to_string(m.codec))},
            {"ids", m.ids},
            {"labels", m.labels}};
  if (!m.groups.empty()) j["groups"] = m.groups;
  if (m.row_stats) j["row_stats"] = row_stats_to_json(*m.row_stats);
  if (!manifest.empty()) j["manifest"] = manifest;
  return j;
}

inline void save_matrix(const DistanceMatrix& m, const std::filesystem::path& csv,
                        const json& manifest = json::object()) {
  write_file_atomic(csv, matrix_to_csv(m));
  write_file_atomic(sidecar_path(csv), matrix_sidecar(m, manifest).dump(2) + "\n");
}

inline DistanceMatrix load_matrix(const std::filesystem::path& csv) {
  CsvMatrix raw = matrix_from_csv(read_file(csv));
  json meta;
  try {
    meta = json::parse(read_file(sidecar_path(csv)));
  } catch (const json::exception& e) {
    fail(Errc::invalid_input, "bad sidecar for " + csv.string() + ": " + e.what());
  }
  DistanceMatrix m;
  m.ids = std::move(raw.ids);
  m.values = std::move(raw.values);
  m.measure = parse_measure(meta.at("measure").get<std::string>());
  m.codec = parse_codec(meta.at("codec").get<std::string>());
  m.labels = meta.at("labels").get<std::vector<std::string>>();
  require(m.labels.size() == m.ids.size(), Errc::invalid_input, "sidecar label count differs from matrix size");
  if (meta.contains("ids"))
    require(meta.at("ids").get<std::vector<std::string>>() == m.ids, Errc::invalid_input,
            "sidecar ids differ from matrix CSV ids");
  if (meta.contains("groups")) m.groups = meta.at("groups").get<std::vector<std::string>>();
  if (meta.contains("row_stats")) m.row_stats = row_stats_from_json(meta.at("row_stats"));
  return m;
}

}  // namespace ctxsteer
