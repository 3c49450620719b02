//
// Copyright 2026 The rigid-qbnb Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "rigid_qbnb/error.hpp"
#include "rigid_qbnb/geometry.hpp"
#include "rigid_qbnb/search.hpp"
#include "rigid_qbnb/search_engine.hpp"

namespace rigid_qbnb {

// =============================================================================
// Files
// =============================================================================

// Writes to a sibling temp file, then renames over the destination. Missing
// parent directories are created.
inline void atomic_write(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code dir_ec;
    std::filesystem::create_directories(path.parent_path(), dir_ec);
    if (dir_ec) throw Error("cannot create directory " + path.parent_path().string() + ": " + dir_ec.message());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Dimension-erased point list as read from disk.
struct XyzData {
  int dim = 0;
  std::vector<std::array<double, 3>> points;
};

// Plain-text point list: one point per line, whitespace-separated decimal
// coordinates, no header, '#' comment lines. The dimension comes from the
// first data line and must be 2 or 3.
inline XyzData parse_xyz(std::istream& in) {
  XyzData data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view rest(line);
    if (!rest.empty() && rest.back() == '\r') rest.remove_suffix(1);
    const auto first = rest.find_first_not_of(" \t");
    if (first == std::string_view::npos) continue;
    rest.remove_prefix(first);
    if (rest.front() == '#') continue;
    if (rest.starts_with("ply") || rest.starts_with("format ") || rest.starts_with("element ")) {
      throw ParseError("mesh headers (PLY) are not supported; supply a plain point list", line_no);
    }
    std::array<double, 3> p{};
    int count = 0;
    while (true) {
      const auto start = rest.find_first_not_of(" \t");
      if (start == std::string_view::npos) break;
      rest.remove_prefix(start);
      if (count == 3) throw ParseError("more than 3 coordinates", line_no);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), v);
      const auto used = static_cast<std::size_t>(ptr - rest.data());
      if (ec != std::errc() || (used < rest.size() && rest[used] != ' ' && rest[used] != '\t')) {
        throw ParseError("malformed coordinate '" + std::string(rest.substr(0, rest.find_first_of(" \t"))) + "'",
                         line_no);
      }
      if (!std::isfinite(v)) throw ParseError("non-finite coordinate", line_no);
      p[count++] = v;
      rest.remove_prefix(used);
    }
    if (data.dim == 0) {
      if (count != 2 && count != 3) {
        throw ParseError("expected 2 or 3 coordinates, got " + std::to_string(count), line_no);
      }
      data.dim = count;
    } else if (count != data.dim) {
      throw ParseError("expected " + std::to_string(data.dim) + " coordinates, got " + std::to_string(count),
                       line_no);
    }
    data.points.push_back(p);
  }
  if (data.points.empty()) throw ParseError("no points found", line_no);
  return data;
}

inline XyzData read_xyz(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return parse_xyz(in);
}

template <int Dim>
PointCloud<Dim> to_cloud(const XyzData& data) {
  if (data.dim != Dim) {
    throw DimensionError("expected " + std::to_string(Dim) + "-D points, file has " + std::to_string(data.dim));
  }
  std::vector<Vec<Dim>> pts;
  pts.reserve(data.points.size());
  for (const auto& a : data.points) {
    Vec<Dim> v;
    for (int k = 0; k < Dim; ++k) v(k) = a[k];
    pts.push_back(v);
  }
  return PointCloud<Dim>(std::move(pts));
}

template <int Dim>
std::string format_xyz(const PointCloud<Dim>& cloud) {
  std::string out;
  for (const auto& p : cloud) {
    for (int k = 0; k < Dim; ++k) {
      if (k) out += ' ';
      out += format_double(p(k));
    }
    out += '\n';
  }
  return out;
}

template <int Dim>
void write_xyz(const std::filesystem::path& path, const PointCloud<Dim>& cloud) {
  atomic_write(path, format_xyz(cloud));
}

// =============================================================================
// Run records
// =============================================================================

struct RunSpec {
  std::size_t n = 0;
  std::size_t m = 0;
  std::optional<double> sigma;  // known only for synthetic runs
  std::optional<std::uint64_t> seed;
  int dim = 3;
  std::string mode = "bijective";

  bool operator==(const RunSpec&) const = default;
};

struct RunConfig {
  double epsilon = 1e-6;
  std::string bound = "quasi";
  std::string strategy = "bfs";
  bool reflections = false;
  std::optional<int> dt_grid;
  std::uint64_t max_evals = 0;

  bool operator==(const RunConfig&) const = default;
};

struct RunOutcome {
  double ub = 0.0;
  double lb = 0.0;
  std::uint64_t total_evals = 0;
  bool certificate_valid = false;
  std::string status = "converged";
  bool reflected = false;
  std::vector<double> rotation_vec;
  std::vector<double> translation;
  std::vector<int> correspondence;

  bool operator==(const RunOutcome&) const = default;
};

struct RunRecord {
  RunSpec spec;
  RunConfig config;
  RunOutcome result;
  std::vector<GenerationStats> generations;

  bool operator==(const RunRecord&) const = default;
};

template <int Dim>
RunOutcome to_outcome(const SearchResult<Dim>& r) {
  RunOutcome o;
  o.ub = r.ub;
  o.lb = r.lb;
  o.total_evals = r.total_evals;
  o.certificate_valid = r.certificate_valid;
  o.status = to_string(r.status);
  o.reflected = r.reflected;
  o.rotation_vec.assign(r.minimizer.rotation.data(), r.minimizer.rotation.data() + r.minimizer.rotation.size());
  o.translation.assign(r.minimizer.translation.data(),
                       r.minimizer.translation.data() + r.minimizer.translation.size());
  o.correspondence = r.corr.mapping;
  return o;
}

inline RunConfig to_run_config(const SearchConfig& cfg, std::optional<int> dt_grid = std::nullopt) {
  RunConfig c;
  c.epsilon = cfg.epsilon;
  c.bound = to_string(cfg.bound);
  c.strategy = to_string(cfg.strategy);
  c.reflections = cfg.allow_reflections;
  c.dt_grid = dt_grid;
  c.max_evals = cfg.max_evals;
  return c;
}

namespace detail {

template <class T>
nlohmann::json optional_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <class T>
std::optional<T> optional_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

// JSON has no infinities; they are written as the strings "inf" / "-inf".
inline nlohmann::json number_json(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline double number_from(const nlohmann::json& j) {
  if (!j.is_string()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw Error("expected a number, got '" + s + "'");
}

}  // namespace detail

inline nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json j;
  j["spec"] = {{"n", r.spec.n},
               {"m", r.spec.m},
               {"sigma", detail::optional_json(r.spec.sigma)},
               {"seed", detail::optional_json(r.spec.seed)},
               {"dim", r.spec.dim},
               {"mode", r.spec.mode}};
  j["config"] = {{"epsilon", r.config.epsilon},
                 {"bound", r.config.bound},
                 {"strategy", r.config.strategy},
                 {"reflections", r.config.reflections},
                 {"dt_grid", detail::optional_json(r.config.dt_grid)},
                 {"max_evals", r.config.max_evals}};
  j["result"] = {{"ub", detail::number_json(r.result.ub)},
                 {"lb", detail::number_json(r.result.lb)},
                 {"total_evals", r.result.total_evals},
                 {"certificate_valid", r.result.certificate_valid},
                 {"status", r.result.status},
                 {"reflected", r.result.reflected},
                 {"rotation_vec", r.result.rotation_vec},
                 {"translation", r.result.translation},
                 {"correspondence", r.result.correspondence}};
  auto gens = nlohmann::json::array();
  for (const auto& g : r.generations) {
    gens.push_back({{"g", g.generation}, {"evals", g.evals}, {"live", g.live},
                    {"ub", detail::number_json(g.ub)}, {"lb", detail::number_json(g.lb)}});
  }
  j["generations"] = std::move(gens);
  return j;
}

inline RunRecord run_record_from_json(const nlohmann::json& j) {
  try {
    RunRecord r;
    const auto& s = j.at("spec");
    r.spec.n = s.at("n").get<std::size_t>();
    r.spec.m = s.at("m").get<std::size_t>();
    r.spec.sigma = detail::optional_from<double>(s, "sigma");
    r.spec.seed = detail::optional_from<std::uint64_t>(s, "seed");
    r.spec.dim = s.at("dim").get<int>();
    r.spec.mode = s.at("mode").get<std::string>();
    const auto& c = j.at("config");
    r.config.epsilon = c.at("epsilon").get<double>();
    r.config.bound = c.at("bound").get<std::string>();
    r.config.strategy = c.at("strategy").get<std::string>();
    r.config.reflections = c.at("reflections").get<bool>();
    r.config.dt_grid = detail::optional_from<int>(c, "dt_grid");
    r.config.max_evals = c.at("max_evals").get<std::uint64_t>();
    const auto& o = j.at("result");
    r.result.ub = detail::number_from(o.at("ub"));
    r.result.lb = detail::number_from(o.at("lb"));
    r.result.total_evals = o.at("total_evals").get<std::uint64_t>();
    r.result.certificate_valid = o.at("certificate_valid").get<bool>();
    r.result.status = o.at("status").get<std::string>();
    r.result.reflected = o.at("reflected").get<bool>();
    r.result.rotation_vec = o.at("rotation_vec").get<std::vector<double>>();
    r.result.translation = o.at("translation").get<std::vector<double>>();
    r.result.correspondence = o.at("correspondence").get<std::vector<int>>();
    for (const auto& g : j.at("generations")) {
      GenerationStats row;
      row.generation = g.at("g").get<int>();
      row.evals = g.at("evals").get<std::uint64_t>();
      row.live = g.at("live").get<std::uint64_t>();
      row.ub = detail::number_from(g.at("ub"));
      row.lb = detail::number_from(g.at("lb"));
      r.generations.push_back(row);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed run record: ") + e.what());
  }
}

inline std::string format_run_record(const RunRecord& r) { return to_json(r).dump(2) + "\n"; }

inline void write_run_record(const std::filesystem::path& path, const RunRecord& r) {
  atomic_write(path, format_run_record(r));
}

inline RunRecord read_run_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return run_record_from_json(j);
}

inline std::string format_generations_csv(const std::vector<GenerationStats>& rows) {
  std::string out = "g,evals,live,ub,lb\n";
  for (const auto& g : rows) {
    out += std::to_string(g.generation) + "," + std::to_string(g.evals) + "," + std::to_string(g.live) + "," +
           format_double(g.ub) + "," + format_double(g.lb) + "\n";
  }
  return out;
}

inline void write_generations_csv(const std::filesystem::path& path, const std::vector<GenerationStats>& rows) {
  atomic_write(path, format_generations_csv(rows));
}

}  // namespace rigid_qbnb
