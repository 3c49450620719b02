//
// Copyright 2026 The rigid-qbnb Authors
// SPDX-License-Identifier: Apache-2.0
//

// Command-line front end: register, synth, bench, pairwise.
//
// Exit codes: 0 success, 1 input or usage error, 2 search stopped at the
// evaluation cap (or, for pairwise, some cell failed to certify).

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rigid_qbnb/rigid_qbnb.hpp"

namespace fs = std::filesystem;
using namespace rigid_qbnb;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitCap = 2;

struct RegisterArgs {
  std::string mode;
  std::string bound;
  double epsilon = 0.0;
  std::string source;
  std::string target;
  bool allow_reflections = false;
  std::optional<int> dt_grid;
  std::string strategy = "auto";
  std::string out;
  std::uint64_t max_evals = 100'000'000;
};

struct SynthArgs {
  std::size_t n = 0;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  int dim = 3;
  std::string mode = "bijective";
  std::string out_prefix;
};

struct BenchArgs {
  std::string mode;
  std::string bound;
  std::vector<double> epsilons;
  std::vector<double> sigmas;
  std::size_t n = 0;
  std::size_t instances = 1;
  std::uint64_t seed = 0;
  int dim = 2;
  std::string strategy = "auto";
  std::string out;
  bool per_generation = false;
  std::uint64_t max_evals = 100'000'000;
};

struct PairwiseArgs {
  std::string dir;
  double epsilon = 0.0;
  bool allow_reflections = false;
  std::string out_prefix;
  std::uint64_t max_evals = 100'000'000;
};

MatchMode parse_mode(const std::string& s) { return s == "cp" ? MatchMode::kCp : MatchMode::kBijective; }
BoundKind parse_bound(const std::string& s) { return s == "linear" ? BoundKind::kLinear : BoundKind::kQuasi; }

Strategy parse_strategy(const std::string& s) {
  if (s == "bfs") return Strategy::kBfs;
  if (s == "best-first") return Strategy::kBestFirst;
  return Strategy::kAuto;
}

Strategy resolve_strategy(Strategy s, MatchMode mode) {
  if (s != Strategy::kAuto) return s;
  return mode == MatchMode::kCp ? Strategy::kBestFirst : Strategy::kBfs;
}

int exit_code_for(SearchStatus s) { return s == SearchStatus::kConverged ? kExitOk : kExitCap; }

void print_summary(double ub, double lb, std::uint64_t evals) {
  std::printf("ub=%.17g\nlb=%.17g\ntotal_evals=%llu\n", ub, lb, static_cast<unsigned long long>(evals));
}

// ---------------------------------------------------------------------------
// register
// ---------------------------------------------------------------------------

template <int Dim>
SearchResult<Dim> register_pair(const PointCloud<Dim>& p, const PointCloud<Dim>& q, MatchMode mode,
                                const SearchConfig& cfg, std::optional<int> dt_grid) {
  const auto pair = normalize_pair(p, q);
  if (mode == MatchMode::kBijective) return register_bijective(pair.source, pair.target, cfg);
  const auto index = dt_grid ? build_cp_index(pair.target, CpIndexMode::kDtGrid, *dt_grid)
                             : build_cp_index(pair.target, CpIndexMode::kExact);
  return register_cp(pair.source, index, cfg);
}

template <int Dim>
int run_register_dim(const RegisterArgs& a, const XyzData& src, const XyzData& dst) {
  const auto p = to_cloud<Dim>(src);
  const auto q = to_cloud<Dim>(dst);
  const MatchMode mode = parse_mode(a.mode);
  if (mode == MatchMode::kBijective && p.size() != q.size()) {
    throw DimensionError("bijective mode needs equal point counts, got " + std::to_string(p.size()) + " and " +
                         std::to_string(q.size()));
  }
  SearchConfig cfg;
  cfg.epsilon = a.epsilon;
  cfg.bound = parse_bound(a.bound);
  cfg.strategy = resolve_strategy(parse_strategy(a.strategy), mode);
  cfg.allow_reflections = a.allow_reflections;
  cfg.max_evals = a.max_evals;
  cfg.threads = resolve_thread_count(0);
  const auto r = register_pair(p, q, mode, cfg, a.dt_grid);

  RunRecord rec;
  rec.spec.n = p.size();
  rec.spec.m = q.size();
  rec.spec.dim = Dim;
  rec.spec.mode = to_string(mode);
  rec.config = to_run_config(cfg, a.dt_grid);
  rec.result = to_outcome(r);
  rec.generations = r.generations;
  write_run_record(a.out, rec);
  print_summary(r.ub, r.lb, r.total_evals);
  return exit_code_for(r.status);
}

int run_register(const RegisterArgs& a) {
  if (a.dt_grid && a.mode != "cp") throw Error("--dt-grid is only available with --mode cp");
  if (a.dt_grid && *a.dt_grid < 2) throw Error("--dt-grid needs a resolution of at least 2");
  const auto src = read_xyz(a.source);
  const auto dst = read_xyz(a.target);
  if (src.dim != dst.dim) throw DimensionError("source and target dimensions differ");
  return src.dim == 2 ? run_register_dim<2>(a, src, dst) : run_register_dim<3>(a, src, dst);
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

template <int Dim>
nlohmann::json motion_json(const RigidMotion<Dim>& m) {
  return {{"rotation_vec", std::vector<double>(m.rotation.data(), m.rotation.data() + m.rotation.size())},
          {"translation", std::vector<double>(m.translation.data(), m.translation.data() + Dim)}};
}

template <int Dim>
nlohmann::json normalization_json(const Normalization<Dim>& n) {
  return {{"shift", std::vector<double>(n.shift.data(), n.shift.data() + Dim)}, {"scale", n.scale}};
}

template <int Dim>
int run_synth_dim(const SynthSpec& spec, const std::string& prefix) {
  const auto inst = gen_synthetic<Dim>(spec);
  write_xyz(prefix + "_P.xyz", inst.source);
  write_xyz(prefix + "_Q.xyz", inst.target);
  nlohmann::json j;
  j["spec"] = {{"n", spec.n}, {"sigma", spec.sigma}, {"seed", spec.seed}, {"dim", spec.dim},
               {"mode", to_string(spec.mode)}};
  j["truth"] = motion_json(inst.truth);
  j["normalized_truth"] = motion_json(inst.normalized_truth);
  j["source_normalization"] = normalization_json(inst.source_transform);
  j["target_normalization"] = normalization_json(inst.target_transform);
  j["target_origin"] = inst.origin;
  atomic_write(prefix + "_truth.json", j.dump(2) + "\n");
  return kExitOk;
}

int run_synth(const SynthArgs& a) {
  SynthSpec spec;
  spec.n = a.n;
  spec.sigma = a.sigma;
  spec.seed = a.seed;
  spec.dim = a.dim;
  spec.mode = parse_mode(a.mode);
  spec.validate();
  return a.dim == 2 ? run_synth_dim<2>(spec, a.out_prefix) : run_synth_dim<3>(spec, a.out_prefix);
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchRow {
  std::size_t eps_index = 0;
  std::size_t sigma_index = 0;
  std::size_t instance = 0;
  std::uint64_t seed = 0;
  double ub = 0.0;
  double lb = 0.0;
  std::uint64_t total_evals = 0;
  bool certificate_valid = false;
  SearchStatus status = SearchStatus::kConverged;
  std::vector<GenerationStats> generations;
};

template <int Dim>
void bench_run(const BenchArgs& a, BenchRow& row) {
  SynthSpec spec;
  spec.n = a.n;
  spec.sigma = a.sigmas[row.sigma_index];
  spec.seed = row.seed;
  spec.dim = Dim;
  spec.mode = parse_mode(a.mode);
  const auto inst = gen_synthetic<Dim>(spec);
  SearchConfig cfg;
  cfg.epsilon = a.epsilons[row.eps_index];
  cfg.bound = parse_bound(a.bound);
  cfg.strategy = resolve_strategy(parse_strategy(a.strategy), spec.mode);
  cfg.max_evals = a.max_evals;
  const auto r = register_pair(inst.source, inst.target, spec.mode, cfg, std::nullopt);
  row.ub = r.ub;
  row.lb = r.lb;
  row.total_evals = r.total_evals;
  row.certificate_valid = r.certificate_valid;
  row.status = r.status;
  row.generations = r.generations;
}

std::string bench_generation_path(const std::string& out, const BenchRow& row) {
  fs::path p(out);
  const std::string stem = p.stem().string();
  p.replace_filename(stem + "_e" + std::to_string(row.eps_index) + "_s" + std::to_string(row.sigma_index) + "_i" +
                     std::to_string(row.instance) + "_generations.csv");
  return p.string();
}

int run_bench(const BenchArgs& a) {
  if (a.epsilons.empty() || a.sigmas.empty()) throw Error("sweep lists must not be empty");
  if (a.instances == 0) throw Error("--instances must be positive");
  for (double e : a.epsilons) {
    if (!(e > 0.0)) throw Error("epsilon values must be positive");
  }
  SynthSpec probe;
  probe.n = a.n;
  probe.dim = a.dim;
  probe.mode = parse_mode(a.mode);
  for (double s : a.sigmas) {
    probe.sigma = s;
    probe.validate();
  }

  std::vector<BenchRow> rows;
  for (std::size_t e = 0; e < a.epsilons.size(); ++e) {
    for (std::size_t s = 0; s < a.sigmas.size(); ++s) {
      for (std::size_t k = 0; k < a.instances; ++k) {
        BenchRow row;
        row.eps_index = e;
        row.sigma_index = s;
        row.instance = k;
        row.seed = a.seed + k;
        rows.push_back(row);
      }
    }
  }
  parallel_for(rows.size(), resolve_thread_count(0), [&](std::size_t i) {
    if (a.dim == 2) {
      bench_run<2>(a, rows[i]);
    } else {
      bench_run<3>(a, rows[i]);
    }
  });

  std::string csv = "epsilon,sigma,instance,seed,ub,lb,total_evals,certificate_valid,status\n";
  bool all_converged = true;
  for (const auto& r : rows) {
    all_converged &= r.status == SearchStatus::kConverged;
    csv += format_double(a.epsilons[r.eps_index]) + "," + format_double(a.sigmas[r.sigma_index]) + "," +
           std::to_string(r.instance) + "," + std::to_string(r.seed) + "," + format_double(r.ub) + "," +
           format_double(r.lb) + "," + std::to_string(r.total_evals) + "," + (r.certificate_valid ? "1" : "0") +
           "," + to_string(r.status) + "\n";
  }
  // Per-cell means; instance column reads "mean".
  for (std::size_t e = 0; e < a.epsilons.size(); ++e) {
    for (std::size_t s = 0; s < a.sigmas.size(); ++s) {
      double ub = 0.0;
      double lb = 0.0;
      double evals = 0.0;
      std::size_t count = 0;
      for (const auto& r : rows) {
        if (r.eps_index != e || r.sigma_index != s) continue;
        ub += r.ub;
        lb += r.lb;
        evals += static_cast<double>(r.total_evals);
        ++count;
      }
      const double c = static_cast<double>(count);
      csv += format_double(a.epsilons[e]) + "," + format_double(a.sigmas[s]) + ",mean,," + format_double(ub / c) +
             "," + format_double(lb / c) + "," + format_double(evals / c) + ",,\n";
    }
  }
  atomic_write(a.out, csv);
  if (a.per_generation) {
    for (const auto& r : rows) write_generations_csv(bench_generation_path(a.out, r), r.generations);
  }
  std::printf("runs=%zu\n", rows.size());
  return all_converged ? kExitOk : kExitCap;
}

// ---------------------------------------------------------------------------
// pairwise
// ---------------------------------------------------------------------------

template <int Dim>
int run_pairwise_dim(const PairwiseArgs& a, const std::vector<std::string>& names,
                     const std::vector<XyzData>& data) {
  std::vector<PointCloud<Dim>> clouds;
  clouds.reserve(data.size());
  for (const auto& d : data) clouds.push_back(to_cloud<Dim>(d));
  SearchConfig cfg;
  cfg.epsilon = a.epsilon;
  cfg.bound = BoundKind::kQuasi;
  cfg.strategy = Strategy::kBfs;
  cfg.allow_reflections = a.allow_reflections;
  cfg.max_evals = a.max_evals;
  const auto result = pairwise_matrix(clouds, cfg, resolve_thread_count(0));

  std::string csv = "name";
  for (const auto& n : names) csv += "," + n;
  csv += "\n";
  bool all_ok = true;
  auto cells = nlohmann::json::array();
  for (std::size_t i = 0; i < names.size(); ++i) {
    csv += names[i];
    for (std::size_t j = 0; j < names.size(); ++j) {
      const auto& c = result.at(i, j);
      csv += "," + (c.ok ? format_double(c.value) : std::string("nan"));
      all_ok &= c.ok && c.certificate_valid;
      if (i == j) continue;
      nlohmann::json cell = {{"source", names[i]}, {"target", names[j]}, {"ok", c.ok}};
      if (c.ok) {
        cell["ub"] = c.value;
        cell["lb"] = c.lb;
        cell["certificate_valid"] = c.certificate_valid;
        cell["reflected"] = c.reflected;
        cell["total_evals"] = c.total_evals;
        cell["rotation_vec"] =
            std::vector<double>(c.motion.rotation.data(), c.motion.rotation.data() + c.motion.rotation.size());
      } else {
        cell["error"] = c.error;
      }
      cells.push_back(std::move(cell));
    }
    csv += "\n";
  }
  atomic_write(a.out_prefix + "_matrix.csv", csv);
  nlohmann::json j = {{"epsilon", a.epsilon}, {"reflections", a.allow_reflections}, {"names", names},
                      {"pairs", std::move(cells)}};
  atomic_write(a.out_prefix + "_motions.json", j.dump(2) + "\n");
  std::printf("clouds=%zu\n", names.size());
  return all_ok ? kExitOk : kExitCap;
}

int run_pairwise(const PairwiseArgs& a) {
  if (!fs::is_directory(a.dir)) throw Error("not a directory: " + a.dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(a.dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".xyz") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.size() < 2) throw Error("pairwise needs at least two .xyz files in " + a.dir);
  std::vector<std::string> names;
  std::vector<XyzData> data;
  for (const auto& f : files) {
    names.push_back(f.stem().string());
    data.push_back(read_xyz(f));
    if (data.back().dim != data.front().dim) throw DimensionError("clouds in " + a.dir + " mix dimensions");
  }
  return data.front().dim == 2 ? run_pairwise_dim<2>(a, names, data) : run_pairwise_dim<3>(a, names, data);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Globally optimal rigid point-cloud registration"};
  app.require_subcommand(1);

  RegisterArgs reg;
  auto* reg_cmd = app.add_subcommand("register", "register a source cloud onto a target cloud");
  reg_cmd->add_option("--mode", reg.mode, "matching model")->required()->check(CLI::IsMember({"cp", "bijective"}));
  reg_cmd->add_option("--bound", reg.bound, "lower-bound family")
      ->required()
      ->check(CLI::IsMember({"quasi", "linear"}));
  reg_cmd->add_option("--epsilon", reg.epsilon, "required accuracy")->required()->check(CLI::PositiveNumber);
  reg_cmd->add_option("--source", reg.source, "source point list")->required();
  reg_cmd->add_option("--target", reg.target, "target point list")->required();
  reg_cmd->add_flag("--allow-reflections", reg.allow_reflections, "search O(d) instead of SO(d)");
  reg_cmd->add_option("--dt-grid", reg.dt_grid, "approximate closest points on an N^d grid (cp only)");
  reg_cmd->add_option("--strategy", reg.strategy, "search order")
      ->check(CLI::IsMember({"auto", "bfs", "best-first"}));
  reg_cmd->add_option("--out", reg.out, "run record JSON")->required();
  reg_cmd->add_option("--max-evals", reg.max_evals, "evaluation cap")->check(CLI::PositiveNumber);

  SynthArgs syn;
  auto* syn_cmd = app.add_subcommand("synth", "generate a synthetic instance");
  syn_cmd->add_option("--n", syn.n, "point count")->required();
  syn_cmd->add_option("--sigma", syn.sigma, "Gaussian noise std")->required();
  syn_cmd->add_option("--seed", syn.seed, "random seed")->required();
  syn_cmd->add_option("--dim", syn.dim, "dimension")->required()->check(CLI::IsMember({2, 3}));
  syn_cmd->add_option("--mode", syn.mode, "matching model")->check(CLI::IsMember({"cp", "bijective"}));
  syn_cmd->add_option("--out-prefix", syn.out_prefix, "output path prefix")->required();

  BenchArgs ben;
  auto* ben_cmd = app.add_subcommand("bench", "sweep epsilon and sigma over synthetic instances");
  ben_cmd->add_option("--mode", ben.mode, "matching model")->required()->check(CLI::IsMember({"cp", "bijective"}));
  ben_cmd->add_option("--bound", ben.bound, "lower-bound family")
      ->required()
      ->check(CLI::IsMember({"quasi", "linear"}));
  ben_cmd->add_option("--epsilon-list", ben.epsilons, "comma-separated epsilons")->required()->delimiter(',');
  ben_cmd->add_option("--sigma-list", ben.sigmas, "comma-separated noise levels")->required()->delimiter(',');
  ben_cmd->add_option("--n", ben.n, "point count")->required();
  ben_cmd->add_option("--instances", ben.instances, "seeds per cell")->required();
  ben_cmd->add_option("--seed", ben.seed, "first seed; instance k uses seed + k")->required();
  ben_cmd->add_option("--dim", ben.dim, "dimension")->check(CLI::IsMember({2, 3}));
  ben_cmd->add_option("--strategy", ben.strategy, "search order")
      ->check(CLI::IsMember({"auto", "bfs", "best-first"}));
  ben_cmd->add_option("--out", ben.out, "results CSV")->required();
  ben_cmd->add_flag("--per-generation", ben.per_generation, "also write per-generation CSVs next to --out");
  ben_cmd->add_option("--max-evals", ben.max_evals, "evaluation cap per run")->check(CLI::PositiveNumber);

  PairwiseArgs pw;
  auto* pw_cmd = app.add_subcommand("pairwise", "bijective distance matrix over a folder of clouds");
  pw_cmd->add_option("--dir", pw.dir, "folder of .xyz files")->required();
  pw_cmd->add_option("--epsilon", pw.epsilon, "required accuracy")->required()->check(CLI::PositiveNumber);
  pw_cmd->add_flag("--allow-reflections", pw.allow_reflections, "search O(d) instead of SO(d)");
  pw_cmd->add_option("--out-prefix", pw.out_prefix, "output path prefix")->required();
  pw_cmd->add_option("--max-evals", pw.max_evals, "evaluation cap per cell")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*reg_cmd) return run_register(reg);
    if (*syn_cmd) return run_synth(syn);
    if (*ben_cmd) return run_bench(ben);
    if (*pw_cmd) return run_pairwise(pw);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
