#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "nashflow/audit.hpp"
#include "nashflow/flow.hpp"
#include "nashflow/io.hpp"
#include "nashflow/pde.hpp"
#include "nashflow/problems.hpp"

namespace nashflow::cli {

using json = nlohmann::json;

/// Exit statuses shared by every command.
enum ExitCode : int { kOk = 0, kError = 1, kNotCertified = 2 };

struct RunSpec {
  std::string problem;
  /// Inline "a,b,...", a preset name ("fig1", "equilibrium", "zero"), or "random:<seed>".
  std::string x0;
  Scheme scheme = Scheme::ProjectedEuler;
  std::optional<double> h;
  double t_max = 10.0;
  double residual_tol = 1e-3;
  double residual_gamma = 1.0;
  std::string trajectory_path;
  std::string summary_path;
  int record_every = 1;
};

// ---------------------------------------------------------------------------
// Problem files
// ---------------------------------------------------------------------------

inline json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open '" + path + "'");
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw InvalidArgument("malformed JSON in '" + path + "': " + e.what());
  }
}

inline Matrix matrix_from_json(const json& flat, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  if (!flat.is_array() || static_cast<Eigen::Index>(flat.size()) != rows * cols)
    throw InvalidArgument(what + ": expected a flat row-major array of " + std::to_string(rows * cols) + " numbers");
  Matrix M(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& v = flat[static_cast<std::size_t>(r * cols + c)];
      if (!v.is_number()) throw InvalidArgument(what + ": entry " + std::to_string(r * cols + c) + " is not a number");
      M(r, c) = v.get<double>();
    }
  return M;
}

/// {"type": "zerosum", "rows": m, "cols": n, "matrix": [m*n row-major]}
inline GameProblem zero_sum_from_json(const json& j, const std::string& name) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  return zero_sum_problem(matrix_from_json(j.at("matrix"), rows, cols, "matrix"), name);
}

/// {"type": "quadmatrix", "players": N, "d": d, "blocks": [N^3 arrays of d*d]},
/// blocks[(j*N + k)*N + l] = A^j_{k,l}.
inline GameProblem quad_matrix_from_json(const json& j, const std::string& name) {
  const auto N = j.at("players").get<std::size_t>();
  const auto d = j.at("d").get<Eigen::Index>();
  const json& arr = j.at("blocks");
  if (!arr.is_array() || arr.size() != N * N * N)
    throw InvalidArgument("blocks: expected " + std::to_string(N * N * N) + " entries");
  std::vector<Matrix> blocks;
  blocks.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) blocks.push_back(matrix_from_json(arr[i], d, d, "blocks[" + std::to_string(i) + "]"));
  return quadratic_matrix_game(N, d, std::move(blocks)).to_problem(name);
}

inline GameProblem problem_from_json_file(const std::string& path) {
  const json j = read_json(path);
  try {
    const std::string type = j.at("type").get<std::string>();
    const std::string name = j.value("name", type);
    if (type == "zerosum") return zero_sum_from_json(j, name);
    if (type == "quadmatrix") return quad_matrix_from_json(j, name);
    throw InvalidArgument("unknown problem type '" + type + "' in '" + path + "'");
  } catch (const json::exception& e) {
    throw InvalidArgument("bad problem file '" + path + "': " + e.what());
  }
}

inline std::vector<std::string> registry_names() { return {"rotation", "quadratic2", "matching_pennies", "rps"}; }

/// Built-in registry name or path to a JSON problem file.
inline GameProblem resolve_problem(const std::string& name) {
  if (name == "rotation") return rotation_game();
  if (name == "quadratic2") return quadratic_two_player();
  if (name == "matching_pennies") return matching_pennies();
  if (name == "rps") return rock_paper_scissors();
  if (name.size() > 5 && name.substr(name.size() - 5) == ".json") return problem_from_json_file(name);
  throw InvalidArgument("unknown problem '" + name + "'");
}

inline GamePoint resolve_x0(const GameProblem& p, const std::string& src) {
  const LayoutPtr L = p.layout();
  if (src.empty()) throw InvalidArgument("missing x0");
  if (src.rfind("random:", 0) == 0) {
    const std::string seed = src.substr(7);
    std::uint64_t s = 0;
    const auto res = std::from_chars(seed.data(), seed.data() + seed.size(), s);
    if (res.ec != std::errc{} || res.ptr != seed.data() + seed.size()) throw InvalidArgument("bad seed in '" + src + "'");
    Xorshift64Star rng(s);
    return sample_point(p, rng);
  }
  if (src == "zero") return GamePoint::zeros(L);
  if (src == "equilibrium") {
    if (!p.reference.equilibrium) throw InvalidArgument("problem '" + p.name + "' has no known equilibrium");
    return GamePoint(*p.reference.equilibrium, L);
  }
  if (src == "fig1") {
    if (L->total() != 2) throw InvalidArgument("preset fig1 needs a two-dimensional problem");
    return GamePoint(Vector{{0.8, -0.9}}, L);
  }
  const auto fields = split_csv(src);
  Vector v(static_cast<Eigen::Index>(fields.size()));
  for (std::size_t i = 0; i < fields.size(); ++i) v[static_cast<Eigen::Index>(i)] = parse_double(fields[i]);
  if (static_cast<std::size_t>(v.size()) != L->total())
    throw DimensionError("x0 has " + std::to_string(v.size()) + " entries, problem '" + p.name + "' needs " +
                         std::to_string(L->total()));
  return GamePoint(std::move(v), L);
}

inline json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline void write_json(const std::string& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os << j.dump(2) << '\n';
}

inline Scheme parse_scheme(const std::string& s) {
  if (s == "euler" || s == "ProjectedEuler") return Scheme::ProjectedEuler;
  if (s == "proximal" || s == "ProximalImplicit") return Scheme::ProximalImplicit;
  throw InvalidArgument("unknown scheme '" + s + "' (euler|proximal)");
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

/// Integrates, certifies, and writes the summary (and trajectory when requested).
/// Returns 0 when certified, 2 when t_max is reached without a certificate, 1 on error.
inline int cmd_run(const RunSpec& spec, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (spec.record_every < 1) throw InvalidArgument("record stride must be >= 1");
    const GameProblem p = resolve_problem(spec.problem);
    const GamePoint x0 = resolve_x0(p, spec.x0);

    FlowConfig cfg;
    cfg.h = spec.h;
    cfg.scheme = spec.scheme;
    cfg.t_max = spec.t_max;
    cfg.residual_tol = spec.residual_tol;
    cfg.residual_gamma = spec.residual_gamma;
    cfg.record_every = spec.record_every;

    json summary;
    summary["problem"] = p.name;
    int code = kOk;
    const FlowTrajectory* traj = nullptr;
    std::optional<SolveResult> result;
    std::optional<SolveFailure> failure;
    try {
      result.emplace(solve(p, x0, cfg));
      traj = &result->trajectory;
      summary["equilibrium"] = vector_json(result->equilibrium.data());
      summary["certificate"] = result->certificate;
      summary["mode"] = to_string(result->mode);
      summary["status"] = "certified";
    } catch (const SolveFailure& f) {
      failure.emplace(f);
      traj = &failure->trajectory();
      summary["equilibrium"] = vector_json(f.best().data());
      summary["certificate"] = f.residual();
      summary["mode"] = to_string(f.mode());
      summary["status"] = "t_max_reached";
      code = kNotCertified;
    }
    for (const auto& w : traj->warnings) err << "warning: " << w << '\n';
    summary["steps"] = traj->steps;
    summary["t_final"] = traj->t_last();
    summary["fitted_rate"] = nullptr;
    summary["wall_time_ms"] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    if (!spec.trajectory_path.empty()) write_trajectory_csv(spec.trajectory_path, *traj);
    if (!spec.summary_path.empty()) write_json(spec.summary_path, summary);
    out << summary.dump(2) << '\n';
    return code;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kError;
  }
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct VerifyRow {
  std::string problem;
  MonotonicityReport monotonicity;
  std::optional<double> gradient_error;
  std::optional<double> certificate;
  bool passed = false;
};

inline VerifyRow audit_problem(const GameProblem& p, int samples = 256, std::uint64_t seed = 0x7e51f) {
  VerifyRow row;
  row.problem = p.name;
  row.monotonicity = check_monotonicity(p, default_pair_sampler(p, seed), samples);
  if (p.value) {
    Xorshift64Star rng(seed ^ 0x9e37);
    std::vector<GamePoint> pts;
    for (int i = 0; i < 16; ++i) pts.push_back(sample_point(p, rng));
    row.gradient_error = gradient_check(p, pts);
  }
  if (p.reference.equilibrium) row.certificate = nash_residual(p, GamePoint(*p.reference.equilibrium, p.layout()));
  row.passed = row.monotonicity.monotone() && (!row.gradient_error || *row.gradient_error <= 1e-5) &&
               (!row.certificate || *row.certificate <= 1e-8);
  return row;
}

/// Audits one problem (registry name or JSON path) or "all" built-ins and
/// prints a table. Returns 0 iff every audit passes.
inline int cmd_verify(const std::string& target, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    std::vector<GameProblem> problems;
    if (target == "all") {
      problems = builtin_problems();
    } else {
      problems.push_back(resolve_problem(target));
    }
    auto fmt = [](std::optional<double> v) {
      if (!v) return std::string("n/a");
      std::ostringstream s;
      s << std::scientific << std::setprecision(2) << *v;
      return s.str();
    };
    out << std::left << std::setw(18) << "problem" << std::setw(20) << "monotonicity" << std::setw(12) << "min_pair"
        << std::setw(12) << "theta_hat" << std::setw(12) << "grad_err" << std::setw(12) << "certificate"
        << "result\n";
    bool all = true;
    for (const GameProblem& p : problems) {
      const VerifyRow row = audit_problem(p);
      all = all && row.passed;
      const bool mono = row.monotonicity.monotone();
      std::ostringstream th;
      th << std::fixed << std::setprecision(4) << std::max(0.0, row.monotonicity.min_ratio);
      out << std::left << std::setw(18) << row.problem << std::setw(20)
          << (mono ? "MonotoneOnSamples" : "ViolatedAt") << std::setw(12) << fmt(row.monotonicity.min_pairing)
          << std::setw(12) << th.str() << std::setw(12) << fmt(row.gradient_error) << std::setw(12)
          << fmt(row.certificate) << (row.passed ? "pass" : "FAIL") << '\n';
    }
    return all ? kOk : kError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kError;
  }
}

// ---------------------------------------------------------------------------
// pde
// ---------------------------------------------------------------------------

/// Parsed form of a PDE spec file.
struct PdeSetup {
  PdeGame game;
  Vector x0;
  FlowConfig flow;
  std::string summary_path;
  std::string snapshot_path;
  std::string trajectory_path;
};

inline Kernel kernel_from_json(const json& j, int dim) {
  const std::string family = j.value("family", "quadratic");
  if (family == "quadratic") return quadratic_kernel(dim);
  if (family == "quartic") return quartic_kernel(dim, j.at("delta").get<double>(), j.value("radius", 10.0));
  if (family == "anisotropic") return anisotropic_kernel(matrix_from_json(j.at("A"), dim, dim, "kernel.A"));
  throw InvalidArgument("unknown kernel family '" + family + "'");
}

inline Coupling coupling_from_json(const json& j, std::size_t players) {
  const std::string family = j.value("family", "none");
  const auto N = static_cast<Eigen::Index>(players);
  if (family == "none") return no_coupling(players);
  if (family == "linear") return linear_coupling(matrix_from_json(j.at("M"), N, N, "coupling.M"));
  if (family == "skew") {
    if (players != 2) throw InvalidArgument("skew coupling needs exactly two players");
    return skew_pair_coupling(j.at("a").get<double>());
  }
  if (family == "tanh") return tanh_coupling(matrix_from_json(j.at("M"), N, N, "coupling.M"), j.at("c").get<double>());
  throw InvalidArgument("unknown coupling family '" + family + "'");
}

inline Lagrangian lagrangian_from_json(const json& j, std::size_t players, int dim) {
  const std::string family = j.value("family", "decoupled");
  if (family == "decoupled") return decoupled_lagrangian(players, dim);
  if (family == "skew") return skew_lagrangian(players, dim, j.at("eps").get<double>());
  if (family == "anisotropic") {
    const json& arr = j.at("A");
    if (!arr.is_array() || arr.size() != players) throw InvalidArgument("lagrangian.A: need one matrix per player");
    std::vector<Matrix> A;
    for (std::size_t i = 0; i < players; ++i) A.push_back(matrix_from_json(arr[i], dim, dim, "lagrangian.A"));
    return anisotropic_lagrangian(std::move(A));
  }
  throw InvalidArgument("unknown lagrangian family '" + family + "'");
}

/// {"kind": "zero" | "constant" | "eigenfunction" | "values", "scale": s, "values": [...]}
inline Vector source_from_json(const json& j, const Grid& g) {
  const std::string kind = j.value("kind", "zero");
  const double scale = j.value("scale", 1.0);
  if (kind == "zero") return Vector::Zero(g.size());
  if (kind == "constant") return Vector::Constant(g.size(), scale);
  if (kind == "eigenfunction") return scale * g.eigenfunction1();
  if (kind == "values") return scale * matrix_from_json(j.at("values"), g.size(), 1, "source.values");
  throw InvalidArgument("unknown source kind '" + kind + "'");
}

inline PdeSetup pde_setup_from_json(const json& j) {
  try {
    const json& gj = j.at("grid");
    const Grid grid(gj.value("dim", 1), gj.at("n").get<int>());
    const std::string game = j.at("game").get<std::string>();
    const auto players = j.value("players", std::size_t{1});
    if (players < 1) throw InvalidArgument("players must be >= 1");

    std::vector<Vector> sources;
    if (j.contains("sources")) {
      const json& sj = j.at("sources");
      if (!sj.is_array() || sj.size() != players) throw InvalidArgument("sources: need one entry per player");
      for (const json& s : sj) sources.push_back(source_from_json(s, grid));
    }

    std::optional<PdeGame> pg;
    if (game == "l2") {
      CouplingSpec spec;
      spec.kernels.assign(players, kernel_from_json(j.value("kernel", json::object()), grid.dim()));
      spec.coupling = coupling_from_json(j.value("coupling", json::object()), players);
      spec.sources = sources;
      pg.emplace(discretize_l2_game(grid, spec));
    } else if (game == "gradient") {
      pg.emplace(discretize_gradient_coupled_game(
          grid, lagrangian_from_json(j.value("lagrangian", json::object()), players, grid.dim()), sources));
    } else if (game == "hminus") {
      pg.emplace(discretize_hminus_game(grid, coupling_from_json(j.at("coupling"), players), sources));
    } else if (game == "h1") {
      pg.emplace(discretize_h1_game(grid, coupling_from_json(j.at("coupling"), players), sources));
    } else {
      throw InvalidArgument("unknown game '" + game + "' (l2|gradient|hminus|h1)");
    }

    const Eigen::Index total = grid.size() * static_cast<Eigen::Index>(players);
    const std::string x0 = j.value("x0", "zero");
    Vector v0;
    if (x0 == "zero") {
      v0 = Vector::Zero(total);
    } else if (x0 == "eigenfunction") {
      v0 = Vector(total);
      for (std::size_t i = 0; i < players; ++i) v0.segment(static_cast<Eigen::Index>(i) * grid.size(), grid.size()) = grid.eigenfunction1();
    } else if (x0.rfind("random:", 0) == 0) {
      Xorshift64Star rng(std::stoull(x0.substr(7)));
      v0 = rng.normal_vector(total);
    } else {
      throw InvalidArgument("unknown x0 '" + x0 + "' (zero|eigenfunction|random:<seed>)");
    }

    FlowConfig cfg;
    cfg.scheme = parse_scheme(j.value("scheme", "euler"));
    cfg.h = j.contains("h") ? std::optional<double>(j.at("h").get<double>()) : std::optional<double>(pg->default_step());
    cfg.t_max = j.value("t_max", 2.0);
    cfg.residual_tol = j.value("residual_tol", 1e-12);
    cfg.record_every = j.value("record_every", 100);

    const json out = j.value("output", json::object());
    return PdeSetup{std::move(*pg), std::move(v0), cfg, out.value("summary", ""), out.value("snapshot", ""),
                    out.value("trajectory", "")};
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("bad pde spec: ") + e.what());
  }
}

/// Discretizes, integrates, compares with the Newton oracle, and fits the
/// decay rate. A failed rate fit is reported in the summary, not as an error.
inline int cmd_pde(const std::string& spec_path, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string stage = "reading spec";
  try {
    PdeSetup setup = pde_setup_from_json(read_json(spec_path));
    const PdeGame& pg = setup.game;
    const GameProblem& p = pg.problem;

    stage = "integrating the flow";
    const FlowTrajectory traj = integrate(p, pg.point(setup.x0), setup.flow);
    for (const auto& w : traj.warnings) err << "warning: " << w << '\n';

    stage = "computing the Newton oracle";
    const GamePoint ne = discrete_nash_oracle(p, pg.point(Vector::Zero(setup.x0.size())));

    json summary;
    summary["problem"] = p.name;
    summary["equilibrium"] = vector_json(traj.states.back());
    summary["certificate"] = traj.residuals.back();
    summary["mode"] = to_string(SolveMode::TrajectoryLimit);
    summary["status"] = traj.reason == StopReason::ResidualConverged ? "certified" : "t_max_reached";
    summary["steps"] = traj.steps;
    summary["t_final"] = traj.t_last();
    summary["norm"] = to_string(pg.norm);
    summary["lambda1"] = pg.grid.lambda1();
    summary["oracle_distance"] = pg.distance(traj.states.back(), ne.data());
    try {
      summary["fitted_rate"] = fit_decay_rate(traj, ne.data(), pg.grid, pg.norm);
    } catch (const InvalidArgument& e) {
      summary["fitted_rate"] = nullptr;
      summary["rate_error"] = e.what();
    }
    summary["wall_time_ms"] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    stage = "writing outputs";
    if (!setup.snapshot_path.empty()) write_grid_snapshot(setup.snapshot_path, pg.grid, traj.states.back());
    if (!setup.trajectory_path.empty()) write_trajectory_csv(setup.trajectory_path, traj);
    if (!setup.summary_path.empty()) write_json(setup.summary_path, summary);
    out << summary.dump(2) << '\n';
    return kOk;
  } catch (const std::exception& e) {
    err << "error while " << stage << ": " << e.what() << '\n';
    return kError;
  }
}

}  // namespace nashflow::cli
