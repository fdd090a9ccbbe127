#ifndef MMMC_CLI_HPP
#define MMMC_CLI_HPP

#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mmmc/analysis.hpp"
#include "mmmc/config.hpp"
#include "mmmc/errors.hpp"
#include "mmmc/experiments.hpp"
#include "mmmc/io.hpp"
#include "mmmc/solver.hpp"

namespace mmmc::cli {

enum ExitCode : int { Success = 0, ConfigFailure = 2, SolverFailure = 3 };

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> out;
};

struct Streams {
  std::ostream& out;   // summaries
  std::ostream& diag;  // warnings and errors
};

/// Runs `body`, mapping ConfigError to 2 and every other failure to 3.
inline int guarded(Streams s, const std::function<void()>& body) {
  try {
    body();
    return Success;
  } catch (const ConfigError& e) {
    s.diag << "config error: " << e.what() << '\n';
    return ConfigFailure;
  } catch (const Error& e) {
    s.diag << "error: " << e.what() << '\n';
    return SolverFailure;
  } catch (const std::exception& e) {
    s.diag << "error: " << e.what() << '\n';
    return SolverFailure;
  }
}

namespace detail {

inline std::filesystem::path prepare_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
  return p;
}

inline void warn_epsilon(const SolverConfig& cfg, std::ostream& diag) {
  if (cfg.epsilon_warning()) {
    diag << "warning: epsilon outside proven regime (epsilon = " << format_number(cfg.epsilon) << ")\n";
  }
}

inline void write_counters(const std::filesystem::path& dir, std::uint64_t hash, std::uint64_t seed,
                           const OpCounters& c) {
  CsvWriter w(dir / "counters.csv", hash, seed, {"factorizations", "solve_pairs", "matvecs", "assemblies"});
  w.row(c.factorizations, c.triangular_solve_pairs, c.matvecs, c.assemblies);
}

/// psi.csv, modes.csv, counters.csv and timings.csv for one run.
inline void write_run(const std::filesystem::path& dir, std::uint64_t hash, std::uint64_t seed, const Mesh& mesh,
                      const RunResult& r) {
  const bool two_d = mesh.dim() == 2;
  {
    CsvWriter w(dir / "psi.csv", hash, seed,
                two_d ? std::initializer_list<const char*>{"node_id", "x", "y", "psi"}
                      : std::initializer_list<const char*>{"node_id", "x", "psi"});
    for (std::size_t i = 0; i < mesh.num_interior(); ++i) {
      const std::size_t v = mesh.interior_vertex[i];
      const Point& x = mesh.vertices[v];
      if (two_d) w.row(v, x.x, x.y, r.psi.values[i]);
      else w.row(v, x.x, r.psi.values[i]);
    }
  }
  {
    CsvWriter w(dir / "modes.csv", hash, seed, {"n", "weighted_h1_norm"});
    for (std::size_t n = 0; n < r.mode_h1_means.size(); ++n) w.row(n, r.weighted_mode_h1(n));
  }
  write_counters(dir, hash, seed, r.counters);
  {
    CsvWriter w(dir / "timings.csv", hash, seed, {"stage", "seconds"});
    w.row("assembly", r.timings.assembly);
    w.row("factorization", r.timings.factorization);
    w.row("solves", r.timings.solves);
    w.row("total", r.timings.total);
  }
}

inline ExperimentConfig load_with_overrides(const std::string& path, const GlobalOptions& g) {
  KeyValueConfig kv = KeyValueConfig::load(path, experiment_keys());
  if (g.seed) kv.set("solver.seed", std::to_string(*g.seed));
  if (g.workers) kv.set("solver.workers", std::to_string(*g.workers));
  if (g.out) kv.set("output.dir", *g.out);
  return experiment_from_config(kv);
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_floating_point_v<T>) s += format_number(v[i]);
    else s += std::to_string(v[i]);
  }
  return s;
}

}  // namespace detail

/// Single solver run described by a config file.
inline int cmd_run(const std::string& config_path, const GlobalOptions& g, Streams s) {
  return guarded(s, [&] {
    const ExperimentConfig e = detail::load_with_overrides(config_path, g);
    detail::warn_epsilon(e.solver, s.diag);
    const auto dir = detail::prepare_dir(e.output_dir);
    const Problem p = make_problem(e);
    const RunResult r = run(p, e.solver);
    if (r.outside_convergence_regime) {
      s.diag << "warning: mode norms grow with n; the truncated series is not converging\n";
    }
    detail::write_run(dir, e.hash, e.solver.seed, p.mesh, r);
    s.out << "dofs " << p.mesh.num_interior() << ", samples " << r.samples << ", factorizations "
          << r.counters.factorizations << ", solve pairs " << r.counters.triangular_solve_pairs << ", "
          << format_short(r.timings.total) << " s\n";
  });
}

struct Table1Options {
  std::size_t samples = 100000;
  double h = 0.01;
};

/// Relative L2 error grid for the 1D uniform problem (rows eps, columns N).
inline int cmd_table1(const Table1Options& o, const GlobalOptions& g, Streams s) {
  return guarded(s, [&] {
    if (o.samples < 2) throw ConfigError("--samples must be >= 2");
    if (!(o.h > 0.0 && o.h < 1.0)) throw ConfigError("--h must lie in (0, 1)");
    Table1Params prm;
    prm.samples = o.samples;
    prm.h = o.h;
    prm.seed = g.seed.value_or(0);
    prm.workers = g.workers.value_or(1);
    try {
      cells_for_spacing(1.0, prm.h);
    } catch (const InvalidData& err) {
      throw ConfigError(err.message());
    }
    const auto dir = detail::prepare_dir(g.out.value_or("."));
    const std::uint64_t hash = hash_parameters({{"command", "table1"},
                                                {"samples", std::to_string(prm.samples)},
                                                {"h", format_number(prm.h)},
                                                {"epsilons", detail::join(prm.epsilons)},
                                                {"modes", detail::join(prm.modes)}});
    const Table1Result t = table1(prm);
    for (const char* name : {"table1.csv", "table1_stderr.csv"}) {
      const bool err = std::string(name) == "table1.csv";
      CsvWriter w(dir / name, hash, prm.seed, {"epsilon", "N2", "N3", "N4", "N5", "N6"});
      for (std::size_t e = 0; e < t.epsilons.size(); ++e) {
        const auto& row = err ? t.rel_error[e] : t.rel_stderr[e];
        w.row(t.epsilons[e], row[0], row[1], row[2], row[3], row[4]);
      }
    }
    detail::write_counters(dir, hash, prm.seed, t.counters);
    {
      CsvWriter w(dir / "timings.csv", hash, prm.seed, {"stage", "seconds"});
      w.row("total", t.seconds);
    }
    for (std::size_t e = 0; e < t.epsilons.size(); ++e) {
      s.out << "eps " << t.epsilons[e] << ":";
      for (double v : t.rel_error[e]) s.out << ' ' << format_short(v);
      s.out << '\n';
    }
  });
}

struct ConvergeOptions {
  int dim = 1;
  std::vector<double> h{0.2, 0.1, 0.05, 0.025};
  std::size_t modes = 10;
  std::string mode = "quadrature";
  double epsilon = 0.5;
  std::size_t samples = 10000;
};

/// Mesh-refinement study against the closed-form 1D mean.
inline int cmd_converge(const ConvergeOptions& o, const GlobalOptions& g, Streams s) {
  return guarded(s, [&] {
    if (o.dim != 1) throw ConfigError("converge needs a closed-form mean and supports --dim 1 only");
    if (o.h.empty()) throw ConfigError("--h needs at least one value");
    for (std::size_t i = 0; i < o.h.size(); ++i) {
      if (!(o.h[i] > 0.0)) throw ConfigError("--h values must be positive");
      if (i > 0 && !(o.h[i] < o.h[i - 1])) throw ConfigError("--h values must be strictly decreasing");
      try {
        cells_for_spacing(1.0, o.h[i]);
      } catch (const InvalidData& err) {
        throw ConfigError(err.message());
      }
    }
    if (o.mode != "quadrature" && o.mode != "mc") throw ConfigError("--mode must be quadrature or mc");
    if (!(o.epsilon >= 0.0 && o.epsilon <= 1.0)) throw ConfigError("--epsilon must lie in [0, 1]");
    if (o.modes < 1) throw ConfigError("--modes must be >= 1");
    ConvergeParams prm;
    prm.h = o.h;
    prm.epsilon = o.epsilon;
    prm.modes = o.modes;
    prm.mode = o.mode == "mc" ? ExpectationMode::MonteCarlo : ExpectationMode::Quadrature;
    prm.samples = o.samples;
    prm.seed = g.seed.value_or(0);
    prm.workers = g.workers.value_or(1);
    SolverConfig probe;
    probe.epsilon = prm.epsilon;
    detail::warn_epsilon(probe, s.diag);
    const auto dir = detail::prepare_dir(g.out.value_or("."));
    const std::uint64_t hash = hash_parameters({{"command", "converge"},
                                                {"h", detail::join(prm.h)},
                                                {"epsilon", format_number(prm.epsilon)},
                                                {"modes", std::to_string(prm.modes)},
                                                {"mode", o.mode},
                                                {"samples", std::to_string(prm.samples)}});
    const ConvergeResult c = converge_1d(prm);
    CsvWriter w(dir / "converge.csv", hash, prm.seed, {"h", "err_h1", "order_h1", "err_l2", "order_l2"});
    auto order = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
    for (std::size_t i = 0; i < c.h1.rows.size(); ++i) {
      w.row(c.h1.rows[i].parameter, c.h1.rows[i].error, order(c.h1.rows[i].order), c.l2.rows[i].error,
            order(c.l2.rows[i].order));
      s.out << "h " << format_short(c.h1.rows[i].parameter) << ": H1 " << format_short(c.h1.rows[i].error)
            << ", L2 " << format_short(c.l2.rows[i].error) << '\n';
    }
  });
}

/// Multi-modes vs brute-force distances and wall-time ratio from a 2D config.
inline int cmd_compare(const std::string& config_path, const GlobalOptions& g, Streams s) {
  return guarded(s, [&] {
    const ExperimentConfig e = detail::load_with_overrides(config_path, g);
    if (dimension(e.domain) != 2) throw ConfigError("compare needs mesh.dim = 2");
    for (double eps : e.compare.epsilons) {
      SolverConfig probe;
      probe.epsilon = eps;
      detail::warn_epsilon(probe, s.diag);
    }
    const auto dir = detail::prepare_dir(e.output_dir);
    const Problem p = make_problem(e);
    const CompareResult c = compare(p, e.compare);
    const std::uint64_t seed = e.solver.seed;
    {
      CsvWriter w(dir / "compare.csv", e.hash, seed, {"epsilon", "N", "rel_l2_distance"});
      for (const auto& row : c.rows) w.row(row.epsilon, row.modes, row.rel_l2_distance);
    }
    {
      CsvWriter w(dir / "timings.csv", e.hash, seed, {"solver", "N", "seconds"});
      for (const auto& t : c.timings) w.row(t.solver, t.modes, t.seconds);
    }
    {
      CsvWriter w(dir / "counters.csv", e.hash, seed,
                  {"solver", "epsilon", "factorizations", "solve_pairs", "matvecs", "assemblies"});
      const auto& m = c.multi_counters;
      w.row("multimodes", "", m.factorizations, m.triangular_solve_pairs, m.matvecs, m.assemblies);
      for (std::size_t i = 0; i < c.brute_counters.size(); ++i) {
        const auto& b = c.brute_counters[i];
        w.row("bruteforce", format_number(e.compare.epsilons[i]), b.factorizations, b.triangular_solve_pairs,
              b.matvecs, b.assemblies);
      }
    }
    for (const auto& row : c.rows) {
      s.out << "eps " << format_short(row.epsilon) << ", N " << row.modes << ": "
            << format_short(row.rel_l2_distance) << '\n';
    }
    s.out << "wall-time ratio bruteforce / multimodes (N = " << e.compare.timing_modes
          << "): " << format_short(c.speedup) << '\n';
  });
}

struct KLOptions {
  int dim = 1;
  int exponent = 1;
  double length = 0.5;
  std::size_t nodes = 400;
  std::size_t terms = 10;
  double mean = 1.0;
  std::string noise = "normal";
  std::string nystrom = "plain";
  std::size_t solve_samples = 0;  // 0: spectrum only
  std::size_t solve_modes = 4;
  std::size_t cells = 32;
};

/// KL spectrum, weak-form summary and an optional multi-modes solve on it.
inline int cmd_kl(const KLOptions& o, const GlobalOptions& g, Streams s) {
  return guarded(s, [&] {
    if (o.dim != 1 && o.dim != 2) throw ConfigError("--dim must be 1 or 2");
    if (o.noise != "normal" && o.noise != "uniform") throw ConfigError("--noise must be normal or uniform");
    if (o.exponent != 1 && o.exponent != 2) throw ConfigError("--exponent must be 1 or 2");
    if (!(o.length > 0.0 && o.length < 1.0)) throw ConfigError("--length must lie in (0, 1)");
    if (o.nodes < 1) throw ConfigError("--nodes must be >= 1");
    if (o.terms < 1 || o.terms > o.nodes) throw ConfigError("--terms must lie in [1, --nodes]");
    if (o.nystrom != "plain" && o.nystrom != "corrected") throw ConfigError("--nystrom must be plain or corrected");
    if (o.nystrom == "corrected" && o.dim != 1) throw ConfigError("--nystrom corrected needs --dim 1");
    if (!(o.mean > 0.0)) throw ConfigError("--mean must be positive");
    if (o.solve_samples > 0 && (o.cells < 2 || o.solve_modes < 1)) throw ConfigError("--cells >= 2, --modes >= 1");
    KLParams prm;
    prm.kernel = ExpAbsKernel{o.exponent, o.length};
    prm.domain = o.dim == 1 ? Domain{Interval1D{0.0, 1.0}} : Domain{Rect2D{0.0, 1.0, 0.0, 1.0}};
    prm.nodes = o.nodes;
    prm.terms = o.terms;
    prm.mean = o.mean;
    prm.noise = o.noise == "normal" ? Noise::Normal : Noise::Uniform;
    prm.rule = o.nystrom == "plain" ? NystromRule::Plain : NystromRule::DiagonalCorrected;
    const std::uint64_t seed = g.seed.value_or(0);
    const std::uint64_t hash = hash_parameters({{"command", "kl"},
                                                {"dim", std::to_string(o.dim)},
                                                {"exponent", std::to_string(o.exponent)},
                                                {"length", format_number(o.length)},
                                                {"nodes", std::to_string(o.nodes)},
                                                {"terms", std::to_string(o.terms)},
                                                {"mean", format_number(o.mean)},
                                                {"noise", o.noise},
                                                {"nystrom", o.nystrom},
                                                {"solve_samples", std::to_string(o.solve_samples)},
                                                {"solve_modes", std::to_string(o.solve_modes)},
                                                {"cells", std::to_string(o.cells)}});
    const auto dir = detail::prepare_dir(g.out.value_or("."));
    const KLSummary k = kl_summary(prm);
    {
      CsvWriter w(dir / "kl.csv", hash, seed, {"k", "lambda_k"});
      for (std::size_t i = 0; i < o.terms; ++i) w.row(i + 1, k.basis->eigenvalues[i]);
    }
    {
      CsvWriter w(dir / "kl_summary.csv", hash, seed, {"quantity", "value"});
      w.row("a0", k.weak.a0);
      w.row("epsilon", k.weak.epsilon);
      w.row("trace", k.trace);
      w.row("kernel_trace", k.kernel_trace);
      for (std::size_t i = 0; i < k.weak.eta.coefficients.size(); ++i) {
        w.row("zeta_coefficient_" + std::to_string(i + 1), k.weak.eta.coefficients[i]);
      }
    }
    s.out << "epsilon = sqrt(lambda_1) = " << format_short(k.weak.epsilon) << ", trace " << format_short(k.trace)
          << '\n';
    if (o.solve_samples > 0) {
      SolverConfig cfg;
      cfg.epsilon = k.weak.epsilon;
      cfg.modes = o.solve_modes;
      cfg.samples = o.solve_samples;
      cfg.seed = seed;
      cfg.workers = g.workers.value_or(1);
      detail::warn_epsilon(cfg, s.diag);
      Problem p;
      p.mesh = build_mesh(prm.domain, o.cells);
      p.a0 = constant_field(k.weak.a0);
      p.eta = k.weak.eta;
      p.f = constant_field(1.0);
      const RunResult r = run_multimode_mc(p, cfg);
      if (r.outside_convergence_regime) {
        s.diag << "warning: mode norms grow with n; the truncated series is not converging\n";
      }
      detail::write_run(dir, hash, seed, p.mesh, r);
    }
  });
}

}  // namespace mmmc::cli

#endif  // MMMC_CLI_HPP
