#ifndef MMMC_EXPERIMENTS_HPP
#define MMMC_EXPERIMENTS_HPP

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mmmc/analysis.hpp"
#include "mmmc/errors.hpp"
#include "mmmc/mesh.hpp"
#include "mmmc/random_fields.hpp"
#include "mmmc/solver.hpp"

namespace mmmc {

/// -((1 + eps Y) u')' = Y on (0, 1), Y ~ U[0, 1]: eta and f share one variable.
inline Problem uniform_1d_problem(std::size_t n_cells) {
  Problem p;
  p.mesh = build_mesh_1d({0.0, 1.0}, n_cells);
  p.a0 = constant_field(1.0);
  p.eta = ScalarUniform{0.0, 1.0, 0};
  p.f = ScalarUniform{0.0, 1.0, 0};
  return p;
}

/// a0 = 1 on (0, 2)^2 with the trigonometric-series eta and f.
inline Problem trig_2d_problem(std::size_t n_cells_per_dir) {
  Problem p;
  p.mesh = build_mesh_2d({0.0, 2.0, 0.0, 2.0}, n_cells_per_dir);
  p.a0 = constant_field(1.0);
  p.eta = TrigSeriesEta2D{};
  p.f = TrigSeriesF2D{};
  return p;
}

/// Number of cells giving spacing h on an interval of length `length`.
inline std::size_t cells_for_spacing(double length, double h) {
  if (!(h > 0.0)) throw InvalidData("mesh spacing must be positive");
  const double n = length / h;
  const double rounded = std::round(n);
  if (std::abs(n - rounded) > 1e-9 * std::max(1.0, n)) {
    throw InvalidData("spacing " + std::to_string(h) + " does not divide the domain length");
  }
  return static_cast<std::size_t>(rounded);
}

// ---------------------------------------------------------------------------
// Relative L2 error grid over (eps, N) for the 1D uniform problem

struct Table1Params {
  std::size_t samples = 100000;
  double h = 0.01;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::vector<double> epsilons{0.2, 0.4, 0.6, 0.8};
  std::vector<std::size_t> modes{2, 3, 4, 5, 6};
};

struct Table1Result {
  std::vector<double> epsilons;
  std::vector<std::size_t> modes;
  std::vector<std::vector<double>> rel_error;   // [eps][N]
  std::vector<std::vector<double>> rel_stderr;  // MC standard error of the cell, relative to ||E u||
  OpCounters counters;
  double seconds = 0.0;
};

/// The modes do not depend on eps, so a single mode computation up to
/// max N serves every cell; each cell's estimator is sum_{n<N} eps^n Phi_n.
inline Table1Result table1(const Table1Params& prm) {
  if (prm.epsilons.empty() || prm.modes.empty()) throw InvalidData("table needs at least one row and column");
  std::size_t n_max = 0;
  for (std::size_t N : prm.modes) n_max = std::max(n_max, N);
  const Problem p = uniform_1d_problem(cells_for_spacing(1.0, prm.h));
  SolverConfig cfg;
  cfg.modes = n_max;
  cfg.samples = prm.samples;
  cfg.seed = prm.seed;
  cfg.workers = prm.workers;
  const std::size_t E = prm.epsilons.size(), C = prm.modes.size(), n = p.mesh.num_interior();

  // per worker, per cell: moments of U_N(eps) for the standard error
  std::vector<std::vector<detail::NodeMoments>> moments(effective_workers(cfg),
                                                        std::vector<detail::NodeMoments>(E * C, detail::NodeMoments(n)));
  std::vector<std::vector<double>> scratch(effective_workers(cfg), std::vector<double>(n));
  const RunResult r = run_multimode_mc(p, cfg, [&](std::size_t w, std::size_t, std::span<const FieldVector> modes) {
    auto& U = scratch[w];
    for (std::size_t e = 0; e < E; ++e) {
      std::fill(U.begin(), U.end(), 0.0);
      double weight = 1.0;
      for (std::size_t m = 0; m < n_max; ++m) {
        for (std::size_t i = 0; i < n; ++i) U[i] += weight * modes[m][i];
        weight *= prm.epsilons[e];
        for (std::size_t c = 0; c < C; ++c) {
          if (prm.modes[c] == m + 1) moments[w][e * C + c].add(U);
        }
      }
    }
  });

  Table1Result t;
  t.epsilons = prm.epsilons;
  t.modes = prm.modes;
  t.counters = r.counters;
  t.seconds = r.timings.total;
  for (std::size_t e = 0; e < E; ++e) {
    const ExactField exact = exact_expectation_1d(prm.epsilons[e]);
    const double exact_norm = error_vs_exact(p.mesh, FieldVector(n, p.mesh.id), exact, NormKind::L2);
    std::vector<double> errs, ses;
    for (std::size_t c = 0; c < C; ++c) {
      const FieldVector psi = reweighted_estimator(r, prm.epsilons[e], prm.modes[c]);
      errs.push_back(error_vs_exact(p.mesh, psi, exact, NormKind::RelativeL2));
      detail::NodeMoments merged(n);
      for (const auto& wm : moments) merged.merge(wm[e * C + c]);
      if (prm.samples > 1) {
        FieldVector var(n, p.mesh.id);
        for (std::size_t i = 0; i < n; ++i) var[i] = merged.m2[i] / static_cast<double>(prm.samples - 1);
        ses.push_back(mc_l2_standard_error(p.mesh, var, prm.samples) / exact_norm);
      } else {
        ses.push_back(0.0);
      }
    }
    t.rel_error.push_back(std::move(errs));
    t.rel_stderr.push_back(std::move(ses));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Mesh-refinement study for the 1D uniform problem

enum class ExpectationMode { MonteCarlo, Quadrature };

struct ConvergeParams {
  std::vector<double> h{0.2, 0.1, 0.05, 0.025};
  double epsilon = 0.5;
  std::size_t modes = 10;
  ExpectationMode mode = ExpectationMode::Quadrature;
  std::size_t samples = 10000;  // MonteCarlo only
  std::size_t quadrature_nodes = 64;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool relative = false;
};

struct ConvergeResult {
  ConvergenceTable h1;
  ConvergenceTable l2;
};

inline RunResult expectation_1d(const Problem& p, const SolverConfig& cfg, ExpectationMode mode, std::size_t nodes) {
  return mode == ExpectationMode::Quadrature ? quadrature_expectation_1d(p, cfg, nodes) : run_multimode_mc(p, cfg);
}

inline ConvergeResult converge_1d(const ConvergeParams& prm) {
  if (prm.h.empty()) throw InvalidData("need at least one mesh size");
  std::vector<std::pair<double, double>> h1, l2;
  const ExactField exact = exact_expectation_1d(prm.epsilon);
  for (double h : prm.h) {
    const Problem p = uniform_1d_problem(cells_for_spacing(1.0, h));
    SolverConfig cfg;
    cfg.epsilon = prm.epsilon;
    cfg.modes = prm.modes;
    cfg.samples = prm.samples;
    cfg.seed = prm.seed;
    cfg.workers = prm.workers;
    const RunResult r = expectation_1d(p, cfg, prm.mode, prm.quadrature_nodes);
    h1.emplace_back(h, error_vs_exact(p.mesh, r.psi, exact, prm.relative ? NormKind::RelativeH1 : NormKind::H1));
    l2.emplace_back(h, error_vs_exact(p.mesh, r.psi, exact, prm.relative ? NormKind::RelativeL2 : NormKind::L2));
  }
  return {convergence_orders(h1), convergence_orders(l2)};
}

/// Relative H1 error against the exact mean for N = 1..max_modes at a fixed mesh.
inline std::vector<double> truncation_errors_1d(double h, double epsilon, std::size_t max_modes,
                                                ExpectationMode mode = ExpectationMode::Quadrature,
                                                std::size_t samples = 10000, std::uint64_t seed = 0) {
  const Problem p = uniform_1d_problem(cells_for_spacing(1.0, h));
  SolverConfig cfg;
  cfg.epsilon = epsilon;
  cfg.modes = max_modes;
  cfg.samples = samples;
  cfg.seed = seed;
  const RunResult r = expectation_1d(p, cfg, mode, 64);
  const ExactField exact = exact_expectation_1d(epsilon);
  std::vector<double> errs;
  for (std::size_t N = 1; N <= max_modes; ++N) {
    errs.push_back(error_vs_exact(p.mesh, reweighted_estimator(r, epsilon, N), exact, NormKind::RelativeH1));
  }
  return errs;
}

// ---------------------------------------------------------------------------
// Multi-modes vs classical Monte Carlo on shared samples

struct CompareParams {
  std::vector<double> epsilons{0.2, 0.4};
  std::size_t max_modes = 5;
  std::size_t timing_modes = 3;
  std::size_t samples = 500;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool measure_time = true;
};

struct CompareRow {
  double epsilon = 0.0;
  std::size_t modes = 0;
  double rel_l2_distance = 0.0;
};

struct TimingRow {
  std::string solver;
  std::size_t modes = 0;  // 0 for brute force
  double seconds = 0.0;
};

struct CompareResult {
  std::vector<CompareRow> rows;
  std::vector<TimingRow> timings;
  double speedup = 0.0;  // brute / multi-modes at timing_modes
  OpCounters multi_counters;
  std::vector<OpCounters> brute_counters;
};

inline CompareResult compare(const Problem& p, const CompareParams& prm) {
  if (prm.max_modes < 2) throw InvalidData("comparison needs max_modes >= 2");
  CompareResult out;
  SolverConfig base;
  base.samples = prm.samples;
  base.seed = prm.seed;
  base.workers = prm.workers;

  // modes are eps-independent: one run to max_modes, reweighted per eps
  SolverConfig mcfg = base;
  mcfg.modes = prm.max_modes;
  const RunResult multi = run_multimode_mc(p, mcfg);
  out.multi_counters = multi.counters;
  for (double eps : prm.epsilons) {
    SolverConfig bcfg = base;
    bcfg.epsilon = eps;
    const RunResult brute = run_bruteforce_mc(p, bcfg);
    out.brute_counters.push_back(brute.counters);
    for (std::size_t N = 2; N <= prm.max_modes; ++N) {
      const FieldVector psi = reweighted_estimator(multi, eps, N);
      out.rows.push_back({eps, N, discrete_distance(p.mesh, psi, brute.psi, NormKind::RelativeL2)});
    }
  }

  if (prm.measure_time && !prm.epsilons.empty()) {
    const double eps = prm.epsilons.front();
    // warm-up, excluded from timing
    SolverConfig warm = base;
    warm.samples = std::min<std::size_t>(prm.samples, 5);
    warm.epsilon = eps;
    run_bruteforce_mc(p, warm);
    warm.modes = prm.timing_modes;
    run_multimode_mc(p, warm);

    SolverConfig bcfg = base;
    bcfg.epsilon = eps;
    const double brute_time = run_bruteforce_mc(p, bcfg).timings.total;
    out.timings.push_back({"bruteforce", 0, brute_time});
    for (std::size_t N = 2; N <= std::max(prm.max_modes, prm.timing_modes); ++N) {
      SolverConfig tcfg = base;
      tcfg.epsilon = eps;
      tcfg.modes = N;
      const double t = run_multimode_mc(p, tcfg).timings.total;
      out.timings.push_back({"multimodes", N, t});
      if (N == prm.timing_modes) out.speedup = brute_time / t;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// KL spectrum and weak-form rewriting

struct KLParams {
  ExpAbsKernel kernel{1, 0.5};
  Domain domain = Interval1D{0.0, 1.0};
  std::size_t nodes = 400;
  std::size_t terms = 10;
  double mean = 1.0;
  Noise noise = Noise::Normal;
  NystromRule rule = NystromRule::Plain;
};

struct KLSummary {
  std::shared_ptr<const KLBasis> basis;
  WeakForm weak;
  double trace = 0.0;         // sum of all discrete eigenvalues
  double kernel_trace = 0.0;  // quadrature of C(x, x)
};

inline KLSummary kl_summary(const KLParams& prm) {
  KLSummary s;
  s.basis = std::make_shared<const KLBasis>(kl_decompose(prm.kernel, prm.domain, prm.nodes, prm.terms, prm.rule));
  s.weak = kl_to_weak_form(prm.mean, s.basis, prm.terms, prm.noise);
  for (double l : s.basis->eigenvalues) s.trace += l;
  for (std::size_t j = 0; j < s.basis->nodes.size(); ++j) {
    s.kernel_trace += s.basis->weights[j] * covariance(s.basis->kernel, s.basis->nodes[j], s.basis->nodes[j]);
  }
  return s;
}

}  // namespace mmmc

#endif  // MMMC_EXPERIMENTS_HPP
