#ifndef MMMC_SOLVER_HPP
#define MMMC_SOLVER_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mmmc/assembly.hpp"
#include "mmmc/errors.hpp"
#include "mmmc/mesh.hpp"
#include "mmmc/quadrature.hpp"
#include "mmmc/random_fields.hpp"
#include "mmmc/sparse.hpp"
#include "mmmc/sparse_direct.hpp"

namespace mmmc {

enum class SolverVariant { MultiModes, BruteForce };

struct SolverConfig {
  double epsilon = 0.0;
  std::size_t modes = 1;    // N
  std::size_t samples = 1;  // M
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  SolverVariant variant = SolverVariant::MultiModes;
  std::optional<QuadratureRule> quadrature;  // defaults to assembly_rule(dim)

  /// epsilon >= 1 lies outside the regime where the mode series is known to converge.
  bool epsilon_warning() const { return epsilon >= 1.0; }

  void validate() const {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw InvalidData("epsilon must be finite and >= 0");
    if (modes < 1) throw InvalidData("need at least one mode");
    if (samples < 1) throw InvalidData("need at least one sample");
    if (workers < 1) throw InvalidData("need at least one worker");
  }
};

/// Deterministic background coefficient a0, the random perturbation eta and
/// the random source f on a mesh.
struct Problem {
  Mesh mesh;
  Deterministic a0 = constant_field(1.0);
  RandomFieldSpec eta = constant_field(0.0);
  RandomFieldSpec f = constant_field(1.0);
};

struct Timings {
  double assembly = 0.0;
  double factorization = 0.0;
  double solves = 0.0;
  double total = 0.0;
};

struct RunResult {
  SolverVariant variant = SolverVariant::MultiModes;
  double epsilon = 0.0;
  std::size_t samples = 0;
  FieldVector psi;                       // sample mean of U_N
  std::vector<FieldVector> mode_means;   // Phi_n, n = 0..N-1 (multi-modes only)
  std::vector<double> mode_h1_means;     // sample mean of ||u_n||_H1 (unweighted)
  FieldVector variance;                  // per-node sample variance of U_N (0 when M = 1)
  OpCounters counters;
  Timings timings;
  bool outside_convergence_regime = false;
  bool epsilon_warning = false;

  /// sample mean of ||eps^n u_n||_H1
  double weighted_mode_h1(std::size_t n) const { return std::pow(epsilon, static_cast<double>(n)) * mode_h1_means[n]; }
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline double h1_norm(const SparseMatrix& gram, const FieldVector& v) {
  return std::sqrt(std::max(0.0, gram.quadratic_form(v.values)));
}

// Welford accumulator per node.
struct NodeMoments {
  std::size_t count = 0;
  std::vector<double> mean;
  std::vector<double> m2;

  explicit NodeMoments(std::size_t n = 0) : mean(n, 0.0), m2(n, 0.0) {}

  void add(std::span<const double> x) {
    ++count;
    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - mean[i];
      mean[i] += d * inv;
      m2[i] += d * (x[i] - mean[i]);
    }
  }

  void merge(const NodeMoments& o) {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(count), nb = static_cast<double>(o.count), n = na + nb;
    for (std::size_t i = 0; i < mean.size(); ++i) {
      const double d = o.mean[i] - mean[i];
      mean[i] += d * nb / n;
      m2[i] += o.m2[i] + d * d * na * nb / n;
    }
    count += o.count;
  }
};

struct WorkerState {
  std::vector<double> sum_u;                // sum_j U_N(omega_j)
  std::vector<std::vector<double>> sum_modes;
  std::vector<double> sum_mode_h1;
  NodeMoments moments;
  OpCounters counters;
  Timings timings;
  bool diverging = false;
  std::exception_ptr error;
};

// Runs body(state, w, begin, end) on contiguous sample blocks, one thread per worker
// (inline when there is a single worker), and rethrows the first error in
// worker order.
template <typename Body>
void for_each_block(std::size_t samples, std::size_t workers, std::vector<WorkerState>& states, Body&& body) {
  workers = std::min(workers, samples);
  states.resize(workers);
  auto run = [&](std::size_t w) {
    const std::size_t begin = w * samples / workers;
    const std::size_t end = (w + 1) * samples / workers;
    try {
      body(states[w], w, begin, end);
    } catch (...) {
      states[w].error = std::current_exception();
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(run, w);
    for (auto& t : threads) t.join();
  }
  for (const auto& s : states) {
    if (s.error) std::rethrow_exception(s.error);
  }
}

}  // namespace detail

/// Runs the mode recursion for one sample with the shared factorization:
/// u_0 = K^{-1} b_f, u_n = K^{-1}(-K_eta u_{n-1}). Calls visit(n, u_n) for
/// each mode; only the previous mode is kept alive.
template <typename Visitor>
void for_each_mode(const Factorization& F, const SparseMatrix* K_eta, const FieldVector& f_load, std::size_t N,
                   OpCounters& counters, Visitor&& visit) {
  if (N < 1) throw InvalidData("need at least one mode");
  if (F.dim() != f_load.size()) throw ShapeError("factorization and load vector dimensions differ");
  FieldVector u = solve_with_factors(F, f_load, counters);
  visit(std::size_t{0}, static_cast<const FieldVector&>(u));
  for (std::size_t n = 1; n < N; ++n) {
    if (!K_eta) throw InvalidData("perturbation matrix required for N > 1");
    const FieldVector rhs = mode_rhs(*K_eta, u);
    ++counters.matvecs;
    u = solve_with_factors(F, rhs, counters);
    visit(n, static_cast<const FieldVector&>(u));
  }
}

struct ModeSolution {
  FieldVector partial_sum;  // U_N = sum_n eps^n u_n
  std::vector<FieldVector> modes;
};

inline ModeSolution solve_modes_one_sample(const Factorization& F, const SparseMatrix& K_eta, const FieldVector& f_load,
                                           std::size_t N, double epsilon, OpCounters& counters) {
  if (K_eta.dim() != f_load.size()) throw ShapeError("perturbation matrix and load vector dimensions differ");
  ModeSolution out;
  out.partial_sum = FieldVector(f_load.size(), f_load.mesh_id);
  double weight = 1.0;
  for_each_mode(F, &K_eta, f_load, N, counters, [&](std::size_t, const FieldVector& u) {
    for (std::size_t i = 0; i < u.size(); ++i) out.partial_sum[i] += weight * u[i];
    weight *= epsilon;
    out.modes.push_back(u);
  });
  return out;
}

/// Partial-sum estimator sum_{n<N} eps^n Phi_n from a multi-modes run's
/// per-mode means; valid for any eps since the modes do not depend on it.
inline FieldVector reweighted_estimator(const RunResult& r, double epsilon, std::size_t N) {
  if (N == 0 || N > r.mode_means.size()) throw InvalidData("N outside the computed modes");
  FieldVector psi(r.mode_means[0].size(), r.mode_means[0].mesh_id);
  double weight = 1.0;
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t i = 0; i < psi.size(); ++i) psi[i] += weight * r.mode_means[n][i];
    weight *= epsilon;
  }
  return psi;
}

namespace detail {

inline RunResult finalize(const Problem& p, const SolverConfig& cfg, std::vector<WorkerState>& states,
                          std::size_t modes_tracked) {
  const std::size_t n = p.mesh.num_interior();
  const double M = static_cast<double>(cfg.samples);
  RunResult r;
  r.variant = cfg.variant;
  r.epsilon = cfg.epsilon;
  r.samples = cfg.samples;
  r.epsilon_warning = cfg.epsilon_warning();
  r.psi = FieldVector(n, p.mesh.id);
  r.variance = FieldVector(n, p.mesh.id);
  std::vector<double> sum(n, 0.0);
  std::vector<std::vector<double>> mode_sums(modes_tracked, std::vector<double>(n, 0.0));
  std::vector<double> h1(modes_tracked, 0.0);
  NodeMoments moments(n);
  for (const auto& s : states) {
    for (std::size_t i = 0; i < n; ++i) sum[i] += s.sum_u[i];
    for (std::size_t k = 0; k < modes_tracked; ++k) {
      for (std::size_t i = 0; i < n; ++i) mode_sums[k][i] += s.sum_modes[k][i];
      h1[k] += s.sum_mode_h1[k];
    }
    moments.merge(s.moments);
    r.counters += s.counters;
    r.timings.assembly += s.timings.assembly;
    r.timings.factorization += s.timings.factorization;
    r.timings.solves += s.timings.solves;
    r.outside_convergence_regime = r.outside_convergence_regime || s.diverging;
  }
  for (std::size_t i = 0; i < n; ++i) {
    r.psi[i] = sum[i] / M;
    r.variance[i] = cfg.samples > 1 ? moments.m2[i] / (M - 1.0) : 0.0;
  }
  for (std::size_t k = 0; k < modes_tracked; ++k) {
    FieldVector phi(n, p.mesh.id);
    for (std::size_t i = 0; i < n; ++i) phi[i] = mode_sums[k][i] / M;
    r.mode_means.push_back(std::move(phi));
    r.mode_h1_means.push_back(h1[k] / M);
  }
  return r;
}

inline SparseMatrix h1_gram(const Mesh& mesh, const std::shared_ptr<const SparsityPattern>& pattern) {
  SparseMatrix G = assemble_mass(mesh, pattern);
  const SparseMatrix K1 = assemble_stiffness(mesh, [](const Point&) { return 1.0; }, assembly_rule(mesh.dim()), pattern);
  auto g = G.values();
  const auto k = K1.values();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += k[i];
  return G;
}

}  // namespace detail

/// Called once per sample with the worker index, the sample index and the
/// modes u_0..u_{N-1}. Runs on the worker's thread.
using SampleObserver = std::function<void(std::size_t, std::size_t, std::span<const FieldVector>)>;

/// Number of workers a run actually uses.
inline std::size_t effective_workers(const SolverConfig& cfg) { return std::min(cfg.workers, cfg.samples); }

/// Multi-modes Monte Carlo estimator Psi_N^h: one factorization of the a0
/// stiffness matrix, then M*N triangular solve pairs.
inline RunResult run_multimode_mc(const Problem& p, SolverConfig cfg, const SampleObserver& observer = {}) {
  cfg.variant = SolverVariant::MultiModes;
  cfg.validate();
  validate(p.eta);
  validate(p.f);
  const auto t_start = detail::Clock::now();
  const Mesh& mesh = p.mesh;
  const QuadratureRule quad = cfg.quadrature.value_or(assembly_rule(mesh.dim()));
  const auto pattern = make_pattern(mesh);
  const std::size_t n = mesh.num_interior();
  const std::size_t N = cfg.modes;

  OpCounters shared;
  Timings shared_t;
  auto t0 = detail::Clock::now();
  SparseMatrix K0;
  try {
    K0 = assemble_stiffness(mesh, p.a0.fn, quad, pattern);
  } catch (Error& e) {
    e.annotate("assembly of a0 stiffness", std::nullopt);
    throw;
  }
  ++shared.assemblies;
  shared_t.assembly += detail::seconds_since(t0);
  t0 = detail::Clock::now();
  Factorization F;
  try {
    F = factorize(K0, shared);
  } catch (Error& e) {
    e.annotate("factorization", std::nullopt);
    throw;
  }
  shared_t.factorization += detail::seconds_since(t0);
  const SparseMatrix gram = detail::h1_gram(mesh, pattern);

  std::vector<detail::WorkerState> states;
  detail::for_each_block(cfg.samples, cfg.workers, states, [&](detail::WorkerState& s, std::size_t w, std::size_t begin,
                                                               std::size_t end) {
    std::vector<FieldVector> observed;
    s.sum_u.assign(n, 0.0);
    s.sum_modes.assign(N, std::vector<double>(n, 0.0));
    s.sum_mode_h1.assign(N, 0.0);
    s.moments = detail::NodeMoments(n);
    std::vector<double> U(n);
    for (std::size_t j = begin; j < end; ++j) {
      const char* stage = "sampling";
      try {
        const SampleDraw draw = draw_sample(p.eta, p.f, cfg.seed, j);
        stage = "assembly";
        auto ta = detail::Clock::now();
        const FieldVector load = assemble_load_f(mesh, draw.f, quad);
        ++s.counters.assemblies;
        std::optional<SparseMatrix> K_eta;
        if (N > 1) {
          K_eta = assemble_perturbation_matrix(mesh, draw.eta, quad, pattern);
          ++s.counters.assemblies;
        }
        s.timings.assembly += detail::seconds_since(ta);

        stage = "mode solves";
        ta = detail::Clock::now();
        std::fill(U.begin(), U.end(), 0.0);
        double weight = 1.0;
        double first_norm = 0.0, last_norm = 0.0;
        for_each_mode(F, K_eta ? &*K_eta : nullptr, load, N, s.counters, [&](std::size_t k, const FieldVector& u) {
          for (std::size_t i = 0; i < n; ++i) {
            U[i] += weight * u[i];
            s.sum_modes[k][i] += u[i];
          }
          const double norm = detail::h1_norm(gram, u);
          s.sum_mode_h1[k] += norm;
          if (k == 0) first_norm = norm;
          if (k == N - 1) last_norm = weight * norm;
          weight *= cfg.epsilon;
          if (observer) {
            if (k == 0) observed.clear();
            observed.push_back(u);
          }
        });
        if (observer) observer(w, j, observed);
        s.timings.solves += detail::seconds_since(ta);
        if (N > 1 && last_norm > first_norm) s.diverging = true;
        for (std::size_t i = 0; i < n; ++i) s.sum_u[i] += U[i];
        s.moments.add(U);
      } catch (Error& e) {
        e.annotate(stage, j);
        throw;
      }
    }
  });

  RunResult r = detail::finalize(p, cfg, states, N);
  r.counters += shared;
  r.timings.assembly += shared_t.assembly;
  r.timings.factorization += shared_t.factorization;
  r.timings.total = detail::seconds_since(t_start);
  return r;
}

/// Classical Monte Carlo reference: per sample, assemble and factor the
/// stiffness matrix of a0 + eps * eta_j and solve once. A sample whose
/// coefficient loses positivity aborts the run with CoercivityViolation.
inline RunResult run_bruteforce_mc(const Problem& p, SolverConfig cfg) {
  cfg.variant = SolverVariant::BruteForce;
  cfg.validate();
  validate(p.eta);
  validate(p.f);
  const auto t_start = detail::Clock::now();
  const Mesh& mesh = p.mesh;
  const QuadratureRule quad = cfg.quadrature.value_or(assembly_rule(mesh.dim()));
  const auto pattern = make_pattern(mesh);
  const std::size_t n = mesh.num_interior();
  const double eps = cfg.epsilon;

  std::vector<detail::WorkerState> states;
  detail::for_each_block(cfg.samples, cfg.workers, states, [&](detail::WorkerState& s, std::size_t, std::size_t begin,
                                                               std::size_t end) {
    s.sum_u.assign(n, 0.0);
    s.moments = detail::NodeMoments(n);
    for (std::size_t j = begin; j < end; ++j) {
      const char* stage = "sampling";
      try {
        const SampleDraw draw = draw_sample(p.eta, p.f, cfg.seed, j);
        stage = "assembly";
        auto t0 = detail::Clock::now();
        const auto coeff = [&](const Point& x) { return p.a0.fn(x) + eps * draw.eta(x); };
        const SparseMatrix K = assemble_stiffness(mesh, coeff, quad, pattern);
        const FieldVector load = assemble_load_f(mesh, draw.f, quad);
        s.counters.assemblies += 2;
        s.timings.assembly += detail::seconds_since(t0);
        stage = "factorization";
        t0 = detail::Clock::now();
        const Factorization F = factorize(K, s.counters);
        s.timings.factorization += detail::seconds_since(t0);
        stage = "solve";
        t0 = detail::Clock::now();
        const FieldVector u = solve_with_factors(F, load, s.counters);
        s.timings.solves += detail::seconds_since(t0);
        for (std::size_t i = 0; i < n; ++i) s.sum_u[i] += u[i];
        s.moments.add(u.values);
      } catch (Error& e) {
        e.annotate(stage, j);
        throw;
      }
    }
  });

  RunResult r = detail::finalize(p, cfg, states, 0);
  r.timings.total = detail::seconds_since(t_start);
  return r;
}

inline RunResult run(const Problem& p, const SolverConfig& cfg) {
  return cfg.variant == SolverVariant::MultiModes ? run_multimode_mc(p, cfg) : run_bruteforce_mc(p, cfg);
}

}  // namespace mmmc

#endif  // MMMC_SOLVER_HPP
