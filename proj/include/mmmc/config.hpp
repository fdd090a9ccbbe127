#ifndef MMMC_CONFIG_HPP
#define MMMC_CONFIG_HPP

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mmmc/errors.hpp"
#include "mmmc/experiments.hpp"
#include "mmmc/io.hpp"
#include "mmmc/mesh.hpp"
#include "mmmc/random_fields.hpp"
#include "mmmc/solver.hpp"

namespace mmmc {

/// Flat `section.key = value` configuration.
///
///   # comment to end of line
///   mesh.dim = 2
///   compare.epsilons = 0.2, 0.4
///
/// Keys are lowercase [a-z0-9_.]; duplicate and unknown keys are errors.
class KeyValueConfig {
public:
  static KeyValueConfig parse(std::string_view text, const std::set<std::string>& allowed) {
    KeyValueConfig c;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string t = trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (key.empty() || !std::all_of(key.begin(), key.end(), [](char ch) {
            return std::islower(static_cast<unsigned char>(ch)) || std::isdigit(static_cast<unsigned char>(ch)) ||
                   ch == '_' || ch == '.';
          })) {
        throw ConfigError("line " + std::to_string(line_no) + ": malformed key '" + key + "'");
      }
      if (!allowed.contains(key)) throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
      if (value.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty value for '" + key + "'");
      if (!c.values_.emplace(key, value).second) {
        throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
      }
    }
    return c;
  }

  static KeyValueConfig load(const std::string& path, const std::set<std::string>& allowed) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), allowed);
  }

  bool has(const std::string& key) const { return values_.contains(key); }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : to_double(key, it->second);
  }

  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::uint64_t v = 0;
    const auto& s = it->second;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("'" + key + "' is not a non-negative integer: " + s);
    return v;
  }

  std::vector<double> get_list(const std::string& key, std::vector<double> fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    std::istringstream in(it->second);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(to_double(key, trim(item)));
    return out;
  }

  /// FNV-1a over the canonical (sorted) key=value listing. output.dir is
  /// left out so a run hashes the same wherever it writes.
  std::uint64_t hash() const {
    auto v = values_;
    v.erase("output.dir");
    return hash_parameters(v);
  }

  const std::map<std::string, std::string>& values() const { return values_; }

private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static double to_double(const std::string& key, const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("'" + key + "' is not a number: " + s);
    }
  }

  std::map<std::string, std::string> values_;
};

inline const std::set<std::string>& experiment_keys() {
  static const std::set<std::string> keys = {
      "experiment", "output.dir",
      "mesh.dim", "mesh.x_lo", "mesh.x_hi", "mesh.y_lo", "mesh.y_hi", "mesh.cells",
      "solver.epsilon", "solver.modes", "solver.samples", "solver.seed", "solver.workers", "solver.variant",
      "a0.value",
      "eta.kind", "eta.lo", "eta.hi", "eta.stream", "eta.value",
      "eta.terms_x", "eta.terms_y", "eta.decay", "eta.base", "eta.amplitude",
      "eta.kernel", "eta.length", "eta.nodes", "eta.terms", "eta.noise", "eta.nystrom",
      "f.kind", "f.lo", "f.hi", "f.stream", "f.value",
      "f.terms_x", "f.terms_y", "f.decay", "f.amplitude",
      "compare.epsilons", "compare.max_modes", "compare.timing_modes"};
  return keys;
}

struct ExperimentConfig {
  std::string experiment = "run";
  std::string output_dir = ".";
  Domain domain = Interval1D{};
  std::size_t cells = 100;
  double a0 = 1.0;
  RandomFieldSpec eta = constant_field(0.0);
  RandomFieldSpec f = constant_field(1.0);
  SolverConfig solver;
  CompareParams compare;
  std::uint64_t hash = 0;
};

namespace detail {

inline int checked_terms(const KeyValueConfig& c, const std::string& key, std::uint64_t fallback) {
  const std::uint64_t v = c.get_uint(key, fallback);
  if (v < 1 || v > 1000) throw ConfigError("'" + key + "' must lie in [1, 1000]");
  return static_cast<int>(v);
}

inline RandomFieldSpec field_from_config(const KeyValueConfig& c, const std::string& prefix, const Domain& domain,
                                         double& epsilon, bool epsilon_given) {
  const std::string kind = c.get_string(prefix + ".kind", "constant");
  auto key = [&](const char* k) { return prefix + "." + k; };
  if (kind == "constant") return constant_field(c.get_double(key("value"), prefix == "f" ? 1.0 : 0.0));
  if (kind == "scalar_uniform") {
    ScalarUniform s{c.get_double(key("lo"), 0.0), c.get_double(key("hi"), 1.0),
                    static_cast<std::uint32_t>(c.get_uint(key("stream"), 0))};
    if (!(s.lo < s.hi)) throw ConfigError(prefix + ": scalar_uniform needs lo < hi");
    return s;
  }
  if (kind == "trig_series") {
    if (dimension(domain) != 2) throw ConfigError(prefix + ": trig_series fields need mesh.dim = 2");
    const auto& r = std::get<Rect2D>(domain);
    if (prefix == "eta") {
      TrigSeriesEta2D s;
      s.terms_x = checked_terms(c, key("terms_x"), 10);
      s.terms_y = checked_terms(c, key("terms_y"), 10);
      s.decay = c.get_double(key("decay"), 0.2);
      s.base = c.get_double(key("base"), 0.5);
      s.amplitude = c.get_double(key("amplitude"), 0.5);
      s.lo = c.get_double(key("lo"), -1.0);
      s.hi = c.get_double(key("hi"), 1.0);
      s.center_x = 0.5 * (r.x_lo + r.x_hi);
      s.center_y = 0.5 * (r.y_lo + r.y_hi);
      s.stream = static_cast<std::uint32_t>(c.get_uint(key("stream"), 1));
      if (!(s.lo < s.hi)) throw ConfigError("eta: trig_series needs lo < hi");
      return s;
    }
    TrigSeriesF2D s;
    s.terms_x = checked_terms(c, key("terms_x"), 5);
    s.terms_y = checked_terms(c, key("terms_y"), 5);
    s.decay = c.get_double(key("decay"), 0.2);
    s.amplitude = c.get_double(key("amplitude"), 2.0);
    s.center_x = 0.5 * (r.x_lo + r.x_hi);
    s.center_y = 0.5 * (r.y_lo + r.y_hi);
    s.stream = static_cast<std::uint32_t>(c.get_uint(key("stream"), 2));
    return s;
  }
  if (kind == "kl" && prefix == "eta") {
    const std::string kernel = c.get_string("eta.kernel", "exp1");
    if (kernel != "exp1" && kernel != "exp2") throw ConfigError("eta.kernel must be exp1 or exp2");
    const double length = c.get_double("eta.length", 0.5);
    if (!(length > 0.0 && length < 1.0)) throw ConfigError("eta.length must lie in (0, 1)");
    const auto nodes = c.get_uint("eta.nodes", 200);
    const auto terms = c.get_uint("eta.terms", 10);
    if (terms < 1 || terms > nodes) throw ConfigError("eta.terms must lie in [1, eta.nodes]");
    const std::string nystrom = c.get_string("eta.nystrom", "plain");
    if (nystrom != "plain" && nystrom != "corrected") throw ConfigError("eta.nystrom must be plain or corrected");
    if (nystrom == "corrected" && dimension(domain) != 1) throw ConfigError("eta.nystrom = corrected needs mesh.dim = 1");
    const std::string noise = c.get_string("eta.noise", "normal");
    if (noise != "normal" && noise != "uniform") throw ConfigError("eta.noise must be normal or uniform");
    auto basis = std::make_shared<const KLBasis>(
        kl_decompose(ExpAbsKernel{kernel == "exp1" ? 1 : 2, length}, domain, nodes, terms,
                     nystrom == "plain" ? NystromRule::Plain : NystromRule::DiagonalCorrected));
    WeakForm w = kl_to_weak_form(0.0, basis, terms, noise == "normal" ? Noise::Normal : Noise::Uniform,
                                 static_cast<std::uint32_t>(c.get_uint("eta.stream", 3)));
    if (!epsilon_given) epsilon = w.epsilon;
    return w.eta;
  }
  throw ConfigError("unknown " + prefix + ".kind '" + kind + "'");
}

}  // namespace detail

inline ExperimentConfig experiment_from_config(const KeyValueConfig& c) {
  ExperimentConfig e;
  e.hash = c.hash();
  e.experiment = c.get_string("experiment", "run");
  e.output_dir = c.get_string("output.dir", ".");
  const auto dim = c.get_uint("mesh.dim", 1);
  if (dim == 1) {
    Interval1D d{c.get_double("mesh.x_lo", 0.0), c.get_double("mesh.x_hi", 1.0)};
    if (!(d.x_lo < d.x_hi)) throw ConfigError("mesh: x_lo must be < x_hi");
    e.domain = d;
  } else if (dim == 2) {
    Rect2D d{c.get_double("mesh.x_lo", 0.0), c.get_double("mesh.x_hi", 1.0), c.get_double("mesh.y_lo", 0.0),
             c.get_double("mesh.y_hi", 1.0)};
    if (!(d.x_lo < d.x_hi) || !(d.y_lo < d.y_hi)) throw ConfigError("mesh: lo must be < hi");
    e.domain = d;
  } else {
    throw ConfigError("mesh.dim must be 1 or 2");
  }
  e.cells = c.get_uint("mesh.cells", 100);
  if (e.cells < 2 || e.cells > 100000) throw ConfigError("mesh.cells must lie in [2, 100000]");

  e.a0 = c.get_double("a0.value", 1.0);
  if (!(e.a0 > 0.0)) throw ConfigError("a0.value must be positive");

  SolverConfig& s = e.solver;
  s.epsilon = c.get_double("solver.epsilon", 0.0);
  if (!(s.epsilon >= 0.0)) throw ConfigError("solver.epsilon must be >= 0");
  s.modes = c.get_uint("solver.modes", 1);
  if (s.modes < 1 || s.modes > 200) throw ConfigError("solver.modes must lie in [1, 200]");
  s.samples = c.get_uint("solver.samples", 1);
  if (s.samples < 1) throw ConfigError("solver.samples must be >= 1");
  s.seed = c.get_uint("solver.seed", 0);
  s.workers = c.get_uint("solver.workers", 1);
  if (s.workers < 1) throw ConfigError("solver.workers must be >= 1");
  const std::string variant = c.get_string("solver.variant", "multimodes");
  if (variant == "multimodes") s.variant = SolverVariant::MultiModes;
  else if (variant == "bruteforce") s.variant = SolverVariant::BruteForce;
  else throw ConfigError("solver.variant must be multimodes or bruteforce");

  e.eta = detail::field_from_config(c, "eta", e.domain, s.epsilon, c.has("solver.epsilon"));
  e.f = detail::field_from_config(c, "f", e.domain, s.epsilon, true);

  e.compare.epsilons = c.get_list("compare.epsilons", {s.epsilon});
  for (double eps : e.compare.epsilons) {
    if (!(eps >= 0.0)) throw ConfigError("compare.epsilons must be >= 0");
  }
  e.compare.max_modes = c.get_uint("compare.max_modes", 5);
  if (e.compare.max_modes < 2) throw ConfigError("compare.max_modes must be >= 2");
  e.compare.timing_modes = c.get_uint("compare.timing_modes", 3);
  if (e.compare.timing_modes < 1) throw ConfigError("compare.timing_modes must be >= 1");
  e.compare.samples = s.samples;
  e.compare.seed = s.seed;
  e.compare.workers = s.workers;
  return e;
}

inline Problem make_problem(const ExperimentConfig& e) {
  Problem p;
  p.mesh = build_mesh(e.domain, e.cells);
  p.a0 = constant_field(e.a0);
  p.eta = e.eta;
  p.f = e.f;
  return p;
}

}  // namespace mmmc

#endif  // MMMC_CONFIG_HPP
