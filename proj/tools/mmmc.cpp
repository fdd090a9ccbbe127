#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmmc/cli.hpp"

int main(int argc, char** argv) {
  using namespace mmmc::cli;

  CLI::App app{"Multi-modes Monte Carlo finite element solver"};
  app.require_subcommand(1);
  // -h is left free for the mesh spacing flag
  app.set_help_flag("--help", "Print this help message and exit");
  app.set_version_flag("--version", mmmc::version_string);

  GlobalOptions g;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string out;
  auto* seed_opt = app.add_option("--seed", seed, "Master seed");
  auto* workers_opt = app.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  auto* out_opt = app.add_option("--out", out, "Output directory");

  std::string config_path;
  auto* run = app.add_subcommand("run", "Solve the problem described by a config file")->fallthrough();
  run->add_option("config", config_path, "Config file")->required();

  Table1Options t1;
  auto* table1 = app.add_subcommand("table1", "Relative L2 error grid for the 1D uniform problem")->fallthrough();
  table1->add_option("--samples", t1.samples, "Monte Carlo samples M");
  table1->add_option("--h", t1.h, "Mesh spacing");

  ConvergeOptions cv;
  auto* converge = app.add_subcommand("converge", "Mesh refinement study against the exact 1D mean")->fallthrough();
  converge->add_option("--dim", cv.dim, "Spatial dimension");
  converge->add_option("--h", cv.h, "Mesh spacings, strictly decreasing")->delimiter(',');
  converge->add_option("--modes", cv.modes, "Number of modes N");
  converge->add_option("--mode", cv.mode, "Expectation: quadrature or mc");
  converge->add_option("--epsilon", cv.epsilon, "Perturbation magnitude");
  converge->add_option("--samples", cv.samples, "Samples for --mode mc");

  std::string compare_config;
  auto* compare = app.add_subcommand("compare", "Multi-modes vs brute-force Monte Carlo on shared samples")->fallthrough();
  compare->add_option("config", compare_config, "2D config file")->required();

  KLOptions kl;
  auto* klcmd = app.add_subcommand("kl", "Karhunen-Loeve spectrum and weak-form summary")->fallthrough();
  klcmd->add_option("--dim", kl.dim, "Domain (0,1)^dim");
  klcmd->add_option("--exponent", kl.exponent, "Kernel exponent m in exp(-|x-y|^m / l)");
  klcmd->add_option("--length", kl.length, "Correlation length l");
  klcmd->add_option("--nodes", kl.nodes, "Quadrature nodes");
  klcmd->add_option("--terms", kl.terms, "Retained terms k_max");
  klcmd->add_option("--mean", kl.mean, "Constant mean of the field");
  klcmd->add_option("--noise", kl.noise, "normal or uniform");
  klcmd->add_option("--nystrom", kl.nystrom, "Diagonal treatment: plain or corrected (1D)");
  klcmd->add_option("--solve-samples", kl.solve_samples, "Run the solver on the weak form with this many samples");
  klcmd->add_option("--modes", kl.solve_modes, "Modes for the optional solve");
  klcmd->add_option("--cells", kl.cells, "Cells per direction for the optional solve");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return ConfigFailure;
  }

  if (*seed_opt) g.seed = seed;
  if (*workers_opt) g.workers = workers;
  if (*out_opt) g.out = out;
  Streams s{std::cout, std::cerr};

  if (*run) return cmd_run(config_path, g, s);
  if (*table1) return cmd_table1(t1, g, s);
  if (*converge) return cmd_converge(cv, g, s);
  if (*compare) return cmd_compare(compare_config, g, s);
  return cmd_kl(kl, g, s);
}
