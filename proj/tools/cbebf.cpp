// Command line front end: run experiments, evaluate the projection bound,
// query the finite-MDP oracle.

#include "cbebf/config.hpp"
#include "cbebf/experiment.hpp"
#include "cbebf/finite_mdp.hpp"
#include "cbebf/projection.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

namespace {

void print_vector(const char* label, const cbebf::Vector& v) {
  std::cout << label << ':';
  for (Eigen::Index i = 0; i < v.size(); ++i) std::cout << ' ' << cbebf::detail::format_double(v[i]);
  std::cout << '\n';
}

int run_command(const std::string& config_path, const std::string& out_dir, std::optional<std::uint64_t> seed,
                std::optional<std::size_t> trials, std::optional<std::size_t> threads, bool timing) {
  auto cfg = cbebf::load_config(config_path);
  if (seed) cfg.master_seed = *seed;
  if (trials) cfg.trials = *trials;
  if (threads) cfg.threads = *threads;
  if (timing) cfg.record_timing = true;
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (cfg.output_dir.empty()) throw std::invalid_argument("no output directory: pass --out or set output_dir");
  cfg.validate();

  const auto result = cbebf::run_experiment(cfg);
  cbebf::write_outputs(cfg.output_dir, result);
  std::cout << "wrote " << result.rows.size() << " rows to " << cfg.output_dir << '\n';
  if (!result.failures.empty()) {
    std::cerr << "error: " << result.failures.size() << " fit(s) failed, see failures.csv; first: "
              << result.failures.front().message << '\n';
    return 2;
  }
  return 0;
}

int bounds_command(std::size_t k, std::size_t big_dim, std::size_t small_dim, double xi) {
  std::cout << cbebf::detail::format_double(cbebf::eps_prj(k, big_dim, small_dim, xi).eps_prj) << '\n';
  return 0;
}

int oracle_command(const std::string& path, std::size_t n) {
  const auto mdp = cbebf::load_finite_mdp(path);
  print_vector("value", cbebf::exact_value(mdp));
  print_vector("stationary", cbebf::stationary_distribution(mdp));
  std::cout << "mixing_norm[n=" << n << "]: "
            << cbebf::detail::format_double(cbebf::operator_norm(cbebf::mixing_matrix(mdp, n))) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compressed Bellman-error basis functions for policy evaluation"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials, threads;
  bool timing = false;
  auto* run = app.add_subcommand("run", "Run an experiment sweep and write CSV results");
  run->add_option("--config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (overrides output_dir)");
  run->add_option("--seed", seed, "Master seed (overrides seed)");
  run->add_option("--trials", trials, "Number of trials (overrides trials)");
  run->add_option("--threads", threads, "Worker threads for trials (overrides threads)");
  run->add_flag("--record-timing", timing, "Write measured wall times instead of 0");

  std::size_t k = 0, big_dim = 0, small_dim = 0;
  double xi = 0.05;
  auto* bounds = app.add_subcommand("bounds", "Print the inner-product distortion bound eps_prj");
  bounds->add_option("--k", k, "Sparsity")->required();
  bounds->add_option("--D", big_dim, "Feature dimension")->required();
  bounds->add_option("--d", small_dim, "Projection dimension")->required();
  bounds->add_option("--xi", xi, "Failure probability")->required();

  std::string mdp_path;
  std::size_t horizon = 10;
  auto* oracle = app.add_subcommand("oracle", "Exact value, stationary distribution and mixing norm of a finite chain");
  oracle->add_option("--mdp", mdp_path, "Finite MDP text file")->required()->check(CLI::ExistingFile);
  oracle->add_option("--n", horizon, "Size of the mixing matrix")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) return run_command(config_path, out_dir, seed, trials, threads, timing);
    if (*bounds) return bounds_command(k, big_dim, small_dim, xi);
    if (*oracle) return oracle_command(mdp_path, horizon);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
