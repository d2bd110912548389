#include <oneapi/tbb/global_control.h>

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>

#include "nvgd/config.hpp"
#include "nvgd/diagnostics.hpp"
#include "nvgd/experiment.hpp"
#include "nvgd/libsvm.hpp"
#include "nvgd/targets.hpp"

namespace {

int cmd_run(const std::string& path, std::uint64_t seed_offset, bool overwrite, std::size_t threads) {
  std::unique_ptr<tbb::global_control> limit;
  if (threads > 0)
    limit = std::make_unique<tbb::global_control>(tbb::global_control::max_allowed_parallelism, threads);
  const nvgd::ExperimentConfig cfg = nvgd::parse_config_file(path);
  nvgd::RunOptions opts;
  opts.seed_offset = seed_offset;
  opts.overwrite = overwrite;
  opts.log = &std::cout;
  const nvgd::ExperimentResult result = nvgd::run_experiment(cfg, opts);
  std::cout << "wrote " << result.manifest.string() << '\n';
  std::size_t failed = 0;
  for (const auto& r : result.runs) failed += r.failed ? 1 : 0;
  if (failed) {
    std::cerr << "error: " << failed << " of " << result.runs.size()
              << " runs hit a numerical failure (see the 'failed' rows in their traces)\n";
    return 2;
  }
  return 0;
}

int cmd_validate(const std::string& path) {
  nvgd::write_resolved_config(std::cout, nvgd::parse_config_file(path));
  return 0;
}

struct OracleArgs {
  std::size_t dim = 0;
  double q_lo = 1.0, q_hi = 1.0;
  double p_lo = 1e-4, p_hi = 1.0;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
};

int cmd_oracle(const OracleArgs& a) {
  const auto q = nvgd::DiagonalGaussian::logspaced(a.dim, a.q_lo, a.q_hi);
  const auto p = nvgd::DiagonalGaussian::logspaced(a.dim, a.p_lo, a.p_hi);
  const auto mc = nvgd::optimal_rsd_oracle(q, p, a.samples, a.seed);
  std::cout << "oracle = " << nvgd::format_double(mc.mean) << '\n'
            << "std_error = " << nvgd::format_double(mc.std_error) << '\n'
            << "closed_form = " << nvgd::format_double(nvgd::optimal_rsd_closed_form(q, p)) << '\n';
  return 0;
}

int cmd_parse_check(const std::string& path, std::optional<std::size_t> num_features) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  const nvgd::SparseDataset d = nvgd::parse_libsvm(in, num_features);
  std::map<int, std::size_t> labels;
  std::size_t nonzeros = 0;
  for (const auto& r : d.rows) {
    ++labels[r.label];
    nonzeros += r.entries.size();
  }
  std::cout << "rows = " << d.rows.size() << '\n'
            << "num_features = " << d.num_features << '\n'
            << "nonzeros = " << nonzeros << '\n';
  for (const auto& [label, count] : labels) std::cout << "label_" << label << " = " << count << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle inference with neural variational gradient descent, SVGD and Langevin baselines"};
  app.set_version_flag("--version", std::string(NVGD_VERSION));
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed_offset = 0;
  bool overwrite = false;
  std::size_t threads = 0;
  auto* run = app.add_subcommand("run", "Run every seed of an experiment config");
  run->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed-offset", seed_offset, "Added to every configured seed");
  run->add_flag("--overwrite", overwrite, "Replace results already in the output directory");
  run->add_option("--threads", threads, "Worker threads (0 = all cores)");

  auto* validate = app.add_subcommand("validate", "Parse a config and print it with defaults filled in");
  validate->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);

  OracleArgs oracle_args;
  auto* oracle = app.add_subcommand("oracle", "Optimal regularized Stein discrepancy between two Gaussians");
  oracle->require_subcommand(1);
  auto* gaussian = oracle->add_subcommand(
      "gaussian", "q and p are zero-mean with variances log-spaced over [lo, hi]");
  gaussian->add_option("--dim", oracle_args.dim, "Dimension")->required()->check(CLI::PositiveNumber);
  gaussian->add_option("--q-lo", oracle_args.q_lo, "Smallest variance of q")->capture_default_str();
  gaussian->add_option("--q-hi", oracle_args.q_hi, "Largest variance of q")->capture_default_str();
  gaussian->add_option("--p-lo", oracle_args.p_lo, "Smallest variance of p")->capture_default_str();
  gaussian->add_option("--p-hi", oracle_args.p_hi, "Largest variance of p")->capture_default_str();
  gaussian->add_option("--samples", oracle_args.samples, "Monte Carlo samples")->capture_default_str();
  gaussian->add_option("--seed", oracle_args.seed, "Sampling seed")->capture_default_str();

  std::string libsvm_path;
  std::optional<std::size_t> num_features;
  auto* parse_check = app.add_subcommand("parse-check", "Parse a LIBSVM file and summarize it");
  parse_check->add_option("file", libsvm_path, "LIBSVM file")->required()->check(CLI::ExistingFile);
  parse_check->add_option("--num-features", num_features, "Expected feature count");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, seed_offset, overwrite, threads);
    if (*validate) return cmd_validate(config_path);
    if (*gaussian) return cmd_oracle(oracle_args);
    if (*parse_check) return cmd_parse_check(libsvm_path, num_features);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
