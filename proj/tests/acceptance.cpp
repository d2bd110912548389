// Acceptance checks, one line per criterion: `acceptance [--only N]`.
// Exit status: 0 when every selected criterion passed, 1 when one failed, 77 when the only
// selected criterion was skipped.

#include <oneapi/tbb/global_control.h>

#include <CLI11.hpp>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "nvgd/config.hpp"
#include "nvgd/diagnostics.hpp"
#include "nvgd/experiment.hpp"
#include "nvgd/samplers.hpp"
#include "nvgd/witness.hpp"
#include "test_util.hpp"

using namespace nvgd;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kGradientRelTol = 1e-5;
constexpr double kGradientFdStep = 1e-5;
constexpr double kGradientRelFloor = 1e-8;  // denominators below this count as absolute error
constexpr std::size_t kHutchinsonDraws = 100000;
constexpr double kHutchinsonSigmas = 3.0;
constexpr int kHutchinsonMinPasses = 48;
constexpr double kOracleFraction = 0.8;
constexpr std::size_t kIdentitySamples = 100000;
constexpr double kAccuracySpread = 0.02;
constexpr double kBruteForceTol = 1e-12;

enum class Outcome { pass, fail, skip };

struct Verdict {
  Outcome outcome;
  std::string detail;
};

struct Paths {
  fs::path configs;
  fs::path data;
  fs::path scratch;
};

std::string sci(double v) {
  std::ostringstream s;
  s.precision(3);
  s << std::scientific << v;
  return s.str();
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << std::fixed << v;
  return s.str();
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// 1. Gradient of the R-hat-SD estimate against central differences.
Verdict gradient_correctness(const Paths&) {
  std::mt19937_64 pick(20240601);
  double worst = 0.0;
  std::size_t coords = 0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const std::size_t d = std::array<std::size_t, 3>{2, 3, 5}[pick() % 3];
    std::vector<std::size_t> dims{d};
    const std::size_t layers = 1 + pick() % 2;
    for (std::size_t l = 0; l < layers; ++l) dims.push_back(2 + pick() % 7);
    dims.push_back(d);
    const std::size_t n = 2 + pick() % 15;
    const Activation act = trial % 2 ? Activation::softplus : Activation::tanh;
    const DivergenceMode mode = trial % 4 < 2 ? DivergenceMode::exact : DivergenceMode::hutchinson;
    const WitnessParams p = testing::random_witness(dims, act, 100 + trial);
    const Matrix x = testing::random_matrix(n, d, 200 + trial);
    const Matrix s = testing::random_matrix(n, d, 300 + trial);
    Rng rng(400 + trial);
    std::vector<HutchinsonNoise> noise;
    for (std::size_t i = 0; i < n; ++i) noise.push_back(HutchinsonNoise::sample(rng, 1 + i % 3, d));

    const Vector analytic = rsd_gradient(p, x, s, noise, mode).flatten();
    const Vector theta = p.flatten();
    WitnessParams q = p;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      Vector t = theta;
      t[k] += kGradientFdStep;
      q.assign(t);
      const double up = rsd_estimate(q, x, s, noise, mode);
      t[k] = theta[k] - kGradientFdStep;
      q.assign(t);
      const double down = rsd_estimate(q, x, s, noise, mode);
      const double fd = (up - down) / (2 * kGradientFdStep);
      worst = std::max(worst, testing::relative_error(analytic[k], fd, kGradientRelFloor));
      ++coords;
    }
  }
  return {worst < kGradientRelTol ? Outcome::pass : Outcome::fail,
          "worst relative error " + sci(worst) + " over " + std::to_string(coords) +
              " coordinates in 20 configurations (limit " + sci(kGradientRelTol) + ")"};
}

// 2. Hutchinson estimate within a few standard errors of the exact divergence.
Verdict hutchinson_unbiasedness(const Paths&) {
  int passes = 0;
  double worst_z = 0.0;
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    const std::size_t d = 2 + trial % 4;
    const WitnessParams p = testing::random_witness({d, 8, 8, d}, trial % 2 ? Activation::softplus : Activation::tanh,
                                                    1000 + trial, 1.0);
    const Vector x = testing::random_vector(d, 2000 + trial);
    Rng rng(3000 + trial);
    const HutchinsonNoise z = HutchinsonNoise::sample(rng, kHutchinsonDraws, d);
    Vector draws(static_cast<Eigen::Index>(kHutchinsonDraws));
    for (Eigen::Index k = 0; k < draws.size(); ++k)
      draws[k] = hutchinson_divergence(p, x, HutchinsonNoise{z.draws.row(k)});
    const MonteCarloEstimate mc = monte_carlo(draws);
    const double zscore = std::abs(hutchinson_divergence(p, x, z) - exact_divergence(p, x)) / mc.std_error;
    worst_z = std::max(worst_z, zscore);
    passes += zscore < kHutchinsonSigmas ? 1 : 0;
  }
  return {passes >= kHutchinsonMinPasses ? Outcome::pass : Outcome::fail,
          std::to_string(passes) + "/50 within " + fixed(kHutchinsonSigmas, 0) + " standard errors (need " +
              std::to_string(kHutchinsonMinPasses) + "), largest deviation " + fixed(worst_z, 2) + " SE"};
}

// 3. Trained witness reaches most of the optimal regularized Stein discrepancy.
Verdict oracle_fraction(const Paths& paths) {
  const ExperimentConfig cfg = parse_config_file(paths.configs / "sanity_check.ini");
  const MetricTrace t = sanity_check(cfg, cfg.seeds.front());
  if (t.failed) return {Outcome::fail, "run failed: " + t.failure};
  const double trained = *t.last("rsd_heldout");
  const double oracle = *t.last("rsd_oracle");
  const double se = *t.last("rsd_oracle_se");
  const double closed = *t.last("rsd_oracle_closed_form");
  const double ratio = trained / oracle;
  return {ratio >= kOracleFraction ? Outcome::pass : Outcome::fail,
          "held-out R-hat-SD " + sci(trained) + " = " + fixed(100 * ratio, 1) + "% of the oracle " + sci(oracle) +
              " (MC, SE " + sci(se) + "; closed form " + sci(closed) + "), need " + fixed(100 * kOracleFraction, 0) +
              "%"};
}

std::vector<double> final_mmds(const ExperimentConfig& cfg) {
  std::vector<double> out;
  for (auto seed : cfg.seeds) {
    const MetricTrace t = funnel_run(cfg, cfg.target.dim, seed);
    out.push_back(t.failed ? std::numeric_limits<double>::infinity() : *t.last("mmd"));
  }
  return out;
}

// 4. Funnel: NVGD against parallel ULA at a shared step size, and thinned sequential ULA.
Verdict funnel_comparison(const Paths& paths) {
  const ExperimentConfig nvgd_cfg = parse_config_file(paths.configs / "funnel_nvgd.ini");
  const ExperimentConfig pula_cfg = parse_config_file(paths.configs / "funnel_pula.ini");
  const ExperimentConfig small_cfg = parse_config_file(paths.configs / "funnel_pula_small.ini");
  ExperimentConfig seq_cfg = parse_config_file(paths.configs / "funnel_seq_ula.ini");
  if (nvgd_cfg.run.nvgd.particle_step != pula_cfg.run.ula.step_size)
    throw std::runtime_error("funnel_nvgd.ini and funnel_pula.ini must share the step size");

  const double nvgd = mean(final_mmds(nvgd_cfg));
  const double pula = mean(final_mmds(pula_cfg));
  const double small = mean(final_mmds(small_cfg));
  // The sequential chain uses the step size of whichever parallel run ended lower.
  seq_cfg.run.ula.step_size = small < pula ? small_cfg.run.ula.step_size : pula_cfg.run.ula.step_size;
  const double seq = mean(final_mmds(seq_cfg));

  const bool nvgd_ok = nvgd <= pula;
  const bool seq_ok = seq > pula;
  std::string detail = "mean final MMD over " + std::to_string(nvgd_cfg.seeds.size()) + " seeds: NVGD " +
                       sci(nvgd) + (nvgd_ok ? " <= " : " > ") + "pULA " + sci(pula) + " at step " +
                       sci(pula_cfg.run.ula.step_size) + "; sequential ULA (step " + sci(seq_cfg.run.ula.step_size) +
                       ", thinning " + std::to_string(seq_cfg.run.ula.thinning) + ") " + sci(seq) +
                       (seq_ok ? " > " : " <= ") + "pULA; pULA at step " + sci(small_cfg.run.ula.step_size) + " " +
                       sci(small);
  return {nvgd_ok && seq_ok ? Outcome::pass : Outcome::fail, detail};
}

// 5. Integration-by-parts identity for random witnesses.
Verdict identity_check(const Paths&) {
  int passes = 0;
  double worst = 0.0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const std::size_t d = 2 + trial % 4;
    const WitnessParams f = testing::random_witness({d, 16, 16, d}, trial % 2 ? Activation::softplus : Activation::tanh,
                                                    5000 + trial, 1.0);
    const DiagonalGaussian q(testing::random_vector(d, 6000 + trial), DiagonalGaussian::logspaced(d, 0.1, 3.0).variances);
    const IdentityCheck c = ibp_identity_check(f, q, kIdentitySamples, 7000 + trial);
    passes += c.pass ? 1 : 0;
    worst = std::max(worst, std::abs(c.lhs - c.rhs) / c.std_error);
  }
  return {passes == 20 ? Outcome::pass : Outcome::fail,
          std::to_string(passes) + "/20 witnesses within " + fixed(kIdentityCheckSigmas, 0) +
              " standard errors, largest deviation " + fixed(worst, 2) + " SE"};
}

// 6. Covertype: NVGD, SVGD and SGLD reach similar test accuracy.
Verdict covertype_agreement(const Paths& paths) {
  if (!fs::exists(paths.data))
    return {Outcome::skip, "dataset not found at " + paths.data.string() + "; run tools/fetch_covertype.sh"};
  std::map<std::string, double> accuracy;
  std::optional<CovertypeData> data;
  for (const std::string name : {"nvgd", "svgd", "sgld"}) {
    ExperimentConfig cfg = parse_config_file(paths.configs / ("covertype_" + name + ".ini"));
    cfg.target.data_path = paths.data;
    if (!data) data = load_covertype(cfg.target);
    if (!cfg.tuning.step_sizes.empty())
      cfg.run = with_step_size(cfg.run, tune_step_size(cfg, data->train, cfg.seeds.front()).selected);
    std::vector<double> finals;
    for (auto seed : cfg.seeds) {
      const MetricTrace t = covertype_run(cfg, *data, seed);
      finals.push_back(t.failed ? 0.0 : *t.last("accuracy"));
    }
    accuracy[name] = mean(finals);
  }
  double lo = 1.0, hi = 0.0;
  std::string detail = "mean final test accuracy:";
  for (const auto& [name, acc] : accuracy) {
    lo = std::min(lo, acc);
    hi = std::max(hi, acc);
    detail += " " + name + " " + fixed(acc);
  }
  detail += "; spread " + fixed(hi - lo) + " (limit " + fixed(kAccuracySpread, 2) + ")";
  return {hi - lo <= kAccuracySpread ? Outcome::pass : Outcome::fail, detail};
}

std::map<std::string, std::string> read_csvs(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.path().extension() != ".csv") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out[fs::relative(entry.path(), dir).generic_string()] = ss.str();
  }
  return out;
}

// Small versions of every experiment kind and method.
std::vector<std::pair<std::string, ExperimentConfig>> determinism_configs(const fs::path& libsvm) {
  std::vector<std::pair<std::string, ExperimentConfig>> out;
  ExperimentConfig funnel;
  funnel.experiment = ExperimentKind::funnel;
  funnel.seeds = {0, 1};
  funnel.run.particles = 40;
  funnel.run.outer_steps = 30;
  funnel.run.metric_every = 10;
  funnel.run.nvgd.particle_step = 0.05;
  funnel.run.nvgd.optimizer = OptimizerKind::adam;
  funnel.run.nvgd.learning_rate = 1e-3;
  funnel.run.ula.step_size = 0.05;
  funnel.run.ula.thinning = 10;
  funnel.diagnostics.reference_samples = 300;
  for (Method m : {Method::nvgd, Method::svgd, Method::ula_parallel, Method::ula_sequential}) {
    ExperimentConfig c = funnel;
    c.run.method = m;
    out.emplace_back("funnel " + std::string(to_string(m)), c);
  }
  ExperimentConfig sweep = funnel;
  sweep.experiment = ExperimentKind::funnel_sweep;
  sweep.target.dims = {3, 6};
  out.emplace_back("funnel-sweep nvgd", sweep);

  ExperimentConfig sanity;
  sanity.experiment = ExperimentKind::sanity_check;
  sanity.target.dim = 10;
  sanity.run.particles = 100;
  sanity.run.outer_steps = 20;
  sanity.run.nvgd.divergence = DivergenceMode::hutchinson;
  sanity.diagnostics.oracle_samples = 5000;
  sanity.diagnostics.heldout_samples = 100;
  out.emplace_back("sanity-check nvgd", sanity);

  for (Method m : {Method::nvgd, Method::svgd, Method::ula_parallel}) {
    ExperimentConfig c;
    c.experiment = ExperimentKind::covertype;
    c.run.method = m;
    c.run.particles = 30;
    c.run.outer_steps = 20;
    c.run.metric_every = 5;
    c.target.data_path = libsvm;
    c.target.batch_size = 32;
    c.tuning.step_sizes = {1e-4, 1e-3};
    out.emplace_back("logistic " + std::string(to_string(m)), c);
  }
  return out;
}

void write_synthetic_libsvm(const fs::path& p) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  std::ofstream out(p);
  for (int i = 0; i < 400; ++i) {
    const double a = normal(rng), b = normal(rng), c = normal(rng);
    out << (a - 0.5 * b + 0.3 * normal(rng) > 0 ? 1 : 2) << " 1:" << a << " 2:" << b << " 3:" << c << '\n';
  }
}

// 7. Reruns, including with four worker threads, give byte-identical CSVs.
Verdict determinism(const Paths& paths) {
  const fs::path root = paths.scratch / "determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  write_synthetic_libsvm(root / "toy.libsvm");
  std::vector<std::string> mismatches;
  std::size_t files = 0;
  for (auto [name, cfg] : determinism_configs(root / "toy.libsvm")) {
    std::vector<std::map<std::string, std::string>> outputs;
    for (int threads : {1, 1, 4}) {
      tbb::global_control limit(tbb::global_control::max_allowed_parallelism, threads);
      cfg.output_dir = root / "run";
      fs::remove_all(cfg.output_dir);
      run_experiment(cfg, {});
      outputs.push_back(read_csvs(cfg.output_dir));
    }
    files += outputs[0].size();
    if (outputs[0].empty() || outputs[0] != outputs[1] || outputs[0] != outputs[2]) mismatches.push_back(name);
  }
  fs::remove_all(root);
  std::string detail = std::to_string(files) + " CSV files compared across threads 1, 1 and 4";
  for (const auto& m : mismatches) detail += "; differs: " + m;
  return {mismatches.empty() ? Outcome::pass : Outcome::fail, detail};
}

Matrix fixture(std::uint64_t seed) { return testing::random_matrix(5, 2, seed); }

// 8. SVGD step and MMD against plain loops.
Verdict brute_force_equivalence(const Paths&) {
  double svgd_err = 0.0, mmd_err = 0.0;
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    const Matrix x = fixture(10 + trial), s = fixture(20 + trial), y = fixture(30 + trial);
    SvgdConfig cfg;
    cfg.step_size = 0.25;
    const double h = svgd_bandwidth(x, cfg);
    Matrix expected = x;
    for (Eigen::Index i = 0; i < 5; ++i)
      for (Eigen::Index j = 0; j < 5; ++j) {
        double sq = 0.0;
        for (Eigen::Index c = 0; c < 2; ++c) sq += (x(j, c) - x(i, c)) * (x(j, c) - x(i, c));
        const double k = std::exp(-sq / (2 * h * h));
        for (Eigen::Index c = 0; c < 2; ++c)
          expected(i, c) += cfg.step_size * (k * s(j, c) - k * (x(j, c) - x(i, c)) / (h * h)) / 5.0;
      }
    svgd_err = std::max(svgd_err, (svgd_step(ParticleEnsemble(x), s, cfg).positions - expected).cwiseAbs().maxCoeff());

    const double bw = 0.5 + 0.1 * static_cast<double>(trial);
    auto k = [bw](const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
      double sq = 0.0;
      for (Eigen::Index c = 0; c < a.cols(); ++c) sq += (a(i, c) - b(j, c)) * (a(i, c) - b(j, c));
      return std::exp(-sq / (2 * bw * bw));
    };
    double xx = 0.0, yy = 0.0, xy = 0.0;
    for (Eigen::Index i = 0; i < 5; ++i)
      for (Eigen::Index j = 0; j < 5; ++j) {
        xx += k(x, i, x, j);
        yy += k(y, i, y, j);
        xy += k(x, i, y, j);
      }
    const double brute = (xx + yy - 2 * xy) / 25.0;
    mmd_err = std::max(mmd_err, std::abs(mmd_squared(x, y, KernelSpec(bw)) - brute));
  }
  const bool ok = svgd_err <= kBruteForceTol && mmd_err <= kBruteForceTol;
  return {ok ? Outcome::pass : Outcome::fail, "max abs difference over 10 five-point fixtures: svgd_step " +
                                                  sci(svgd_err) + ", mmd_squared " + sci(mmd_err) + " (limit " +
                                                  sci(kBruteForceTol) + ")"};
}

struct Criterion {
  int id;
  std::string name;
  std::function<Verdict(const Paths&)> check;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  Paths paths{NVGD_SOURCE_DIR "/configs", NVGD_SOURCE_DIR "/data/covtype.libsvm.binary.scale",
              fs::temp_directory_path() / "nvgd_acceptance"};
  app.add_option("--only", only, "Run a single criterion")->check(CLI::Range(1, 8));
  app.add_option("--configs", paths.configs, "Directory with the experiment configs")->capture_default_str();
  app.add_option("--data", paths.data, "Covertype LIBSVM file")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  paths.scratch /= std::to_string(only);

  const std::vector<Criterion> criteria{
      {1, "gradient correctness", gradient_correctness},
      {2, "Hutchinson unbiasedness", hutchinson_unbiasedness},
      {3, "witness reaches the optimal discrepancy", oracle_fraction},
      {4, "funnel: NVGD vs parallel and sequential ULA", funnel_comparison},
      {5, "integration-by-parts identity", identity_check},
      {6, "Covertype accuracy agreement", covertype_agreement},
      {7, "determinism", determinism},
      {8, "brute-force equivalence", brute_force_equivalence},
  };

  int failed = 0, skipped = 0, ran = 0;
  for (const auto& c : criteria) {
    if (only && c.id != only) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check(paths);
    } catch (const std::exception& e) {
      v = {Outcome::fail, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* tag = v.outcome == Outcome::pass ? "PASS" : v.outcome == Outcome::fail ? "FAIL" : "SKIP";
    std::cout << "criterion " << c.id << " " << tag << " " << c.name << ": " << v.detail << " [" << fixed(secs, 1)
              << " s]" << std::endl;
    failed += v.outcome == Outcome::fail ? 1 : 0;
    skipped += v.outcome == Outcome::skip ? 1 : 0;
  }
  if (failed) return 1;
  if (ran == 1 && skipped == 1) return 77;
  return 0;
}
