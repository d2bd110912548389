#include "nvgd/experiment.hpp"

#include <oneapi/tbb/task_arena.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "nvgd/diagnostics.hpp"
#include "nvgd/logistic.hpp"
#include "nvgd/samplers.hpp"
#include "nvgd/targets.hpp"

namespace nvgd {

std::string trace_file_name(Method m, std::uint64_t seed) {
  return "trace_" + std::string(to_string(m)) + "_" + std::to_string(seed) + ".csv";
}

MetricTrace sanity_check(const ExperimentConfig& cfg, std::uint64_t seed) {
  const std::size_t d = cfg.target.dim;
  const std::size_t n = cfg.run.particles;
  const NvgdConfig& nv = cfg.run.nvgd;
  const DiagonalGaussian q = DiagonalGaussian::standard(d);
  const DiagonalGaussian p = DiagonalGaussian::logspaced(d, cfg.target.variance_lo, cfg.target.variance_hi);

  auto scores_of = [&](const Matrix& x) {
    Matrix s(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) s.row(i) = gaussian_score(p, x.row(i).transpose()).transpose();
    return s;
  };
  Rng init = make_rng(seed, Stream::ensemble_init);
  const Matrix x = standard_normal(init, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const Matrix s = scores_of(x);
  Rng reference = make_rng(seed, Stream::reference);
  const Matrix x_held = standard_normal(reference, static_cast<Eigen::Index>(cfg.diagnostics.heldout_samples),
                                        static_cast<Eigen::Index>(d));
  const Matrix s_held = scores_of(x_held);

  MetricTrace trace;
  auto add = [&](std::uint64_t step, std::string metric, double value) {
    trace.rows.push_back({"nvgd", "gaussian", seed, step, n, std::move(metric), value});
  };

  const MonteCarloEstimate oracle =
      optimal_rsd_oracle(q, p, cfg.diagnostics.oracle_samples, derive_seed(seed, Stream::reference, 1));
  const double closed = optimal_rsd_closed_form(q, p);
  add(0, "rsd_oracle", oracle.mean);
  add(0, "rsd_oracle_se", oracle.std_error);
  add(0, "rsd_oracle_closed_form", closed);

  // SVGD direction on the same particles, rescaled to the L2(q) norm of the optimal field.
  const double h = median_heuristic(x);
  const double sd_phi = stein_discrepancy_of_field(svgd_field(x, s, h), x, s).mean;
  const double phi_sq = svgd_direction(x, s, h).rowwise().squaredNorm().mean();
  const double c = std::sqrt(2.0 * closed / phi_sq);
  add(0, "svgd_rescaled_rsd", c * sd_phi - 0.5 * c * c * phi_sq);

  WitnessParams w = init_params(nv.layer_dims(d), nv.activation, seed);
  OptState opt = OptState::make(nv.optimizer, nv.learning_rate, w.parameter_count());
  Rng noise = make_rng(seed, Stream::hutchinson);
  const DivergenceMode mode = nv.divergence_mode(d);
  auto heldout = [&] { return rsd_estimate(w, x_held, s_held, {}, DivergenceMode::exact); };

  add(0, "rsd_heldout", heldout());
  const std::size_t steps = cfg.run.outer_steps;
  for (std::size_t k = 1; k <= steps; ++k) {
    const auto value = witness_training_curve(w, opt, x, s, 1, mode, nv.hutchinson_draws, noise);
    add(k - 1, "rsd_train", value.front());
    if (k % cfg.run.metric_every == 0 || k == steps) add(k, "rsd_heldout", heldout());
  }
  trace.score_evals = n;
  trace.final_ensemble = ParticleEnsemble(x);
  return trace;
}

Evaluation funnel_evaluation(const ExperimentConfig& cfg, std::size_t dim) {
  Evaluation eval;
  eval.reference = funnel_exact_sample(Funnel{dim, cfg.target.scale_var}, cfg.diagnostics.reference_samples,
                                       cfg.diagnostics.reference_seed)
                       .positions;
  eval.mmd_kernel = KernelSpec(cfg.diagnostics.mmd_bandwidth);
  return eval;
}

namespace {

void append_positions(MetricTrace& trace, const Matrix& positions, const TraceRow& stamp) {
  for (Eigen::Index i = 0; i < positions.rows(); ++i)
    for (Eigen::Index j = 0; j < positions.cols(); ++j) {
      TraceRow row = stamp;
      row.metric = "position_" + std::to_string(j + 1);
      row.value = positions(i, j);
      trace.rows.push_back(std::move(row));
    }
}

}  // namespace

MetricTrace funnel_run(const ExperimentConfig& cfg, std::size_t dim, std::uint64_t seed) {
  const FunnelTarget target(Funnel{dim, cfg.target.scale_var});
  RunConfig rc = cfg.run;
  rc.seed = seed;
  MetricTrace trace = run(target, rc, funnel_evaluation(cfg, dim));
  if (!trace.failed && !trace.rows.empty()) {
    TraceRow stamp = trace.rows.back();
    stamp.outer_step = rc.outer_steps;
    stamp.score_evals = trace.score_evals;
    append_positions(trace, trace.final_ensemble.positions, stamp);
  }
  return trace;
}

MetricTrace funnel_reference_trace(const ExperimentConfig& cfg, std::size_t dim) {
  MetricTrace trace;
  TraceRow stamp;
  stamp.method = "exact";
  stamp.target = "funnel";
  stamp.seed = cfg.diagnostics.reference_seed;
  append_positions(trace, *funnel_evaluation(cfg, dim).reference, stamp);
  return trace;
}

CovertypeData prepare_covertype(const SparseDataset& data, const TargetSettings& target) {
  if (data.rows.empty()) throw std::invalid_argument("the dataset has no rows");
  const DenseDataset all = to_dense(data);
  const SplitIndices split = split_indices(data.rows.size(), target.test_fraction, target.split_seed);
  std::vector<std::size_t> train_rows = split.train;
  if (target.train_rows > 0 && target.train_rows < train_rows.size()) train_rows.resize(target.train_rows);
  CovertypeData out;
  out.train = select_rows(all, train_rows);
  out.test = select_rows(all, split.test);
  out.num_features = data.num_features;
  standardize_and_add_bias(out.train, out.test);
  return out;
}

CovertypeData load_covertype(const TargetSettings& target) {
  const auto& path = target.data_path;
  if (!std::filesystem::exists(path))
    throw DatasetMissing("Covertype data not found at '" + path.string() +
                         "'. Download it with tools/fetch_covertype.sh (it fetches "
                         "covtype.libsvm.binary.scale.bz2 from the LIBSVM binary datasets page and "
                         "decompresses it), or point [target] data_path at an existing copy.");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return prepare_covertype(parse_libsvm(in), target);
}

RunConfig with_step_size(const RunConfig& run, double step) {
  RunConfig out = run;
  switch (run.method) {
    case Method::nvgd: out.nvgd.particle_step = step; break;
    case Method::svgd: out.svgd.step_size = step; break;
    case Method::ula_parallel:
    case Method::ula_sequential: out.ula.step_size = step; break;
  }
  return out;
}

namespace {

LogisticTarget logistic_target(const ExperimentConfig& cfg, const DenseDataset& train) {
  const std::size_t batch = std::min<std::size_t>(cfg.target.batch_size, static_cast<std::size_t>(train.labels.size()));
  return LogisticTarget(LogisticRegressionPosterior(train.features, train.labels, cfg.target.a0, cfg.target.b0, batch));
}

MetricTrace logistic_run(const ExperimentConfig& cfg, const RunConfig& rc, const DenseDataset& train,
                         const DenseDataset& test) {
  const LogisticTarget target = logistic_target(cfg, train);
  Evaluation eval;
  eval.test_X = test.features;
  eval.test_y = test.labels;
  return run(target, rc, eval);
}

}  // namespace

TuningResult tune_step_size(const ExperimentConfig& cfg, const DenseDataset& train, std::uint64_t seed) {
  TuningResult result;
  result.step_sizes = cfg.tuning.step_sizes;
  std::sort(result.step_sizes.begin(), result.step_sizes.end());
  if (result.step_sizes.empty()) throw std::invalid_argument("no step sizes to tune over");
  const SplitIndices split = split_indices(static_cast<std::size_t>(train.labels.size()),
                                           cfg.tuning.validation_fraction,
                                           derive_seed(cfg.target.split_seed, Stream::split, 1));
  const DenseDataset fit = select_rows(train, split.train);
  const DenseDataset val = select_rows(train, split.test);
  double best = -std::numeric_limits<double>::infinity();
  for (double step : result.step_sizes) {
    RunConfig rc = with_step_size(cfg.run, step);
    rc.seed = seed;
    const MetricTrace t = logistic_run(cfg, rc, fit, val);
    const double acc = t.failed ? std::numeric_limits<double>::quiet_NaN() : t.last("accuracy").value_or(NAN);
    result.validation_accuracy.push_back(acc);
    if (acc > best) {
      best = acc;
      result.selected = step;
    }
  }
  if (!(best > -std::numeric_limits<double>::infinity()))
    throw NumericalError("every candidate step size diverged during tuning");
  return result;
}

MetricTrace covertype_run(const ExperimentConfig& cfg, const CovertypeData& data, std::uint64_t seed) {
  RunConfig rc = cfg.run;
  rc.seed = seed;
  return logistic_run(cfg, rc, data.train, data.test);
}

namespace {

namespace fs = std::filesystem;

bool holds_results(const fs::path& dir) {
  if (!fs::exists(dir)) return false;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name == "manifest.json" || name == "resolved_config.ini" || name == "reference.csv" ||
        (name.starts_with("trace_") && name.ends_with(".csv")))
      return true;
  }
  return false;
}

void remove_results(const fs::path& dir) {
  std::vector<fs::path> stale;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name == "reference.csv" || (name.starts_with("trace_") && name.ends_with(".csv")))
      stale.push_back(entry.path());
  }
  for (const auto& p : stale) fs::remove(p);
}

void write_trace(const fs::path& file, const MetricTrace& trace) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  trace.write_csv(out);
  if (!out) throw std::runtime_error("failed while writing " + file.string());
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  using clock = std::chrono::steady_clock;
  const auto started = clock::now();

  // Everything that can fail cheaply happens before any file is written.
  std::optional<CovertypeData> data;
  if (cfg.experiment == ExperimentKind::covertype) data = load_covertype(cfg.target);
  if (holds_results(cfg.output_dir) && !opts.overwrite)
    throw std::runtime_error("output directory '" + cfg.output_dir.string() +
                             "' already holds results; pass --overwrite to replace them");
  fs::create_directories(cfg.output_dir);
  if (opts.overwrite) remove_results(cfg.output_dir);

  ExperimentConfig effective = cfg;
  for (auto& s : effective.seeds) s += opts.seed_offset;

  ExperimentResult result;
  if (data && !cfg.tuning.step_sizes.empty()) {
    if (opts.log) *opts.log << "tuning step size over " << cfg.tuning.step_sizes.size() << " candidates" << std::endl;
    result.tuning = tune_step_size(effective, data->train, effective.seeds.front());
    effective.run = with_step_size(effective.run, result.tuning->selected);
    effective.tuning.step_sizes.clear();
  }
  {
    std::ofstream out(cfg.output_dir / "resolved_config.ini", std::ios::binary);
    write_resolved_config(out, effective);
  }

  auto execute = [&](const fs::path& dir, std::optional<std::size_t> dim, std::uint64_t seed) {
    const auto t0 = clock::now();
    MetricTrace trace;
    switch (cfg.experiment) {
      case ExperimentKind::sanity_check: trace = sanity_check(effective, seed); break;
      case ExperimentKind::funnel: trace = funnel_run(effective, effective.target.dim, seed); break;
      case ExperimentKind::funnel_sweep: trace = funnel_run(effective, *dim, seed); break;
      case ExperimentKind::covertype: trace = covertype_run(effective, *data, seed); break;
    }
    RunRecord rec;
    rec.file = dir / trace_file_name(cfg.run.method, seed);
    write_trace(rec.file, trace);
    rec.seed = seed;
    rec.dim = dim;
    rec.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    rec.score_evals = trace.score_evals;
    rec.failed = trace.failed;
    rec.failure = trace.failure;
    if (opts.log)
      *opts.log << rec.file.string() << ": " << rec.score_evals << " score evaluations, "
                << rec.wall_seconds << " s" << (rec.failed ? " (FAILED: " + rec.failure + ")" : std::string()) << std::endl;
    result.runs.push_back(std::move(rec));
  };

  if (cfg.experiment == ExperimentKind::funnel_sweep) {
    for (std::size_t dim : cfg.target.dims) {
      const fs::path dir = cfg.output_dir / ("d" + std::to_string(dim));
      fs::create_directories(dir);
      write_trace(dir / "reference.csv", funnel_reference_trace(effective, dim));
      for (auto seed : effective.seeds) execute(dir, dim, seed);
    }
  } else {
    if (cfg.experiment == ExperimentKind::funnel)
      write_trace(cfg.output_dir / "reference.csv", funnel_reference_trace(effective, effective.target.dim));
    for (auto seed : effective.seeds) execute(cfg.output_dir, std::nullopt, seed);
  }

  nlohmann::ordered_json manifest;
  manifest["experiment"] = std::string(to_string(cfg.experiment));
  manifest["method"] = std::string(to_string(cfg.run.method));
  manifest["version"] = NVGD_VERSION;
  manifest["seed_offset"] = opts.seed_offset;
  manifest["threads"] = tbb::this_task_arena::max_concurrency();
  nlohmann::ordered_json config;
  for (const auto& e : resolved_entries(effective)) config[e.section][e.key] = e.value;
  manifest["config"] = config;
  if (data) {
    manifest["dataset"] = {{"path", cfg.target.data_path.string()},
                           {"num_features", data->num_features},
                           {"train_rows", data->train.labels.size()},
                           {"test_rows", data->test.labels.size()}};
  }
  if (result.tuning) {
    nlohmann::ordered_json grid = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < result.tuning->step_sizes.size(); ++i) {
      const double acc = result.tuning->validation_accuracy[i];
      grid.push_back({{"step_size", result.tuning->step_sizes[i]},
                      {"validation_accuracy", std::isfinite(acc) ? nlohmann::ordered_json(acc) : nullptr}});
    }
    manifest["tuning"] = {{"validation_fraction", cfg.tuning.validation_fraction},
                          {"grid", grid},
                          {"selected_step_size", result.tuning->selected}};
  }
  std::uint64_t total_evals = 0;
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (const auto& r : result.runs) {
    nlohmann::ordered_json j;
    j["file"] = fs::relative(r.file, cfg.output_dir).generic_string();
    j["seed"] = r.seed;
    if (r.dim) j["dim"] = *r.dim;
    j["wall_clock_seconds"] = r.wall_seconds;
    j["score_evals"] = r.score_evals;
    j["failed"] = r.failed;
    if (r.failed) j["failure"] = r.failure;
    runs.push_back(j);
    total_evals += r.score_evals;
  }
  manifest["runs"] = runs;
  manifest["total_score_evals"] = total_evals;
  manifest["total_wall_clock_seconds"] = std::chrono::duration<double>(clock::now() - started).count();

  result.manifest = cfg.output_dir / "manifest.json";
  std::ofstream out(result.manifest, std::ios::binary);
  out << manifest.dump(2) << '\n';
  return result;
}

}  // namespace nvgd
