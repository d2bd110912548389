#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nvgd/config.hpp"
#include "nvgd/libsvm.hpp"
#include "nvgd/run.hpp"

namespace nvgd {

/// The Covertype file is absent; the message says where it was expected and how to fetch it.
class DatasetMissing : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Witness training on fixed samples from q = N(0, I) against an ill-conditioned Gaussian p.
///
/// Rows: rsd_train (every iteration, value before the update), rsd_heldout (exact divergence
/// on fresh q samples, at the metric cadence and after the last update), and at step 0 the
/// reference lines rsd_oracle, rsd_oracle_se, rsd_oracle_closed_form and svgd_rescaled_rsd.
MetricTrace sanity_check(const ExperimentConfig& cfg, std::uint64_t seed);

/// Exact funnel samples used as the MMD reference.
Evaluation funnel_evaluation(const ExperimentConfig& cfg, std::size_t dim);

/// Run on the funnel. Unless the run failed, the trace ends with the final positions as
/// position_<j> rows, one row per particle and coordinate in particle order.
MetricTrace funnel_run(const ExperimentConfig& cfg, std::size_t dim, std::uint64_t seed);

/// The exact reference samples in the same position_<j> row layout, method "exact".
MetricTrace funnel_reference_trace(const ExperimentConfig& cfg, std::size_t dim);

struct CovertypeData {
  DenseDataset train;  // standardized, bias column appended
  DenseDataset test;
  std::size_t num_features = 0;  // as read from the file
};

/// Reads the LIBSVM file, splits off the test set, subsamples the training rows and
/// standardizes with training statistics. Throws DatasetMissing when the file is absent.
CovertypeData load_covertype(const TargetSettings& target);

/// Same preparation from an in-memory dataset.
CovertypeData prepare_covertype(const SparseDataset& data, const TargetSettings& target);

struct TuningResult {
  std::vector<double> step_sizes;
  std::vector<double> validation_accuracy;
  double selected = 0.0;
};

/// Runs the configured method for each candidate step size on a split of the training set and
/// picks the one with the highest final validation accuracy (the smallest on ties).
TuningResult tune_step_size(const ExperimentConfig& cfg, const DenseDataset& train, std::uint64_t seed);

/// Copy of the run config with the method's step size replaced.
RunConfig with_step_size(const RunConfig& run, double step);

MetricTrace covertype_run(const ExperimentConfig& cfg, const CovertypeData& data, std::uint64_t seed);

struct RunOptions {
  std::uint64_t seed_offset = 0;
  bool overwrite = false;
  std::ostream* log = nullptr;  // progress lines, if set
};

struct RunRecord {
  std::filesystem::path file;
  std::uint64_t seed = 0;
  std::optional<std::size_t> dim;
  double wall_seconds = 0.0;
  std::uint64_t score_evals = 0;
  bool failed = false;
  std::string failure;
};

struct ExperimentResult {
  std::vector<RunRecord> runs;
  std::optional<TuningResult> tuning;
  std::filesystem::path manifest;
};

/// Runs every seed of the configured experiment and writes trace_<method>_<seed>.csv files
/// (under d<dim>/ for the funnel sweep), resolved_config.ini and manifest.json into the output
/// directory. Refuses to touch a directory holding earlier results unless overwrite is set.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts);

/// Trace file name for one run.
std::string trace_file_name(Method m, std::uint64_t seed);

}  // namespace nvgd
