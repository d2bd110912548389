#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "nvgd/diagnostics.hpp"
#include "nvgd/samplers.hpp"
#include "nvgd/targets.hpp"

namespace nvgd {

enum class Method { nvgd, svgd, ula_parallel, ula_sequential };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);

struct RunConfig {
  Method method = Method::nvgd;
  std::size_t particles = 100;
  std::size_t outer_steps = 1000;
  std::size_t metric_every = 10;
  std::uint64_t seed = 0;
  NvgdConfig nvgd;
  SvgdConfig svgd;
  UlaConfig ula;

  void validate() const;
};

/// Reference data for the metrics recorded along a run.
struct Evaluation {
  std::optional<Matrix> reference;  // exact target samples for MMD
  KernelSpec mmd_kernel{1.0};
  std::optional<Eigen::MatrixXd> test_X;  // logistic targets: accuracy on a test set
  std::optional<Eigen::VectorXd> test_y;
};

/// One CSV row: (method, target, seed, outer_step, score_evals_cumulative, metric_name, value).
struct TraceRow {
  std::string method;
  std::string target;
  std::uint64_t seed = 0;
  std::uint64_t outer_step = 0;
  std::uint64_t score_evals = 0;
  std::string metric;
  double value = 0.0;
};

inline constexpr std::string_view kTraceHeader =
    "method,target,seed,outer_step,score_evals_cumulative,metric_name,value";

struct MetricTrace {
  std::vector<TraceRow> rows;
  bool failed = false;
  std::string failure;
  ParticleEnsemble final_ensemble;
  std::uint64_t score_evals = 0;

  /// Values of one metric in row order.
  std::vector<double> values(std::string_view metric) const;
  std::optional<double> last(std::string_view metric) const;
  void write_csv(std::ostream& out) const;
};

/// Formats a double so that parsing it back yields the same value.
std::string format_double(double v);

/// Runs the configured method against the target. Particles start from N(0, I) drawn from
/// the ensemble-init stream. Metrics are recorded at step 0, every metric_every steps and at
/// the last step. A numerical failure ends the run with a `failed` row instead of throwing.
MetricTrace run(const ScoreModel& target, const RunConfig& cfg, const Evaluation& eval);

}  // namespace nvgd
