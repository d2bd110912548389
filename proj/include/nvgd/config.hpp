#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nvgd/run.hpp"

namespace nvgd {

enum class ExperimentKind { sanity_check, funnel, funnel_sweep, covertype };

std::string_view to_string(ExperimentKind k);
ExperimentKind parse_experiment(std::string_view name);

/// Target parameters. Which fields apply depends on the experiment.
struct TargetSettings {
  std::size_t dim = 2;                          // funnel, sanity-check
  double scale_var = 3.0;                       // funnel, funnel-sweep
  std::vector<std::size_t> dims = {2, 5, 10, 20, 40};  // funnel-sweep
  double variance_lo = 1e-4;                    // sanity-check target p
  double variance_hi = 1.0;
  std::filesystem::path data_path = "data/covtype.libsvm.binary.scale";  // covertype
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;
  std::size_t train_rows = 0;  // 0 keeps every training row
  double a0 = 1.0;
  double b0 = 0.01;
  std::size_t batch_size = 128;
};

struct DiagnosticsSettings {
  double mmd_bandwidth = 1.0;
  std::size_t reference_samples = 2000;
  std::uint64_t reference_seed = 12345;
  std::size_t oracle_samples = 100000;
  std::size_t heldout_samples = 1000;  // sanity-check: fresh q samples for the held-out R-hat-SD
};

/// Step-size selection on a held-out slice of the training set (covertype only).
struct TuningSettings {
  std::vector<double> step_sizes;  // empty: use the method's configured step size
  double validation_fraction = 0.1;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::funnel;
  std::vector<std::uint64_t> seeds = {0};
  std::filesystem::path output_dir = "out";
  RunConfig run;  // method, particle count, steps, cadence and per-method settings
  TargetSettings target;
  DiagnosticsSettings diagnostics;
  TuningSettings tuning;
};

/// Config error naming the offending line (0 when not tied to one line) and key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::size_t line, const std::string& key, const std::string& detail,
              const std::string& file = {});
  std::size_t line() const { return line_; }
  const std::string& key() const { return key_; }
  const std::string& detail() const { return detail_; }

 private:
  std::size_t line_;
  std::string key_;
  std::string detail_;
};

/// Parses the sectioned key-value format described in the README. Unknown sections and keys,
/// type mismatches and constraint violations throw ConfigError.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig parse_config_file(const std::filesystem::path& path);

struct ResolvedEntry {
  std::string section;
  std::string key;
  std::string value;
};

/// Every key with its effective value, in schema order.
std::vector<ResolvedEntry> resolved_entries(const ExperimentConfig& cfg);

/// The resolved entries in the same format parse_config reads.
void write_resolved_config(std::ostream& out, const ExperimentConfig& cfg);

/// Closest known key in the section, or empty when nothing is close.
std::string suggest_key(std::string_view section, std::string_view key);

}  // namespace nvgd
