#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "nvgd/config.hpp"

using namespace nvgd;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

// Runs the parser and returns the error it raised.
ConfigError parse_error(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e;
  }
  ADD_FAILURE() << "no ConfigError for:\n" << text;
  return ConfigError(0, "", "");
}

const std::string kMinimalFunnel =
    "[experiment]\n"
    "name = funnel\n"
    "method = nvgd\n"
    "particles = 100\n"
    "\n"
    "[target]\n"
    "dim = 2\n";

}  // namespace

TEST(Config, MinimalFunnelTakesDefaults) {
  const ExperimentConfig c = parse(kMinimalFunnel);
  EXPECT_EQ(c.experiment, ExperimentKind::funnel);
  EXPECT_EQ(c.run.method, Method::nvgd);
  EXPECT_EQ(c.run.particles, 100u);
  EXPECT_EQ(c.target.dim, 2u);
  EXPECT_EQ(c.target.scale_var, 3.0);
  EXPECT_EQ(c.seeds, std::vector<std::uint64_t>{0});
  EXPECT_EQ(c.run.outer_steps, 1000u);
  EXPECT_EQ(c.run.nvgd.patience, 20u);
  EXPECT_EQ(c.run.nvgd.validation_fraction, 0.2);
  EXPECT_EQ(c.diagnostics.mmd_bandwidth, 1.0);
  EXPECT_EQ(c.output_dir, "out");
}

TEST(Config, ParsesEverySection) {
  const ExperimentConfig c = parse(
      "# comment\n"
      "[experiment]\n"
      "name = covertype\n"
      "method = svgd\n"
      "seeds = 3, 7..9\n"
      "output_dir = results/x  # inline comment\n"
      "[target]\n"
      "train_rows = 500\n"
      "batch_size = 64\n"
      "[nvgd]\n"
      "hidden = 16, 16, 16\n"
      "activation = softplus\n"
      "divergence = hutchinson\n"
      "hutchinson_draws = 4\n"
      "[svgd]\n"
      "bandwidth = 0.5\n"
      "optimizer = adam\n"
      "[ula]\n"
      "thinning = 7\n"
      "[tuning]\n"
      "step_sizes = 1e-3, 1e-4\n");
  EXPECT_EQ(c.experiment, ExperimentKind::covertype);
  EXPECT_EQ(c.run.method, Method::svgd);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{3, 7, 8, 9}));
  EXPECT_EQ(c.output_dir, "results/x");
  EXPECT_EQ(c.target.train_rows, 500u);
  EXPECT_EQ(c.target.batch_size, 64u);
  EXPECT_EQ(c.run.nvgd.hidden, (std::vector<std::size_t>{16, 16, 16}));
  EXPECT_EQ(c.run.nvgd.activation, Activation::softplus);
  EXPECT_EQ(c.run.nvgd.hutchinson_draws, 4u);
  EXPECT_EQ(c.run.svgd.bandwidth, BandwidthRule::fixed);
  EXPECT_EQ(c.run.svgd.fixed_bandwidth, 0.5);
  EXPECT_EQ(c.run.svgd.optimizer, OptimizerKind::adam);
  EXPECT_EQ(c.run.ula.thinning, 7u);
  EXPECT_EQ(c.tuning.step_sizes, (std::vector<double>{1e-3, 1e-4}));
}

TEST(Config, UnknownKeySuggestsTheSpelling) {
  const ConfigError e = parse_error(kMinimalFunnel + "[nvgd]\nstepsize = 0.1\n");
  EXPECT_EQ(e.line(), 9u);
  EXPECT_EQ(e.key(), "nvgd.stepsize");
  EXPECT_NE(std::string(e.what()).find("did you mean 'step_size'"), std::string::npos) << e.what();
}

TEST(Config, SuggestionNeedsACloseMatch) {
  EXPECT_EQ(suggest_key("ula", "step-size"), "step_size");
  EXPECT_EQ(suggest_key("ula", "thining"), "thinning");
  EXPECT_EQ(suggest_key("ula", "banana"), "");
}

TEST(Config, NegativeStepSizeIsRejected) {
  const ConfigError e = parse_error(kMinimalFunnel + "[nvgd]\nstep_size = -0.1\n");
  EXPECT_EQ(e.line(), 9u);
  EXPECT_EQ(e.key(), "nvgd.step_size");
  EXPECT_EQ(e.detail(), "must be positive");
}

TEST(Config, TypeMismatchNamesKeyAndLine) {
  const ConfigError e = parse_error("[experiment]\nname = funnel\nparticles = many\n");
  EXPECT_EQ(e.line(), 3u);
  EXPECT_EQ(e.key(), "experiment.particles");
  EXPECT_EQ(std::string(e.what()), "line 3: experiment.particles: expected a non-negative integer, got 'many'");
}

TEST(Config, ZeroSeedsIsRejected) {
  EXPECT_EQ(parse_error("[experiment]\nname = funnel\nseeds = 4..2\n").key(), "experiment.seeds");
  EXPECT_EQ(parse_error("[experiment]\nname = funnel\nseeds =\n").detail(), "missing value");
  EXPECT_EQ(parse_error("[experiment]\nname = funnel\nseeds = 1, 1\n").detail(), "seeds must be distinct");
}

TEST(Config, StructuralErrors) {
  EXPECT_EQ(parse_error("[experiment]\nname = funnel\n[solver]\n").line(), 3u);
  EXPECT_EQ(parse_error("name = funnel\n").detail(), "key outside of any section");
  EXPECT_EQ(parse_error("[experiment]\nname = funnel\nname = funnel\n").line(), 3u);
  EXPECT_EQ(parse_error("[experiment]\nmethod = nvgd\n").key(), "experiment.name");
  EXPECT_EQ(parse_error("[experiment]\nname funnel\n").line(), 2u);
  EXPECT_EQ(parse_error("[experiment\nname = funnel\n").line(), 1u);
}

TEST(Config, CrossFieldConstraints) {
  EXPECT_EQ(parse_error("[experiment]\nname = funnel\n[target]\ndim = 1\n").key(), "target.dim");
  EXPECT_EQ(parse_error("[experiment]\nname = sanity-check\nmethod = svgd\n").key(), "experiment.method");
  EXPECT_EQ(parse_error("[experiment]\nname = covertype\nmethod = ula_sequential\n").key(), "experiment.method");
  EXPECT_EQ(parse_error("[experiment]\nname = funnel\n[tuning]\nstep_sizes = 0.1\n").key(), "tuning.step_sizes");
  EXPECT_EQ(parse_error("[experiment]\nname = sanity-check\n[target]\nvariance_lo = 2\n").key(),
            "target.variance_lo");
}

TEST(Config, ErrorFromFileCarriesThePath) {
  const ConfigError e(4, "nvgd.step_size", "must be positive", "a.ini");
  EXPECT_EQ(std::string(e.what()), "a.ini:4: nvgd.step_size: must be positive");
}

TEST(Config, ResolvedConfigRoundTrips) {
  const ExperimentConfig c = parse(kMinimalFunnel + "[nvgd]\nlearning_rate = 0.003\nhidden = 4, 5\n");
  std::ostringstream first;
  write_resolved_config(first, c);
  const ExperimentConfig again = parse(first.str());
  std::ostringstream second;
  write_resolved_config(second, again);
  EXPECT_EQ(first.str(), second.str());
  EXPECT_NE(first.str().find("learning_rate = 0.003\n"), std::string::npos) << first.str();
  EXPECT_EQ(again.run.nvgd.hidden, (std::vector<std::size_t>{4, 5}));
}

TEST(Config, ResolvedEntriesCoverEverySection) {
  std::set<std::string> sections;
  for (const auto& e : resolved_entries(parse(kMinimalFunnel))) sections.insert(e.section);
  EXPECT_EQ(sections, (std::set<std::string>{"experiment", "target", "nvgd", "svgd", "ula", "diagnostics", "tuning"}));
}

TEST(Config, ExperimentNames) {
  for (auto k : {ExperimentKind::sanity_check, ExperimentKind::funnel, ExperimentKind::funnel_sweep,
                 ExperimentKind::covertype})
    EXPECT_EQ(parse_experiment(to_string(k)), k);
  EXPECT_THROW(parse_experiment("mnist"), std::invalid_argument);
}
