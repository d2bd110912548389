#include "nvgd/run.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>

#include "nvgd/logistic.hpp"
#include "nvgd/parallel.hpp"

namespace nvgd {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::nvgd: return "nvgd";
    case Method::svgd: return "svgd";
    case Method::ula_parallel: return "ula_parallel";
    case Method::ula_sequential: return "ula_sequential";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "nvgd") return Method::nvgd;
  if (name == "svgd") return Method::svgd;
  if (name == "ula_parallel") return Method::ula_parallel;
  if (name == "ula_sequential") return Method::ula_sequential;
  throw std::invalid_argument("unknown method '" + std::string(name) +
                              "' (expected nvgd, svgd, ula_parallel or ula_sequential)");
}

void RunConfig::validate() const {
  if (particles == 0) throw std::invalid_argument("particles must be at least 1");
  if (metric_every == 0) throw std::invalid_argument("metric_every must be at least 1");
  switch (method) {
    case Method::nvgd: nvgd.validate(particles); break;
    case Method::svgd: svgd.validate(); break;
    case Method::ula_parallel: ula.validate(); break;
    case Method::ula_sequential: ula.validate(); break;
  }
}

std::vector<double> MetricTrace::values(std::string_view metric) const {
  std::vector<double> out;
  for (const auto& r : rows)
    if (r.metric == metric) out.push_back(r.value);
  return out;
}

std::optional<double> MetricTrace::last(std::string_view metric) const {
  for (auto it = rows.rbegin(); it != rows.rend(); ++it)
    if (it->metric == metric) return it->value;
  return std::nullopt;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip form
  return std::string(buf, res.ptr);
}

void MetricTrace::write_csv(std::ostream& out) const {
  out << kTraceHeader << '\n';
  for (const auto& r : rows)
    out << r.method << ',' << r.target << ',' << r.seed << ',' << r.outer_step << ','
        << r.score_evals << ',' << r.metric << ',' << format_double(r.value) << '\n';
}

namespace {

// Score evaluation for a whole ensemble; stochastic targets draw one minibatch per call.
class ScoreEvaluator {
 public:
  ScoreEvaluator(const ScoreModel& target, std::uint64_t seed) : target_(target) {
    if (target.capabilities().is_stochastic)
      sampler_.emplace(target.data_size(), target.batch_size(), make_rng(seed, Stream::minibatch));
  }

  Matrix operator()(const Matrix& x) {
    std::vector<std::size_t> batch;
    if (sampler_) batch = sampler_->next();
    Matrix scores(x.rows(), x.cols());
    for_each_block(static_cast<std::size_t>(x.rows()),
                   [&](std::size_t, std::size_t begin, std::size_t end) {
                     for (std::size_t i = begin; i < end; ++i) {
                       const auto r = static_cast<Eigen::Index>(i);
                       const Vector xi = x.row(r).transpose();
                       scores.row(r) = (sampler_ ? target_.score(xi, batch) : target_.score(xi)).transpose();
                     }
                   });
    evaluations_ += static_cast<std::uint64_t>(x.rows());
    return scores;
  }

  Vector single(const Vector& x) {
    ++evaluations_;
    if (sampler_) return target_.score(x, sampler_->next());
    return target_.score(x);
  }

  std::uint64_t evaluations() const { return evaluations_; }

 private:
  const ScoreModel& target_;
  std::optional<EpochSampler> sampler_;
  std::uint64_t evaluations_ = 0;
};

class Recorder {
 public:
  Recorder(MetricTrace& trace, const ScoreModel& target, const RunConfig& cfg)
      : trace_(trace), method_(to_string(cfg.method)), target_(target.name()), seed_(cfg.seed) {}

  void add(std::uint64_t step, std::uint64_t evals, std::string metric, double value) {
    trace_.rows.push_back({method_, target_, seed_, step, evals, std::move(metric), value});
  }

 private:
  MetricTrace& trace_;
  std::string method_;
  std::string target_;
  std::uint64_t seed_;
};

Matrix rows_to_matrix(const std::vector<Vector>& rows, Eigen::Index d) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return m;
}

}  // namespace

MetricTrace run(const ScoreModel& target, const RunConfig& cfg, const Evaluation& eval) {
  cfg.validate();
  const std::size_t d = target.dim();
  const std::size_t n = cfg.particles;

  MetricTrace trace;
  Recorder rec(trace, target, cfg);
  ScoreEvaluator scores_of(target, cfg.seed);

  Rng init_rng = make_rng(cfg.seed, Stream::ensemble_init);
  const bool sequential = cfg.method == Method::ula_sequential;
  ParticleEnsemble ensemble(standard_normal(init_rng, sequential ? 1 : static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(d)));

  // Method state.
  WitnessParams witness;
  OptState witness_opt;
  NvgdStreams nvgd_streams = NvgdStreams::from_seed(cfg.seed);
  std::optional<InnerTrainResult> last_inner;
  OptState svgd_opt;
  Rng langevin = make_rng(cfg.seed, Stream::langevin);
  Vector chain_state;
  std::uint64_t chain_steps = 0;
  std::vector<Vector> retained;

  if (cfg.method == Method::nvgd) {
    witness = init_params(cfg.nvgd.layer_dims(d), cfg.nvgd.activation, cfg.seed);
    witness_opt = OptState::make(cfg.nvgd.optimizer, cfg.nvgd.learning_rate, witness.parameter_count());
  } else if (cfg.method == Method::svgd) {
    svgd_opt = OptState::make(cfg.svgd.optimizer, cfg.svgd.step_size, n * d);
  } else if (sequential) {
    chain_state = ensemble.positions.row(0).transpose();
    retained.push_back(chain_state);
  }

  // Samples the metrics are computed on: the ensemble, or the retained chain states.
  auto current_samples = [&]() -> Matrix {
    return sequential ? rows_to_matrix(retained, static_cast<Eigen::Index>(d)) : ensemble.positions;
  };

  auto record = [&](std::uint64_t step) {
    const std::uint64_t evals = scores_of.evaluations();
    const Matrix samples = current_samples();
    if (samples.rows() == 0) return;
    if (eval.reference) {
      if (step == 0) rec.add(step, evals, "mmd_bandwidth", eval.mmd_kernel.bandwidth);
      rec.add(step, evals, "mmd", mmd_squared(samples, *eval.reference, eval.mmd_kernel));
    }
    if (eval.test_X && eval.test_y)
      rec.add(step, evals, "accuracy", logreg_accuracy(ParticleEnsemble(samples), *eval.test_X, *eval.test_y));
    if (cfg.method == Method::nvgd && last_inner) {
      rec.add(step, evals, "rsd", last_inner->best_validation_rsd);
      rec.add(step, evals, "inner_steps", static_cast<double>(last_inner->steps));
    }
    if (target.reports_guards()) {
      std::size_t hits = 0;
      for (Eigen::Index i = 0; i < samples.rows(); ++i) hits += target.guard_hits(samples.row(i).transpose());
      rec.add(step, evals, "guard_hits", static_cast<double>(hits));
    }
  };

  record(0);
  std::uint64_t step = 0;
  try {
    for (step = 1; step <= cfg.outer_steps; ++step) {
      switch (cfg.method) {
        case Method::nvgd: {
          const Matrix s = scores_of(ensemble.positions);
          last_inner = nvgd_inner_train(witness, witness_opt, ensemble, s, cfg.nvgd, nvgd_streams);
          witness = last_inner->params;
          ensemble = nvgd_particle_update(ensemble, witness, cfg.nvgd.particle_step);
          break;
        }
        case Method::svgd: {
          const Matrix s = scores_of(ensemble.positions);
          ensemble = svgd_step(ensemble, s, cfg.svgd, svgd_opt);
          break;
        }
        case Method::ula_parallel: {
          const Matrix s = scores_of(ensemble.positions);
          ensemble = ula_step(ensemble, s, cfg.ula.step_size, langevin);
          break;
        }
        case Method::ula_sequential: {
          // One outer step spends the same n score evaluations as the parallel methods.
          const ScoreFn score = [&](const Vector& x) { return scores_of.single(x); };
          ula_advance_chain(score, chain_state, cfg.ula.step_size, n, cfg.ula.thinning,
                            chain_steps, langevin, retained);
          if (step == 1) retained.erase(retained.begin());  // drop the initial state
          break;
        }
      }
      if (step % cfg.metric_every == 0 || step == cfg.outer_steps) record(step);
    }
  } catch (const NumericalError& e) {
    trace.failed = true;
    trace.failure = e.what();
    rec.add(step, scores_of.evaluations(), "failed", 1.0);
  }
  trace.score_evals = scores_of.evaluations();
  trace.final_ensemble = sequential ? ParticleEnsemble(current_samples(), chain_steps) : ensemble;
  return trace;
}

}  // namespace nvgd
