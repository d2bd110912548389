#include "nvgd/witness.hpp"

#include <cmath>
#include <string>

#include "nvgd/parallel.hpp"

namespace nvgd {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::softplus: return "softplus";
  }
  return "unknown";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "softplus") return Activation::softplus;
  throw std::invalid_argument("unknown activation '" + std::string(name) +
                              "' (expected tanh or softplus)");
}

void check_layer_dims(std::span<const std::size_t> layer_dims) {
  if (layer_dims.size() < 2)
    throw std::invalid_argument("witness network needs at least 2 layer sizes");
  for (std::size_t w : layer_dims)
    if (w == 0) throw std::invalid_argument("witness layer sizes must be positive");
  if (layer_dims.front() != layer_dims.back())
    throw std::invalid_argument("witness input and output sizes must both equal d");
}

std::size_t WitnessParams::parameter_count() const {
  std::size_t count = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    count += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  return count;
}

Vector WitnessParams::flatten() const {
  Vector flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    flat.segment(at, weights[l].size()) = weights[l].reshaped();
    at += weights[l].size();
    flat.segment(at, biases[l].size()) = biases[l];
    at += biases[l].size();
  }
  return flat;
}

void WitnessParams::assign(const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count())
    throw std::invalid_argument("flat parameter vector has wrong length");
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l].reshaped() = flat.segment(at, weights[l].size());
    at += weights[l].size();
    biases[l] = flat.segment(at, biases[l].size());
    at += biases[l].size();
  }
}

void WitnessParams::validate() const {
  check_layer_dims(layer_dims);
  if (weights.size() != layer_dims.size() - 1 || biases.size() != weights.size())
    throw std::invalid_argument("witness layer count does not match layer_dims");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const auto out = static_cast<Eigen::Index>(layer_dims[l + 1]);
    const auto in = static_cast<Eigen::Index>(layer_dims[l]);
    if (weights[l].rows() != out || weights[l].cols() != in || biases[l].size() != out)
      throw std::invalid_argument("witness layer " + std::to_string(l) + " has wrong shape");
    if (!weights[l].allFinite() || !biases[l].allFinite())
      throw NumericalError("witness layer " + std::to_string(l) + " has non-finite entries");
  }
}

WitnessParams WitnessParams::zeros(std::span<const std::size_t> layer_dims,
                                   Activation activation) {
  check_layer_dims(layer_dims);
  WitnessParams p;
  p.layer_dims.assign(layer_dims.begin(), layer_dims.end());
  p.activation = activation;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const auto out = static_cast<Eigen::Index>(layer_dims[l + 1]);
    const auto in = static_cast<Eigen::Index>(layer_dims[l]);
    p.weights.emplace_back(Eigen::MatrixXd::Zero(out, in));
    p.biases.emplace_back(Eigen::VectorXd::Zero(out));
  }
  return p;
}

WitnessParams init_params(std::span<const std::size_t> layer_dims, Activation activation,
                          std::uint64_t seed) {
  WitnessParams p = WitnessParams::zeros(layer_dims, activation);
  Rng rng = make_rng(seed, Stream::witness_init);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& w : p.weights) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    // Row-major fill order so the draw sequence does not depend on Eigen storage order.
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = scale * normal(rng);
  }
  return p;
}

HutchinsonNoise HutchinsonNoise::sample(Rng& rng, std::size_t m, std::size_t d) {
  if (m == 0) throw std::invalid_argument("Hutchinson estimator needs at least one draw");
  return {standard_normal(rng, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d))};
}

namespace {

// Activation value, first and second derivative.
void activate(Activation kind, const Vector& z, Vector& a, Vector& s1, Vector& s2) {
  a.resize(z.size());
  s1.resize(z.size());
  s2.resize(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (kind == Activation::tanh) {
      const double t = std::tanh(z[i]);
      a[i] = t;
      s1[i] = 1.0 - t * t;
      s2[i] = -2.0 * t * s1[i];
    } else {
      const double zi = z[i];
      a[i] = std::max(zi, 0.0) + std::log1p(std::exp(-std::abs(zi)));
      const double sig = zi >= 0 ? 1.0 / (1.0 + std::exp(-zi)) : std::exp(zi) / (1.0 + std::exp(zi));
      s1[i] = sig;
      s2[i] = sig * (1.0 - sig);
    }
  }
}

// Primal values and tangents for one input point, kept for the reverse sweep.
// Tangents are carried as columns: probes (d x k) in, tangent_out (d x k) out.
struct Tape {
  std::vector<Vector> inputs;            // input to each layer
  std::vector<Vector> slope, curvature;  // hidden layers only
  std::vector<Eigen::MatrixXd> tangent_in;
  std::vector<Eigen::MatrixXd> tangent_pre;  // hidden layers only
  Vector output;
  Eigen::MatrixXd tangent_out;
};

void check_input(const WitnessParams& p, const Vector& x) {
  if (p.weights.empty()) throw std::invalid_argument("witness network has no layers");
  if (static_cast<std::size_t>(x.size()) != p.dim())
    throw std::invalid_argument("input has dimension " + std::to_string(x.size()) +
                                ", witness expects " + std::to_string(p.dim()));
}

void record(const WitnessParams& p, const Vector& x, const Eigen::MatrixXd& probes, Tape& tape) {
  const std::size_t L = p.num_layers();
  tape.inputs.resize(L);
  tape.tangent_in.resize(L);
  tape.slope.resize(L - 1);
  tape.curvature.resize(L - 1);
  tape.tangent_pre.resize(L - 1);

  Vector a = x;
  Eigen::MatrixXd t = probes;
  for (std::size_t l = 0; l < L; ++l) {
    Vector z = p.weights[l] * a + p.biases[l];
    Eigen::MatrixXd u = p.weights[l] * t;
    tape.inputs[l] = std::move(a);
    tape.tangent_in[l] = std::move(t);
    if (l + 1 < L) {
      Vector next;
      activate(p.activation, z, next, tape.slope[l], tape.curvature[l]);
      a = std::move(next);
      t = tape.slope[l].asDiagonal() * u;
      tape.tangent_pre[l] = std::move(u);
    } else {
      tape.output = std::move(z);
      tape.tangent_out = std::move(u);
    }
  }
}

// Accumulates into grad the parameter gradient of
//   output_adjoint . f(x) + sum(tangent_adjoint .* J(x) probes).
void backward(const WitnessParams& p, const Tape& tape, const Vector& output_adjoint,
              const Eigen::MatrixXd& tangent_adjoint, WitnessParams& grad) {
  const std::size_t L = p.num_layers();
  Vector zbar = output_adjoint;
  Eigen::MatrixXd ubar = tangent_adjoint;
  Vector abar;
  Eigen::MatrixXd tbar;
  for (std::size_t l = L; l-- > 0;) {
    if (l + 1 < L) {
      const Vector& s1 = tape.slope[l];
      const Vector& s2 = tape.curvature[l];
      ubar = s1.asDiagonal() * tbar;
      const Vector cross = tape.tangent_pre[l].cwiseProduct(tbar).rowwise().sum();
      zbar = s1.cwiseProduct(abar) + s2.cwiseProduct(cross);
    }
    Eigen::MatrixXd gw = zbar * tape.inputs[l].transpose();
    gw.noalias() += ubar * tape.tangent_in[l].transpose();
    if (!gw.allFinite() || !zbar.allFinite())
      throw NumericalError("non-finite gradient in witness layer " + std::to_string(l));
    grad.weights[l] += gw;
    grad.biases[l] += zbar;
    if (l > 0) {
      abar = p.weights[l].transpose() * zbar;
      tbar = p.weights[l].transpose() * ubar;
    }
  }
}

struct Probes {
  Eigen::MatrixXd columns;  // d x k
  double weight = 1.0;
};

Probes make_probes(std::size_t d, const HutchinsonNoise* noise, DivergenceMode mode) {
  if (mode == DivergenceMode::exact)
    return {Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)),
            1.0};
  if (noise == nullptr) throw std::invalid_argument("Hutchinson mode needs noise per particle");
  if (noise->count() == 0 || static_cast<std::size_t>(noise->draws.cols()) != d)
    throw std::invalid_argument("Hutchinson noise has wrong shape");
  return {noise->draws.transpose(), 1.0 / static_cast<double>(noise->count())};
}

void check_batch(const WitnessParams& p, const Matrix& particles, const Matrix& scores,
                 std::span<const HutchinsonNoise> noise, DivergenceMode mode) {
  if (p.weights.empty()) throw std::invalid_argument("witness network has no layers");
  const auto d = static_cast<Eigen::Index>(p.dim());
  if (particles.cols() != d || scores.cols() != d || scores.rows() != particles.rows())
    throw std::invalid_argument("particles, scores and witness dimensions disagree");
  if (mode == DivergenceMode::hutchinson &&
      noise.size() != static_cast<std::size_t>(particles.rows()))
    throw std::invalid_argument("need one Hutchinson noise entry per particle");
  if (!scores.allFinite()) throw NumericalError("non-finite score entries");
}

// Per-particle RSD term; if grad is non-null also accumulates its parameter gradient.
double particle_term(const WitnessParams& p, const Vector& x, const Vector& score,
                     const Probes& probes, Tape& tape, WitnessParams* grad) {
  record(p, x, probes.columns, tape);
  const Vector& f = tape.output;
  const double div = probes.weight * probes.columns.cwiseProduct(tape.tangent_out).sum();
  const double value = f.dot(score) + div - 0.5 * f.squaredNorm();
  if (grad != nullptr)
    backward(p, tape, score - f, probes.weight * probes.columns, *grad);
  return value;
}

RsdValueAndGradient evaluate(const WitnessParams& params, const Matrix& particles,
                             const Matrix& scores, std::span<const HutchinsonNoise> noise,
                             DivergenceMode mode, bool with_gradient) {
  check_batch(params, particles, scores, noise, mode);
  const auto n = static_cast<std::size_t>(particles.rows());
  if (n == 0) throw std::invalid_argument("RSD estimate needs at least one particle");

  const std::size_t blocks = block_count(n);
  std::vector<double> block_value(blocks, 0.0);
  std::vector<WitnessParams> block_grad;
  if (with_gradient) block_grad.assign(blocks, params.zeros_like());

  const Probes basis = mode == DivergenceMode::exact
                           ? make_probes(params.dim(), nullptr, mode) : Probes{};
  for_each_block(n, [&](std::size_t b, std::size_t begin, std::size_t end) {
    Tape tape;
    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      WitnessParams* grad = with_gradient ? &block_grad[b] : nullptr;
      if (mode == DivergenceMode::exact) {
        sum += particle_term(params, particles.row(row).transpose(),
                             scores.row(row).transpose(), basis, tape, grad);
      } else {
        const Probes probes = make_probes(params.dim(), &noise[i], mode);
        sum += particle_term(params, particles.row(row).transpose(),
                             scores.row(row).transpose(), probes, tape, grad);
      }
    }
    block_value[b] = sum;
  });

  RsdValueAndGradient result;
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (double v : block_value) total += v;
  result.value = total * inv_n;
  if (with_gradient) {
    result.gradient = std::move(block_grad[0]);
    for (std::size_t b = 1; b < blocks; ++b) {
      for (std::size_t l = 0; l < params.num_layers(); ++l) {
        result.gradient.weights[l] += block_grad[b].weights[l];
        result.gradient.biases[l] += block_grad[b].biases[l];
      }
    }
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
      result.gradient.weights[l] *= inv_n;
      result.gradient.biases[l] *= inv_n;
    }
  }
  return result;
}

}  // namespace

Vector forward(const WitnessParams& params, const Vector& x) {
  check_input(params, x);
  Vector a = x;
  const std::size_t L = params.num_layers();
  for (std::size_t l = 0; l < L; ++l) {
    Vector z = params.weights[l] * a + params.biases[l];
    if (l + 1 < L) {
      Vector s1, s2;
      activate(params.activation, z, a, s1, s2);
    } else {
      a = std::move(z);
    }
  }
  return a;
}

Vector jvp(const WitnessParams& params, const Vector& x, const Vector& v) {
  check_input(params, x);
  if (v.size() != x.size()) throw std::invalid_argument("tangent and input dimensions differ");
  Tape tape;
  record(params, x, v, tape);
  return tape.tangent_out.col(0);
}

double hutchinson_divergence(const WitnessParams& params, const Vector& x,
                             const HutchinsonNoise& noise) {
  check_input(params, x);
  const Probes probes = make_probes(params.dim(), &noise, DivergenceMode::hutchinson);
  Tape tape;
  record(params, x, probes.columns, tape);
  return probes.weight * probes.columns.cwiseProduct(tape.tangent_out).sum();
}

double exact_divergence(const WitnessParams& params, const Vector& x) {
  check_input(params, x);
  Tape tape;
  const auto d = static_cast<Eigen::Index>(params.dim());
  record(params, x, Eigen::MatrixXd::Identity(d, d), tape);
  return tape.tangent_out.trace();
}

double rsd_estimate(const WitnessParams& params, const Matrix& particles, const Matrix& scores,
                    std::span<const HutchinsonNoise> noise, DivergenceMode mode) {
  return evaluate(params, particles, scores, noise, mode, false).value;
}

WitnessParams rsd_gradient(const WitnessParams& params, const Matrix& particles,
                           const Matrix& scores, std::span<const HutchinsonNoise> noise,
                           DivergenceMode mode) {
  return evaluate(params, particles, scores, noise, mode, true).gradient;
}

RsdValueAndGradient rsd_value_and_gradient(const WitnessParams& params, const Matrix& particles,
                                           const Matrix& scores,
                                           std::span<const HutchinsonNoise> noise,
                                           DivergenceMode mode) {
  return evaluate(params, particles, scores, noise, mode, true);
}

}  // namespace nvgd
