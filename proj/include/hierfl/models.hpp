#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "hierfl/datasets.hpp"
#include "hierfl/numcore.hpp"

namespace hierfl {

enum class ModelKind { logistic_regression, mlp };

ModelKind parse_model_kind(std::string_view name);
std::string_view to_string(ModelKind kind);

/// Multinomial logistic regression (convex) or a one-hidden-layer tanh MLP
/// (non-convex), both trained with softmax cross-entropy plus an L2 penalty
/// (l2_reg/2)||w||^2 on every parameter.
///
/// Parameter layout, row-major:
///   logistic_regression: W[C x d], b[C]
///   mlp:                 W1[H x d], b1[H], W2[C x H], b2[C]
struct ModelSpec {
  ModelKind kind = ModelKind::logistic_regression;
  std::size_t input_dim = 0;
  int num_classes = 0;
  std::size_t hidden_dim = 0;  // mlp only
  double l2_reg = 0.0;

  std::size_t param_dim() const;
  void validate() const;
};

/// Common starting point w0: zeros for logistic regression, N(0, 0.01^2) for
/// the MLP (zeros would leave the hidden layer symmetric).
WeightVector initial_weights(const ModelSpec& spec, std::uint64_t seed);

/// Mean cross-entropy over the rows `batch` of `data`, plus the L2 term.
double loss(const ModelSpec& spec, const WeightVector& w, const Dataset& data,
            std::span<const std::size_t> batch);
double loss(const ModelSpec& spec, const WeightVector& w, const Dataset& data);

/// Exact gradient of `loss`.
WeightVector gradient(const ModelSpec& spec, const WeightVector& w, const Dataset& data,
                      std::span<const std::size_t> batch);
WeightVector gradient(const ModelSpec& spec, const WeightVector& w, const Dataset& data);

/// Top-1 class, ties broken toward the lowest class index.
int predict(const ModelSpec& spec, const WeightVector& w, std::span<const double> x);

/// Fraction of rows of `data` whose label equals `predict`.
double accuracy(const ModelSpec& spec, const WeightVector& w, const Dataset& data);

struct SmoothnessParams {
  double rho = 0.0;   // Lipschitz constant of F
  double beta = 0.0;  // Lipschitz constant of grad F
};

/// A differentiable scalar function; lets smoothness estimation run on
/// anything, not only the built-in models.
struct Objective {
  std::function<double(const WeightVector&)> value;
  std::function<WeightVector(const WeightVector&)> gradient;
};

Objective full_batch_objective(const ModelSpec& spec, const Dataset& data,
                               std::span<const std::size_t> indices);

/// Max over all probe pairs of the gradient and value difference quotients.
/// These are lower bounds on the true beta and rho.
SmoothnessParams estimate_smoothness(const Objective& f, std::span<const WeightVector> probes);

/// Probe points are center + s * N(0, I) with s alternating 0.1 and 1.0,
/// drawn from one stream so a larger `probes` extends the same sequence.
std::vector<WeightVector> random_probes(const WeightVector& center, int probes, std::uint64_t seed);

/// Smoothness of the full-batch loss of `spec` on `data`, probed around
/// initial_weights(spec, seed).
SmoothnessParams estimate_smoothness(const ModelSpec& spec, const Dataset& data, int probes,
                                     std::uint64_t seed);

/// Analytic beta bound for logistic_regression on features in [0,1]^d:
/// the softmax Hessian block has spectral norm <= 1/2 and the bias-augmented
/// input has squared norm <= d + 1, so beta <= (d + 1)/2 + l2_reg.
double logistic_beta_upper_bound(const ModelSpec& spec);

}  // namespace hierfl
