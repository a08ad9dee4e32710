#include "hierfl/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hierfl/errors.hpp"
#include "hierfl/rng.hpp"

namespace hierfl {

ModelKind parse_model_kind(std::string_view name) {
  if (name == "logistic_regression") return ModelKind::logistic_regression;
  if (name == "mlp") return ModelKind::mlp;
  throw ConfigError("unknown model kind '" + std::string(name) +
                    "' (expected logistic_regression or mlp)");
}

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::mlp ? "mlp" : "logistic_regression";
}

std::size_t ModelSpec::param_dim() const {
  const auto c = static_cast<std::size_t>(num_classes);
  if (kind == ModelKind::logistic_regression) return c * (input_dim + 1);
  return hidden_dim * (input_dim + 1) + c * (hidden_dim + 1);
}

void ModelSpec::validate() const {
  if (input_dim == 0) throw ConfigError("model: input_dim must be positive");
  if (num_classes < 2) throw ConfigError("model: num_classes must be at least 2");
  if (kind == ModelKind::mlp && hidden_dim == 0) {
    throw ConfigError("model: mlp needs hidden_dim > 0");
  }
  if (!(l2_reg >= 0.0) || !std::isfinite(l2_reg)) {
    throw ConfigError("model: l2_reg must be finite and nonnegative");
  }
}

WeightVector initial_weights(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (spec.kind == ModelKind::logistic_regression) return WeightVector::zeros(spec.param_dim());
  Rng rng{seed, 0x1417};
  std::vector<double> w(spec.param_dim());
  for (double& x : w) x = 0.01 * rng.normal();
  return WeightVector(std::move(w));
}

namespace {

// Scratch buffers for one forward/backward pass, reused across samples.
struct Workspace {
  std::vector<double> hidden;  // tanh activations (mlp)
  std::vector<double> logits;
  std::vector<double> dhidden;
};

void check_inputs(const ModelSpec& spec, const WeightVector& w, const Dataset& data,
                  std::span<const std::size_t> batch) {
  if (w.dim() != spec.param_dim()) {
    throw StructuralError("model: weight dim " + std::to_string(w.dim()) +
                          " does not match parameter dim " + std::to_string(spec.param_dim()));
  }
  if (data.dim != spec.input_dim) {
    throw StructuralError("model: dataset feature dim " + std::to_string(data.dim) +
                          " does not match input_dim " + std::to_string(spec.input_dim));
  }
  if (data.num_classes > spec.num_classes) {
    throw StructuralError("model: dataset has more classes than the model");
  }
  if (batch.empty()) throw DomainError("model: empty batch");
}

// Fills ws.logits (and ws.hidden for the mlp) for input x.
void forward(const ModelSpec& spec, std::span<const double> w, std::span<const double> x,
             Workspace& ws) {
  const std::size_t d = spec.input_dim;
  const auto c = static_cast<std::size_t>(spec.num_classes);
  ws.logits.assign(c, 0.0);
  if (spec.kind == ModelKind::logistic_regression) {
    const double* bias = w.data() + c * d;
    for (std::size_t k = 0; k < c; ++k) {
      const double* row = w.data() + k * d;
      double z = bias[k];
      for (std::size_t j = 0; j < d; ++j) z += row[j] * x[j];
      ws.logits[k] = z;
    }
    return;
  }
  const std::size_t h = spec.hidden_dim;
  const double* w1 = w.data();
  const double* b1 = w1 + h * d;
  const double* w2 = b1 + h;
  const double* b2 = w2 + c * h;
  ws.hidden.assign(h, 0.0);
  for (std::size_t u = 0; u < h; ++u) {
    double a = b1[u];
    const double* row = w1 + u * d;
    for (std::size_t j = 0; j < d; ++j) a += row[j] * x[j];
    ws.hidden[u] = std::tanh(a);
  }
  for (std::size_t k = 0; k < c; ++k) {
    double z = b2[k];
    const double* row = w2 + k * h;
    for (std::size_t u = 0; u < h; ++u) z += row[u] * ws.hidden[u];
    ws.logits[k] = z;
  }
}

// Converts ws.logits into probabilities in place; returns log-sum-exp.
double softmax_inplace(std::vector<double>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double& z : logits) {
    z = std::exp(z - m);
    s += z;
  }
  for (double& z : logits) z /= s;
  return m + std::log(s);
}

double cross_entropy(Workspace& ws, int label) {
  const double z_y = ws.logits[static_cast<std::size_t>(label)];
  return softmax_inplace(ws.logits) - z_y;
}

double l2_term(const ModelSpec& spec, const WeightVector& w) {
  return spec.l2_reg == 0.0 ? 0.0 : 0.5 * spec.l2_reg * squared_norm(w);
}

}  // namespace

double loss(const ModelSpec& spec, const WeightVector& w, const Dataset& data,
            std::span<const std::size_t> batch) {
  check_inputs(spec, w, data, batch);
  Workspace ws;
  double total = 0.0;
  for (std::size_t idx : batch) {
    forward(spec, w.values(), data.row(idx), ws);
    total += cross_entropy(ws, data.labels[idx]);
  }
  return total / static_cast<double>(batch.size()) + l2_term(spec, w);
}

double loss(const ModelSpec& spec, const WeightVector& w, const Dataset& data) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return loss(spec, w, data, all);
}

WeightVector gradient(const ModelSpec& spec, const WeightVector& w, const Dataset& data,
                      std::span<const std::size_t> batch) {
  check_inputs(spec, w, data, batch);
  const std::size_t d = spec.input_dim;
  const auto c = static_cast<std::size_t>(spec.num_classes);
  const auto params = w.values();
  std::vector<double> g(params.size(), 0.0);
  Workspace ws;

  for (std::size_t idx : batch) {
    const auto x = data.row(idx);
    const auto y = static_cast<std::size_t>(data.labels[idx]);
    forward(spec, params, x, ws);
    softmax_inplace(ws.logits);
    ws.logits[y] -= 1.0;  // dL/dz = p - onehot(y)
    const auto& dz = ws.logits;

    if (spec.kind == ModelKind::logistic_regression) {
      double* gb = g.data() + c * d;
      for (std::size_t k = 0; k < c; ++k) {
        double* row = g.data() + k * d;
        for (std::size_t j = 0; j < d; ++j) row[j] += dz[k] * x[j];
        gb[k] += dz[k];
      }
      continue;
    }

    const std::size_t h = spec.hidden_dim;
    const double* w2 = params.data() + h * (d + 1);
    double* gw1 = g.data();
    double* gb1 = gw1 + h * d;
    double* gw2 = gb1 + h;
    double* gb2 = gw2 + c * h;
    ws.dhidden.assign(h, 0.0);
    for (std::size_t k = 0; k < c; ++k) {
      double* row = gw2 + k * h;
      const double* wrow = w2 + k * h;
      for (std::size_t u = 0; u < h; ++u) {
        row[u] += dz[k] * ws.hidden[u];
        ws.dhidden[u] += wrow[u] * dz[k];
      }
      gb2[k] += dz[k];
    }
    for (std::size_t u = 0; u < h; ++u) {
      const double da = ws.dhidden[u] * (1.0 - ws.hidden[u] * ws.hidden[u]);
      double* row = gw1 + u * d;
      for (std::size_t j = 0; j < d; ++j) row[j] += da * x[j];
      gb1[u] += da;
    }
  }

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = g[j] * inv_n + spec.l2_reg * params[j];
  return WeightVector(std::move(g));
}

WeightVector gradient(const ModelSpec& spec, const WeightVector& w, const Dataset& data) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return gradient(spec, w, data, all);
}

int predict(const ModelSpec& spec, const WeightVector& w, std::span<const double> x) {
  if (w.dim() != spec.param_dim() || x.size() != spec.input_dim) {
    throw StructuralError("predict: shape mismatch");
  }
  Workspace ws;
  forward(spec, w.values(), x, ws);
  return static_cast<int>(std::max_element(ws.logits.begin(), ws.logits.end()) -
                          ws.logits.begin());
}

double accuracy(const ModelSpec& spec, const WeightVector& w, const Dataset& data) {
  if (data.size() == 0) throw DomainError("accuracy: empty dataset");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (predict(spec, w, data.row(i)) == data.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

Objective full_batch_objective(const ModelSpec& spec, const Dataset& data,
                               std::span<const std::size_t> indices) {
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return Objective{
      [spec, &data, idx](const WeightVector& w) { return loss(spec, w, data, idx); },
      [spec, &data, idx](const WeightVector& w) { return gradient(spec, w, data, idx); },
  };
}

SmoothnessParams estimate_smoothness(const Objective& f, std::span<const WeightVector> probes) {
  if (probes.size() < 2) throw DomainError("estimate_smoothness: need at least 2 probes");
  std::vector<double> values;
  std::vector<WeightVector> grads;
  values.reserve(probes.size());
  grads.reserve(probes.size());
  for (const auto& w : probes) {
    values.push_back(f.value(w));
    grads.push_back(f.gradient(w));
  }
  SmoothnessParams out;
  for (std::size_t a = 0; a < probes.size(); ++a) {
    for (std::size_t b = a + 1; b < probes.size(); ++b) {
      const double dist = l2_distance(probes[a], probes[b]);
      if (dist == 0.0) continue;
      out.beta = std::max(out.beta, l2_distance(grads[a], grads[b]) / dist);
      out.rho = std::max(out.rho, std::abs(values[a] - values[b]) / dist);
    }
  }
  return out;
}

std::vector<WeightVector> random_probes(const WeightVector& center, int probes, std::uint64_t seed) {
  if (probes < 1) throw DomainError("random_probes: probes must be positive");
  Rng rng{seed, 0x960be};
  std::vector<WeightVector> out;
  out.reserve(static_cast<std::size_t>(probes));
  for (int p = 0; p < probes; ++p) {
    const double scale = (p % 2 == 0) ? 0.1 : 1.0;
    std::vector<double> v(center.values().begin(), center.values().end());
    for (double& x : v) x += scale * rng.normal();
    out.emplace_back(std::move(v));
  }
  return out;
}

SmoothnessParams estimate_smoothness(const ModelSpec& spec, const Dataset& data, int probes,
                                     std::uint64_t seed) {
  if (probes < 2) throw DomainError("estimate_smoothness: probes must be at least 2");
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto points = random_probes(initial_weights(spec, seed), probes, seed);
  return estimate_smoothness(full_batch_objective(spec, data, all), points);
}

double logistic_beta_upper_bound(const ModelSpec& spec) {
  return 0.5 * (static_cast<double>(spec.input_dim) + 1.0) + spec.l2_reg;
}

}  // namespace hierfl
