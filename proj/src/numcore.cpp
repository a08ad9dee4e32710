#include "hierfl/numcore.hpp"

#include <cmath>
#include <string>

#include "hierfl/errors.hpp"

namespace hierfl {

namespace {

void require_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw DomainError("WeightVector: non-finite entry");
  }
}

void require_same_dim(const WeightVector& a, const WeightVector& b, const char* op) {
  if (a.dim() != b.dim()) {
    throw StructuralError(std::string(op) + ": dimension mismatch (" +
                          std::to_string(a.dim()) + " vs " + std::to_string(b.dim()) + ")");
  }
}

}  // namespace

WeightVector::WeightVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw StructuralError("WeightVector: dim must be positive");
  require_finite(values_);
}

WeightVector::WeightVector(std::initializer_list<double> values)
    : WeightVector(std::vector<double>(values)) {}

WeightVector WeightVector::zeros(std::size_t dim) {
  return WeightVector(std::vector<double>(dim, 0.0));
}

WeightVector weighted_average(std::span<const WeightVector> vectors,
                              std::span<const double> weights) {
  if (vectors.empty()) throw DomainError("weighted_average: no vectors");
  if (vectors.size() != weights.size()) {
    throw StructuralError("weighted_average: " + std::to_string(vectors.size()) +
                          " vectors but " + std::to_string(weights.size()) + " weights");
  }
  const std::size_t dim = vectors.front().dim();
  double total = 0.0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    require_same_dim(vectors.front(), vectors[i], "weighted_average");
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      throw DomainError("weighted_average: weights must be finite and nonnegative");
    }
    total += weights[i];
  }
  if (!(total > 0.0)) throw DomainError("weighted_average: total weight must be positive");

  const auto base = vectors.front().values();
  std::vector<double> out(base.begin(), base.end());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const double share = weights[i] / total;
    const auto v = vectors[i].values();
    for (std::size_t j = 0; j < dim; ++j) out[j] += share * (v[j] - base[j]);
  }
  return WeightVector(std::move(out));
}

WeightVector axpy(const WeightVector& w, const WeightVector& g, double eta) {
  require_same_dim(w, g, "axpy");
  if (!(eta > 0.0)) throw DomainError("axpy: eta must be positive");
  const auto a = w.values();
  const auto b = g.values();
  std::vector<double> out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = a[j] - eta * b[j];
  return WeightVector(std::move(out));
}

double l2_distance(const WeightVector& a, const WeightVector& b) {
  require_same_dim(a, b, "l2_distance");
  double s = 0.0;
  for (std::size_t j = 0; j < a.dim(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return std::sqrt(s);
}

double squared_norm(const WeightVector& v) { return dot(v, v); }

double dot(const WeightVector& a, const WeightVector& b) {
  require_same_dim(a, b, "dot");
  double s = 0.0;
  for (std::size_t j = 0; j < a.dim(); ++j) s += a[j] * b[j];
  return s;
}

}  // namespace hierfl
