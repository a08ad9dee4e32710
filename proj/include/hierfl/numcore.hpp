#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace hierfl {

/// Flat vector of model parameters.
///
/// Always non-empty and finite; every constructor and arithmetic helper
/// checks this, so a diverging run fails at the step that produced the first
/// non-finite value instead of silently propagating NaNs.
class WeightVector {
 public:
  explicit WeightVector(std::vector<double> values);
  WeightVector(std::initializer_list<double> values);
  static WeightVector zeros(std::size_t dim);

  std::size_t dim() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const WeightVector&, const WeightVector&) = default;

 private:
  std::vector<double> values_;
};

/// Sum_i weights[i] * vectors[i] / Sum_i weights[i].
///
/// Accumulates as v0 + Sum_i (weights[i]/W)(v_i - v0) in index order. The
/// reduction order is fixed so results are bit-reproducible, and averaging
/// identical vectors returns that vector exactly.
WeightVector weighted_average(std::span<const WeightVector> vectors,
                              std::span<const double> weights);

/// w - eta * g
WeightVector axpy(const WeightVector& w, const WeightVector& g, double eta);

double l2_distance(const WeightVector& a, const WeightVector& b);
double squared_norm(const WeightVector& v);
double dot(const WeightVector& a, const WeightVector& b);

}  // namespace hierfl
