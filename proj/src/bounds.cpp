#include "hierfl/bounds.hpp"

#include <cmath>
#include <string>

#include "hierfl/errors.hpp"

namespace hierfl {

namespace {

// (1 + a)^x - 1 - a x. Summed as the binomial tail sum_{j>=2} C(x, j) a^j
// when that is short, so small a does not cancel catastrophically.
double growth_excess(long x, double a) {
  const double xs = static_cast<double>(x);
  if (x < 2) return 0.0;
  if (xs * a > 30.0) return std::expm1(xs * std::log1p(a)) - a * xs;
  double term = xs * a;  // C(x, 1) a
  double sum = 0.0;
  for (long j = 2; j <= x; ++j) {
    term *= a * static_cast<double>(x - j + 1) / static_cast<double>(j);
    sum += term;
    if (term <= sum * 1e-18) break;
  }
  return sum;
}

}  // namespace

double h(long x, double div, double eta, double beta, HForm form) {
  if (x < 0) throw DomainError("h: x must be nonnegative");
  if (!(beta > 0.0)) throw DomainError("h: beta must be positive");
  const double xs = static_cast<double>(x);
  if (form == HForm::as_printed) {
    return (div / beta) * std::expm1(xs * std::log1p(eta * beta)) - eta * beta * xs;
  }
  return (div / beta) * growth_excess(x, eta * beta);
}

long p_index(long k, long kappa1, long kappa2, long q) {
  if (kappa1 <= 0 || kappa2 <= 0 || q <= 0) throw DomainError("p_index: kappas and q must be positive");
  const long start = (q - 1) * kappa1 * kappa2;
  if (k <= start || k > q * kappa1 * kappa2) {
    throw DomainError("p_index: k=" + std::to_string(k) + " outside cloud interval " + std::to_string(q));
  }
  // ceil(k/k1 - (q-1) k2) = ceil((k - (q-1) k1 k2) / k1) in integers
  return (k - start + kappa1 - 1) / kappa1;
}

void BoundParams::validate() const {
  if (!(beta > 0.0)) throw DomainError("bounds: beta must be positive");
  if (!(eta > 0.0)) throw DomainError("bounds: eta must be positive");
  if (!(rho >= 0.0)) throw DomainError("bounds: rho must be nonnegative");
  if (!(delta >= 0.0) || !(Delta >= 0.0)) throw DomainError("bounds: divergences must be nonnegative");
  if (kappa1 <= 0 || kappa2 <= 0) throw DomainError("bounds: kappas must be positive");
  if (K <= 0 || K % (kappa1 * kappa2) != 0) {
    throw DomainError("bounds: K must be a positive multiple of kappa1*kappa2");
  }
}

double g_c(long k, long q, const BoundParams& p) {
  const long pk = p_index(k, p.kappa1, p.kappa2, q);
  const long since_cloud = k - (q - 1) * p.kappa1 * p.kappa2;
  const long since_edge = k - ((q - 1) * p.kappa2 + pk - 1) * p.kappa1;
  const double edge_terms = 0.5 * static_cast<double>(p.kappa1) *
                            static_cast<double>(pk * pk + pk - 2) *
                            h(p.kappa1, p.delta, p.eta, p.beta, p.h_form);
  return h(since_cloud, p.Delta, p.eta, p.beta, p.h_form) +
         h(since_edge, p.delta, p.eta, p.beta, p.h_form) + edge_terms;
}

double g_c_end(const BoundParams& p) {
  const double k2 = static_cast<double>(p.kappa2);
  return h(p.kappa1 * p.kappa2, p.Delta, p.eta, p.beta, p.h_form) +
         0.5 * (k2 * k2 + k2 - 1.0) * (static_cast<double>(p.kappa1) + 1.0) *
             h(p.kappa1, p.delta, p.eta, p.beta, p.h_form);
}

double g_nc(const BoundParams& p) {
  if (p.kappa1 <= 0 || p.kappa2 <= 0) throw DomainError("g_nc: kappas must be positive");
  if (!(p.eta * p.beta > 0.0)) throw DomainError("g_nc: eta*beta must be positive");
  const double r = 1.0 + p.eta * p.beta;
  const long period = p.kappa1 * p.kappa2;
  const double ratio = (std::pow(r, static_cast<double>(period)) - 1.0) /
                       (std::pow(r, static_cast<double>(p.kappa1)) - 1.0);
  const double h_edge = h(p.kappa1, p.delta, p.eta, p.beta, p.h_form);
  return h(period, p.Delta, p.eta, p.beta, p.h_form) +
         static_cast<double>(period) * ratio * h_edge + h_edge;
}

ConvergenceBound theorem1_bound(const BoundParams& p) {
  p.validate();
  ConvergenceBound out;
  if (p.eta > 1.0 / p.beta) {
    out.violated = "eta <= 1/beta";
    return out;
  }
  const double period = static_cast<double>(p.kappa1 * p.kappa2);
  const double factor = p.eta * p.phi() - p.rho * g_c_end(p) / (period * p.epsilon * p.epsilon);
  if (!(factor > 0.0)) {
    out.violated = "eta*phi - rho*G_c/(kappa1*kappa2*epsilon^2) > 0";
    return out;
  }
  out.feasible = true;
  out.value = 1.0 / (static_cast<double>(p.B()) * factor);
  return out;
}

ConvergenceBound theorem1_diminishing(const BoundParams& p,
                                      std::span<const IntervalTerms> intervals) {
  ConvergenceBound out;
  if (intervals.empty()) throw DomainError("theorem1_diminishing: no intervals");
  const double period = static_cast<double>(p.kappa1 * p.kappa2);
  double denom = 0.0;
  for (std::size_t q = 0; q < intervals.size(); ++q) {
    const auto& t = intervals[q];
    const BoundParams pq = p.with_eta(t.eta);
    const double term = t.eta * t.phi - p.rho * g_c_end(pq) / (period * t.epsilon * t.epsilon);
    if (!(term > 0.0)) {
      out.violated = "interval q=" + std::to_string(q + 1) + ": eta_q*phi_q - rho*G_c/(kappa1*kappa2*epsilon_q^2) > 0";
      return out;
    }
    denom += term;
  }
  out.feasible = true;
  out.value = 1.0 / denom;
  return out;
}

Theorem2Terms theorem2_rhs(const BoundParams& p, std::span<const double> interval_etas) {
  if (interval_etas.empty()) throw DomainError("theorem2_rhs: empty step-size list");
  const double period = static_cast<double>(p.kappa1 * p.kappa2);
  Theorem2Terms t;
  double sum_g = 0.0;
  double sum_g2 = 0.0;
  for (double eta : interval_etas) {
    if (!(eta > 0.0)) throw DomainError("theorem2_rhs: step sizes must be positive");
    t.sum_eta += period * eta;
    const double g = g_nc(p.with_eta(eta));
    sum_g += g;
    sum_g2 += period * g * g;
  }
  t.initial_gap = 4.0 * (p.f0 - p.f_star) / t.sum_eta;
  t.divergence = 4.0 * p.rho * sum_g / t.sum_eta;
  t.quadratic = 2.0 * p.beta * p.beta * sum_g2 / t.sum_eta;
  return t;
}

}  // namespace hierfl
