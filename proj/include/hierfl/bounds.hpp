#pragma once

#include <span>
#include <string>
#include <vector>

namespace hierfl {

/// Which final term h uses. The printed form subtracts eta*beta*x, which makes
/// h(x, 0, eta) negative; the corrected form subtracts eta*div*x, so h is
/// zero for zero divergence and for x = 1, and linear in div.
enum class HForm { corrected, as_printed };

/// Deviation growth after x local steps with divergence `div`:
///   (div/beta) * ((eta*beta + 1)^x - 1) - eta*div*x
double h(long x, double div, double eta, double beta, HForm form = HForm::corrected);

/// Edge-interval index of update k inside cloud interval q:
/// ceil(k/kappa1 - (q-1)*kappa2), in [1, kappa2].
long p_index(long k, long kappa1, long kappa2, long q);

struct BoundParams {
  double beta = 1.0;
  double rho = 1.0;
  double delta = 0.0;  // client-edge divergence
  double Delta = 0.0;  // edge-cloud divergence
  double eta = 0.01;
  long kappa1 = 1;
  long kappa2 = 1;
  long K = 1;
  double epsilon = 1.0;
  double omega = 1.0;
  double f_star = 0.0;  // F(w*)
  double f0 = 0.0;      // F(w0)
  HForm h_form = HForm::corrected;

  long B() const { return K / (kappa1 * kappa2); }
  /// omega * (1 - beta*eta/2)
  double phi() const { return omega * (1.0 - beta * eta / 2.0); }
  BoundParams with_eta(double e) const {
    BoundParams p = *this;
    p.eta = e;
    return p;
  }
  /// Throws DomainError on nonpositive beta/eta/kappas, negative divergences
  /// or K not a multiple of kappa1*kappa2.
  void validate() const;
};

/// Convex deviation bound ||w(k) - u_q(k)|| <= G_c(k) for k in cloud interval q.
double g_c(long k, long q, const BoundParams& p);

/// Interval-end closed form
///   h(k1 k2, Delta) + (k2^2 + k2 - 1)(k1 + 1)/2 * h(k1, delta).
/// Bounds g_c over the whole interval. Note that it is not equal to
/// g_c(q*k1*k2) unless k1 = k2 = 1: the difference is
/// (k1 + k2^2 + k2 - 3)/2 * h(k1, delta) >= 0.
double g_c_end(const BoundParams& p);

/// Non-convex deviation bound over a cloud interval.
double g_nc(const BoundParams& p);

/// Outcome of a convergence bound whose validity conditions may fail.
struct ConvergenceBound {
  bool feasible = false;
  double value = 0.0;       // F(w(K)) - F(w*) bound, when feasible
  std::string violated;     // which condition failed, otherwise
};

/// Fixed-step convex bound 1 / (B * (eta*phi - rho*G_c_end / (k1 k2 eps^2))).
ConvergenceBound theorem1_bound(const BoundParams& p);

struct IntervalTerms {
  double eta = 0.0;
  double phi = 0.0;
  double epsilon = 0.0;
};

/// Diminishing-step convex bound 1 / Sum_q (eta_q phi_q - rho G_c_end(eta_q) / (k1 k2 eps_q^2)).
/// Uses `p` for beta, rho, divergences and kappas; B = intervals.size().
ConvergenceBound theorem1_diminishing(const BoundParams& p, std::span<const IntervalTerms> intervals);

struct Theorem2Terms {
  double sum_eta = 0.0;  // Sum_{k=1..K} eta_q = k1 k2 Sum_q eta_q
  double initial_gap = 0.0;
  double divergence = 0.0;
  double quadratic = 0.0;
  double total() const { return initial_gap + divergence + quadratic; }
};

/// Non-convex bound on Sum_k eta_q ||grad F(w(k))||^2 / Sum_k eta_q:
///   4(F(w0) - F*)/S + 4 rho Sum_q G_nc(eta_q)/S + 2 beta^2 Sum_q k1 k2 G_nc(eta_q)^2 / S.
Theorem2Terms theorem2_rhs(const BoundParams& p, std::span<const double> interval_etas);

}  // namespace hierfl
