#pragma once

#include <utility>
#include <vector>

#include "polylab/quadrature.hpp"

namespace polylab {

// Density of the Dickman subordinator Y at time s, valid on t in (0,1):
// f_s(t) = e^{-gamma s} s t^{s-1} / Gamma(s+1). Throws outside the domain.
double dickman_density(double s, double t);

// Space-time version f_s(t, x) = f_s(t) * g_{t/4}(x).
double dickman_density_spacetime(double s, double t, double x1, double x2);

// P(Y_s <= 1) = e^{-gamma s} / Gamma(s+1), the closed form of the integral
// of f_s over (0,1).
double dickman_mass_below_one(double s);

// G_theta(w) = int_0^infty e^{theta s} f_s(w) ds on w in (0,1]. The weight
// e^{(theta-gamma)s} s w^{s-1} / Gamma(s+1) is integrated in the variable
// u = log s so the small-w concentration near s = 0 stays resolved.
class GThetaEvaluator {
 public:
  explicit GThetaEvaluator(double theta, double abs_tol = 1e-9);

  double theta() const { return theta_; }
  double abs_tol() const { return abs_tol_; }

  double operator()(double w) const { return eval(w).value; }
  QuadResult eval(double w) const;

  // G_theta(w, x) = G_theta(w) * g_{w/4}(x).
  double spacetime(double w, double x1, double x2) const;

  // int_0^w G_theta(t) dt = int_0^infty e^{(theta-gamma)s} w^s / Gamma(s+1) ds.
  double integral_0_to(double w) const;

  // int_0^1 G_theta(t) dt, the constant the variance of log-scale averages
  // converges to.
  double intermittency_constant() const { return integral_0_to(1.0); }

 private:
  double s_cutoff(double w) const;
  double theta_;
  double abs_tol_;
};

// Cubic-Hermite interpolant of G_theta and its primitive on a log grid over
// [t_min, 1], for callers that need ~1e5+ evaluations (Monte Carlo weights,
// nested kernel quadratures). Below t_min the saddle-point expansion
// G_theta(t) = (1 + 2 theta / L) / (t L^2), L = log(1/t), takes over
// (relative error O(1/L^2) there). The primitive uses the exact derivative
// d/du Gint(e^u) = e^u G(e^u) at the nodes, so both interpolants are
// O(step^4) accurate; with the default node count that is ~1e-10 relative.
class GThetaInterp {
 public:
  explicit GThetaInterp(double theta, int nodes = 1600, double t_min = 1e-12,
                        double abs_tol = 1e-10);

  double theta() const { return theta_; }
  double t_min() const { return t_min_; }

  double operator()(double t) const;     // G_theta(t), t in (0, 1]
  double integral_0_to(double t) const;  // int_0^t G_theta

 private:
  double theta_ = 0.0;
  double t_min_ = 0.0;
  double lo_ = 0.0;    // log t_min
  double step_ = 0.0;  // grid step in u = log t
  std::vector<double> logg_;        // log G at the nodes
  std::vector<double> logg_slope_;  // d(log G)/du, centered differences
  std::vector<double> gint_;        // primitive at the nodes
};

// Certified constant for the envelope hat-G_theta(t) = c_theta /
// (t (log(e^2/t))^2): grid maximum of G_theta(t) t (log(e^2/t))^2 over a log
// grid on [1e-10, 1] times a 1.05 safety factor, re-verified on a 10x denser
// grid.
struct GThetaBound {
  double theta = 0.0;
  double c_theta = 0.0;
  double grid_max = 0.0;  // before the safety factor
  bool certified = false;
};

GThetaBound g_theta_bound(double theta);

// The envelope itself.
double g_theta_hat(double c_theta, double t);

// Two independent quadrature representations of the Euler constant,
// returned for the startup self-audit against kEulerGamma.
std::pair<double, double> euler_gamma_self_audit();

}  // namespace polylab
