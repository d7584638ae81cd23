#include "polylab/dickman.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "polylab/walk_lattice.hpp"

namespace polylab {

double dickman_density(double s, double t) {
  if (!(s > 0.0)) throw std::domain_error("dickman_density: s must be > 0");
  if (!(t > 0.0) || !(t < 1.0))
    throw std::domain_error("dickman_density: t must lie in (0,1)");
  return std::exp(-kEulerGamma * s + std::log(s) + (s - 1.0) * std::log(t) -
                  std::lgamma(s + 1.0));
}

double dickman_density_spacetime(double s, double t, double x1, double x2) {
  return dickman_density(s, t) * heat_kernel(0.25 * t, x1, x2);
}

double dickman_mass_below_one(double s) {
  if (!(s > 0.0))
    throw std::domain_error("dickman_mass_below_one: s must be > 0");
  return std::exp(-kEulerGamma * s - std::lgamma(s + 1.0));
}

GThetaEvaluator::GThetaEvaluator(double theta, double abs_tol)
    : theta_(theta), abs_tol_(abs_tol) {
  // Beyond theta ~ 6 the integrand peak e^{exp(theta-gamma)} leaves the
  // double range; the paper's window parameter is O(1).
  if (!(std::fabs(theta) <= 6.0))
    throw std::domain_error("GThetaEvaluator: |theta| must be <= 6");
  if (!(abs_tol > 0.0))
    throw std::domain_error("GThetaEvaluator: abs_tol must be > 0");
}

double GThetaEvaluator::s_cutoff(double w) const {
  // Gamma(s+1) decay dominates e^{(theta-gamma)s} past s = e^{theta-gamma};
  // the w^{s-1} factor needs resolution out to s ~ log(1/w).
  return std::max({60.0, 4.0 * std::exp(theta_ - kEulerGamma),
                   10.0 * std::log(1.0 / w) + 20.0});
}

QuadResult GThetaEvaluator::eval(double w) const {
  if (!(w > 0.0) || !(w <= 1.0))
    throw std::domain_error("GThetaEvaluator: w must lie in (0,1]");
  const double logw = std::log(w);
  const double c = theta_ - kEulerGamma;
  // u = log s; integrand (ds = s du) is exp(cs + 2u + (s-1)logw - lgamma(s+1))
  auto h = [&](double u) {
    double s = std::exp(u);
    return std::exp(c * s + 2.0 * u + (s - 1.0) * logw -
                    std::lgamma(s + 1.0));
  };
  return integrate(h, -40.0, std::log(s_cutoff(w)), abs_tol_, 1e-12, 8000);
}

double GThetaEvaluator::spacetime(double w, double x1, double x2) const {
  return eval(w).value * heat_kernel(0.25 * w, x1, x2);
}

double GThetaEvaluator::integral_0_to(double w) const {
  if (!(w > 0.0) || !(w <= 1.0))
    throw std::domain_error("integral_0_to: w must lie in (0,1]");
  const double logw = std::log(w);
  const double c = theta_ - kEulerGamma;
  // Same u = log s substitution as eval(): for small w the mass sits in a
  // peak of width ~1/log(1/w) near s = 0, which a linear-axis adaptive pass
  // can step over without noticing.
  auto h = [&](double u) {
    double s = std::exp(u);
    return std::exp(c * s + u + s * logw - std::lgamma(s + 1.0));
  };
  return integrate(h, -40.0, std::log(s_cutoff(w)), abs_tol_, 1e-12, 8000)
      .value;
}

double g_theta_hat(double c_theta, double t) {
  if (!(t > 0.0) || !(t <= 1.0))
    throw std::domain_error("g_theta_hat: t must lie in (0,1]");
  double l = std::log(std::exp(2.0) / t);
  return c_theta / (t * l * l);
}

GThetaInterp::GThetaInterp(double theta, int nodes, double t_min,
                           double abs_tol)
    : theta_(theta), t_min_(t_min) {
  if (nodes < 8) throw std::domain_error("GThetaInterp: need >= 8 nodes");
  if (!(t_min > 0.0) || !(t_min < 0.5))
    throw std::domain_error("GThetaInterp: t_min outside (0, 0.5)");
  GThetaEvaluator G(theta, abs_tol);
  lo_ = std::log(t_min);
  step_ = -lo_ / static_cast<double>(nodes - 1);
  logg_.resize(static_cast<std::size_t>(nodes));
  logg_slope_.resize(static_cast<std::size_t>(nodes));
  gint_.resize(static_cast<std::size_t>(nodes));
  for (int i = 0; i < nodes; ++i) {
    double t = std::exp(lo_ + step_ * i);
    if (i == nodes - 1) t = 1.0;
    logg_[static_cast<std::size_t>(i)] = std::log(G(t));
    gint_[static_cast<std::size_t>(i)] = G.integral_0_to(t);
  }
  for (int i = 0; i < nodes; ++i) {
    std::size_t iu = static_cast<std::size_t>(i);
    if (i == 0)
      logg_slope_[iu] =
          (-3.0 * logg_[iu] + 4.0 * logg_[iu + 1] - logg_[iu + 2]) /
          (2.0 * step_);
    else if (i == nodes - 1)
      logg_slope_[iu] =
          (3.0 * logg_[iu] - 4.0 * logg_[iu - 1] + logg_[iu - 2]) /
          (2.0 * step_);
    else
      logg_slope_[iu] = (logg_[iu + 1] - logg_[iu - 1]) / (2.0 * step_);
  }
}

namespace {

// Cubic Hermite basis on a unit cell given endpoint values and slopes.
inline double hermite(double y0, double y1, double d0, double d1, double s) {
  double s2 = s * s, s3 = s2 * s;
  return y0 * (2.0 * s3 - 3.0 * s2 + 1.0) + y1 * (3.0 * s2 - 2.0 * s3) +
         d0 * (s3 - 2.0 * s2 + s) + d1 * (s3 - s2);
}

}  // namespace

double GThetaInterp::operator()(double t) const {
  if (!(t > 0.0) || !(t <= 1.0))
    throw std::domain_error("GThetaInterp: t must lie in (0,1]");
  if (t < t_min_) {
    double L = std::log(1.0 / t);
    return (1.0 + 2.0 * theta_ / L) / (t * L * L);
  }
  double u = (std::log(t) - lo_) / step_;
  std::size_t n = logg_.size();
  std::size_t i = static_cast<std::size_t>(u);
  if (i >= n - 1) i = n - 2;
  double s = u - static_cast<double>(i);
  double y = hermite(logg_[i], logg_[i + 1], logg_slope_[i] * step_,
                     logg_slope_[i + 1] * step_, s);
  return std::exp(y);
}

double GThetaInterp::integral_0_to(double t) const {
  if (!(t > 0.0) || !(t <= 1.0))
    throw std::domain_error("GThetaInterp: t must lie in (0,1]");
  if (t < t_min_) {
    double L = std::log(1.0 / t);
    return (1.0 + theta_ / L) / L;
  }
  double u = (std::log(t) - lo_) / step_;
  std::size_t n = gint_.size();
  std::size_t i = static_cast<std::size_t>(u);
  if (i >= n - 1) i = n - 2;
  double s = u - static_cast<double>(i);
  // Exact nodal derivatives: d/du int_0^{e^u} G = e^u G(e^u).
  double t0 = std::exp(lo_ + step_ * static_cast<double>(i));
  double t1 = std::exp(lo_ + step_ * static_cast<double>(i + 1));
  double d0 = t0 * std::exp(logg_[i]) * step_;
  double d1 = t1 * std::exp(logg_[i + 1]) * step_;
  return hermite(gint_[i], gint_[i + 1], d0, d1, s);
}

namespace {
std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g(static_cast<std::size_t>(n));
  double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < n; ++i)
    g[static_cast<std::size_t>(i)] =
        std::exp(llo + (lhi - llo) * static_cast<double>(i) /
                           static_cast<double>(n - 1));
  return g;
}
}  // namespace

GThetaBound g_theta_bound(double theta) {
  GThetaEvaluator G(theta);
  GThetaBound out;
  out.theta = theta;
  double best = 0.0;
  for (double t : log_grid(1e-10, 1.0, 400)) {
    double l = std::log(std::exp(2.0) / t);
    best = std::max(best, G(t) * t * l * l);
  }
  out.grid_max = best;
  out.c_theta = 1.05 * best;
  out.certified = true;
  for (double t : log_grid(1e-10, 1.0, 4000)) {
    if (G(t) > g_theta_hat(out.c_theta, t)) {
      out.certified = false;
      break;
    }
  }
  return out;
}

std::pair<double, double> euler_gamma_self_audit() {
  // -int_0^infty e^{-u} log u du, split at 1 with u = e^v on the left.
  auto left = integrate(
      [](double v) {
        double u = std::exp(v);
        return std::exp(-u) * v * u;
      },
      -45.0, 0.0, 1e-13, 1e-14, 8000);
  auto right = integrate_to_inf(
      [](double u) { return std::exp(-u) * std::log(u); }, 1.0, 1e-13, 1e-14,
      8000);
  double a = -(left.value + right.value);

  // int_0^infty (1/(t(t+1)) - e^{-t}/t) dt; the integrand extends
  // continuously by t/2 at 0.
  auto mid = integrate_to_inf(
      [](double t) {
        if (t < 1e-6) return 0.5 * t - 5.0 * t * t / 6.0;
        return (1.0 / (1.0 + t) - std::exp(-t)) / t;
      },
      0.0, 1e-13, 1e-14, 8000);
  return {a, mid.value};
}

}  // namespace polylab
