#include "polylab/disorder.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace polylab {

DisorderSpec DisorderSpec::gaussian() {
  DisorderSpec s;
  s.family = DisorderFamily::gaussian;
  s.lambda = [](double t) { return 0.5 * t * t; };
  s.kappa3 = 0.0;
  s.kappa4 = 0.0;
  s.can_sample = true;
  s.sample_omega = [](Rng& rng) { return rng.normal(); };
  return s;
}

DisorderSpec DisorderSpec::rademacher() {
  DisorderSpec s;
  s.family = DisorderFamily::rademacher;
  s.lambda = [](double t) {
    // log cosh t, stable for large |t|.
    double a = std::fabs(t);
    return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
  };
  s.kappa3 = 0.0;
  s.kappa4 = -2.0;
  s.can_sample = true;
  s.sample_omega = [](Rng& rng) {
    return (rng.next_u64() & 1ULL) ? 1.0 : -1.0;
  };
  return s;
}

DisorderSpec DisorderSpec::user(std::function<double(double)> lambda,
                                double kappa3, double kappa4) {
  DisorderSpec s;
  s.family = DisorderFamily::user;
  s.lambda = std::move(lambda);
  s.kappa3 = kappa3;
  s.kappa4 = kappa4;
  s.can_sample = false;
  return s;
}

double DisorderSpec::sigma2(double beta) const {
  double v = lambda(2.0 * beta) - 2.0 * lambda(beta);
  if (!std::isfinite(v))
    throw std::domain_error("sigma2: lambda undefined at 2*beta");
  return std::expm1(v);
}

CriticalWindow solve_beta(const DisorderSpec& spec, long N, double theta,
                          double R_N) {
  if (N < 2) throw std::domain_error("solve_beta: N must be >= 2");
  if (!(R_N > 0.0)) throw std::domain_error("solve_beta: R_N must be positive");
  const double logN = std::log(static_cast<double>(N));
  const double target = (1.0 + theta / logN) / R_N;
  if (!(target > 0.0))
    throw std::domain_error("solve_beta: target variance is not positive");

  // The bracket (0, 2] must see sigma^2 strictly increasing. Small horizons
  // need beta above 1 (the target variance grows like 1/R_N).
  double lo = 0.0, hi = 2.0;
  double prev = 0.0;
  for (int i = 1; i <= 32; ++i) {
    double v = spec.sigma2(hi * static_cast<double>(i) / 32.0);
    if (!(v > prev))
      throw std::runtime_error("solve_beta: sigma^2 not increasing on (0,2]");
    prev = v;
  }
  if (spec.sigma2(hi) < target)
    throw std::domain_error(
        "solve_beta: target variance unreachable below beta = 2");

  // Bisection; 100 halvings take the bracket below 1e-30, after which the
  // residual is limited only by roundoff of sigma2().
  for (int it = 0; it < 100; ++it) {
    double mid = 0.5 * (lo + hi);
    if (spec.sigma2(mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  double beta = 0.5 * (lo + hi);

  CriticalWindow w;
  w.N = N;
  w.theta = theta;
  w.beta = beta;
  w.sigma2 = spec.sigma2(beta);
  w.lambda_N = w.sigma2 * R_N;
  w.xi3 = xi_third_moment(spec, beta);
  w.R_N = R_N;
  double residual = std::fabs(w.lambda_N - 1.0 - theta / logN);
  if (residual > 1e-12)
    throw std::runtime_error("solve_beta: residual above tolerance");
  return w;
}

double xi_third_moment(const DisorderSpec& spec, double beta) {
  double a = spec.lambda(3.0 * beta) - 3.0 * spec.lambda(beta);
  double b = spec.lambda(2.0 * beta) - 2.0 * spec.lambda(beta);
  if (!std::isfinite(a) || !std::isfinite(b))
    throw std::domain_error("xi_third_moment: lambda undefined at 3*beta");
  return std::expm1(a) - 3.0 * std::expm1(b);
}

XiSampler::XiSampler(const DisorderSpec& spec, double beta, std::uint64_t seed)
    : beta_(beta), lambda_beta_(spec.lambda(beta)), rng_(seed) {
  if (!spec.can_sample)
    throw std::runtime_error("XiSampler: family does not support sampling");
  sample_omega_ = spec.sample_omega;
}

double XiSampler::next() {
  double omega = sample_omega_(rng_);
  return std::expm1(beta_ * omega - lambda_beta_);
}

}  // namespace polylab
