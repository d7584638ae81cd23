#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "polylab/rng.hpp"

namespace polylab {

enum class DisorderFamily { gaussian, rademacher, user };

// Disorder law through its cumulant generating function lambda(beta).
// Mean zero, unit variance is assumed throughout (lambda'(0)=0,
// lambda''(0)=1); kappa3/kappa4 are the third/fourth cumulants.
struct DisorderSpec {
  DisorderFamily family = DisorderFamily::gaussian;
  std::function<double(double)> lambda;
  double kappa3 = 0.0;
  double kappa4 = 0.0;
  bool can_sample = false;
  std::function<double(Rng&)> sample_omega;  // draws one disorder variable

  static DisorderSpec gaussian();
  static DisorderSpec rademacher();
  static DisorderSpec user(std::function<double(double)> lambda, double kappa3,
                           double kappa4);

  // sigma^2(beta) = exp(lambda(2 beta) - 2 lambda(beta)) - 1.
  double sigma2(double beta) const;
};

// Tuned inverse temperature and derived window quantities at horizon N.
struct CriticalWindow {
  long N = 0;
  double theta = 0.0;
  double beta = 0.0;
  double sigma2 = 0.0;    // sigma_N^2, equals (1 + theta/log N)/R_N exactly
  double lambda_N = 0.0;  // sigma_N^2 * R_N
  double xi3 = 0.0;       // E[xi^3] at beta_N
  double R_N = 0.0;
};

// Solves sigma^2(beta) * R_N = 1 + theta/log N for beta in (0, 1].
// Residual at the returned beta is <= 1e-12. Throws std::domain_error when
// the target variance is <= 0 and std::runtime_error when sigma^2 is not
// increasing on the bracket.
CriticalWindow solve_beta(const DisorderSpec& spec, long N, double theta,
                          double R_N);

// E[xi^3] = e^{lambda(3b)-3 lambda(b)} - 3 e^{lambda(2b)-2 lambda(b)} + 2.
double xi_third_moment(const DisorderSpec& spec, double beta);

// Stream of i.i.d. xi = e^{beta*omega - lambda(beta)} - 1.
class XiSampler {
 public:
  XiSampler(const DisorderSpec& spec, double beta, std::uint64_t seed);
  double next();

 private:
  std::function<double(Rng&)> sample_omega_;
  double beta_;
  double lambda_beta_;
  Rng rng_;
};

}  // namespace polylab
