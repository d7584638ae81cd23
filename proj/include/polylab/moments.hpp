#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "polylab/disorder.hpp"

namespace polylab {

// Report row shared by the oracle runners. Methods that are exact up to
// floating point carry error_estimate = 0.
struct MomentReport {
  long N = 0;
  double theta = 0.0;
  double beta = 0.0;
  double sigma2 = 0.0;
  double value = 0.0;
  std::string method;  // dp-oracle | enum-oracle | renewal-sum | mc-oracle |
                       // stretch-series | continuum-limit
  double error_estimate = 0.0;
};

// Coupling weight for the three-replica oracles. `full` applies the exact
// per-site weight including the third cumulant at triple coincidences;
// `pairwise_only` keeps only the pair terms (weight 1 + 3 sigma^2 at triple
// sites), the reference for chaos sums that drop triple matchings.
enum class TripleWeight { full, pairwise_only };

// E[Z_N^2] by exact dynamic programming over the difference walk S - S'.
// The state is the pair of rotated difference coordinates, each of which
// steps {-1,0,+1} with probabilities {1/4,1/2,1/4} independently; the
// diagonal carries weight (1 + sigma^2) at every disorder row 1..N-1.
// The window covers the full reachable range, so nothing leaks. N <= 512.
double second_moment_dp(const CriticalWindow& window);

// E[Z_N^3] by exact dynamic programming over (S - S', S' - S''). Four
// rotated difference coordinates; each lane moves by the joint law of
// ((a-a')/2, (a'-a'')/2) for independent signs a, a', a''. Per row weight
// 1 + sigma^2 (1_{D1=0} + 1_{D2=0} + 1_{D1+D2=0}) + xi3 1_{D1=D2=0}.
// N <= 24 (the state space is (2N-1)^4).
double third_moment_dp(const CriticalWindow& window,
                       TripleWeight weight = TripleWeight::full);

// Bridged variants: all replicas are pinned to a common endpoint at time N
// (summed over that endpoint), with disorder rows 1..N-1 interior. The pair
// version equals sigma^{-2} U_N(N) exactly (the pinned pair expansion is the
// space-time renewal series termwise); the triple version with
// pairwise_only weight is the triple-free part of the pinned third moment.
double second_moment_dp_bridged(const CriticalWindow& window);
double third_moment_dp_bridged(const CriticalWindow& window,
                               TripleWeight weight = TripleWeight::full);

// Exhaustive-path oracles: enumerate all 4^(N-1) walks and sum the coupled
// weights over pairs / triples of paths. N <= 6.
double second_moment_enum(const CriticalWindow& window);
double third_moment_enum(const CriticalWindow& window,
                         TripleWeight weight = TripleWeight::full);

// Monte Carlo moments of the averaged field Z(phi, psi) =
// (1/N) sum_{x,y} phi(x/sqrt(N)) Z_{0,N}(x,y) psi(y/sqrt(N)).
// Each replica samples a fresh environment on rows 1..N-1 and evaluates Z
// exactly by the transfer recursion, so the only error is across replicas.
struct FieldMcStats {
  double mean = 0.0;
  double variance = 0.0;
  double third_central = 0.0;
  double se_mean = 0.0;
  double se_variance = 0.0;
  double se_third = 0.0;
  double exact_mean = 0.0;  // disorder-free transfer on the same grid
  int replicas = 0;
};

using FieldFn = std::function<double(double, double)>;

// phi_radius is the support radius of phi in diffusive units: phi is read
// on the lattice box |x|_inf <= ceil(phi_radius sqrt(N)) and assumed zero
// outside. The transfer grid grows by one site per row, so no mass is
// truncated. replicas >= 100. N <= 256.
FieldMcStats averaged_field_mc(const DisorderSpec& disorder,
                               const CriticalWindow& window, const FieldFn& phi,
                               double phi_radius, const FieldFn& psi,
                               int replicas, std::uint64_t seed);

}  // namespace polylab
