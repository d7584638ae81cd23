#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "polylab/disorder.hpp"
#include "polylab/rng.hpp"
#include "polylab/walk_lattice.hpp"

namespace polylab {

// Law of one renewal increment (T, X): P(T=n, X=x) = q_n(x)^2 / R_N on
// n = 1..N. Marginally P(T=n) = u_n^2/R_N; given T=n the two rotated
// coordinates of X are independent draws from p_n(.)^2 / a_n.
struct RenewalIncrementLaw {
  long N = 0;
  double R_N = 0.0;
  std::vector<double> mass;  // index 1..N: u_n^2 / R_N
  std::vector<double> cdf;   // cdf[n] = P(T <= n), cdf[N] = 1

  static RenewalIncrementLaw build(const OverlapTable& overlap, long N);

  double temporal_mass(long n) const { return mass.at(static_cast<std::size_t>(n)); }
  long sample_T(Rng& rng) const;
  std::array<long, 2> sample_X_given_T(long n, Rng& rng) const;
};

struct RenewalPathPoint {
  long tau = 0;
  long x1 = 0;
  long x2 = 0;
};

// i.i.d. increments accumulated into the renewal walk (tau_k, S_k).
std::vector<RenewalPathPoint> sample_renewal_path(
    const RenewalIncrementLaw& law, int steps, Rng& rng);

// Exact law of tau_k by k-fold FFT self-convolution of the increment mass.
// Entry n holds P(tau_k = n); mass that lands beyond the horizon is dropped,
// so the vector sums to P(tau_k <= N).
std::vector<double> renewal_time_distribution(const RenewalIncrementLaw& law,
                                              int k);

enum class RenewalMethod { direct, fft };

// Weighted renewal functions U_N(n) and (optionally) U_N(n, x).
// U_time[0] = 1 encodes the delta at the origin; spatial layers are stored
// in the rotated packing of WalkKernelTable.
struct RenewalTable {
  long N = 0;
  double theta = 0.0;
  double sigma2 = 0.0;
  double lambda_N = 0.0;
  std::vector<double> U_time;

  int N_sp = 0;  // spatial horizon; 0 when only the temporal part is built
  std::vector<std::vector<double>> U_xy;
  double spatial_mass_loss = 0.0;  // bound on mass dropped by truncation

  double U(long n) const { return U_time.at(static_cast<std::size_t>(n)); }
  double U(long n, long x1, long x2) const;
  // Sum of the stored spatial layer n (marginalization cross-check).
  double spatial_marginal(long n) const;

  void export_time_csv(const std::string& path) const;
  void export_space_csv(const std::string& path, long n) const;
};

// Temporal renewal recursion U(n) = sigma^2 sum_{m=0}^{n-1} u_{n-m}^2 U(m).
// direct: O(N^2) convolution; fft: divide-and-conquer online convolution,
// same values within 1e-9 (tested). Throws when window.N != overlap size or
// lambda_N is large enough to overflow the geometric weights.
RenewalTable solve_renewal_time(const CriticalWindow& window,
                                const OverlapTable& overlap,
                                RenewalMethod method = RenewalMethod::direct);

// Adds the space-time table for n <= N_sp to `table` by separable
// convolution of squared kernel rows against the growing U(m, .) layers.
// Kernel rows are truncated where p_g(.)^2 falls below 1e-16 of its peak;
// the dropped mass is accumulated into spatial_mass_loss.
void solve_renewal_spacetime(RenewalTable& table, const CriticalWindow& window,
                             const OverlapTable& overlap, int N_sp,
                             int spatial_budget = 128);

// Truncated geometric-weight sum U(n) ~ sum_{r=1}^{r_max} lambda^r P(tau_r=n),
// the independent route to the same function.
std::vector<double> geometric_sum_truncation(const CriticalWindow& window,
                                             const OverlapTable& overlap,
                                             int r_max);

struct McEstimate {
  double value = 0.0;
  double std_err = 0.0;
  long paths = 0;
};

// Unbiased pointwise Monte Carlo for U_N(n, x) and U_N(n) at horizons where
// the dense table is out of budget. Each sampled renewal path contributes
// the exact one-jump density from every epoch below n (last-jump smoothing),
// which keeps the variance at a usable level for desk-scale sample counts.
class RenewalMcEvaluator {
 public:
  RenewalMcEvaluator(const CriticalWindow& window,
                     const RenewalIncrementLaw& law);

  McEstimate estimate_point(long n, long x1, long x2, int paths,
                            Rng& rng) const;
  McEstimate estimate_time(long n, int paths, Rng& rng) const;

 private:
  const CriticalWindow window_;
  const RenewalIncrementLaw& law_;
  std::vector<double> u_sq_;  // u_g^2 for the time-marginal kernel
};

}  // namespace polylab
