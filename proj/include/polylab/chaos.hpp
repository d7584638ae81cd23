#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "polylab/dickman.hpp"
#include "polylab/disorder.hpp"
#include "polylab/moments.hpp"

namespace polylab {

// Test function sampled on the lattice: the value at site z is
// fn(z / sqrt(N)) inside the box |z|_inf <= radius and `background`
// outside. background = 0 models compactly supported functions; a nonzero
// background with an empty or matching box models bounded ones (psi == 1).
struct TestFunctionGrid {
  long N = 0;
  long radius = -1;            // box half-width; -1 means no stored values
  double background = 0.0;
  std::vector<double> values;  // (2 radius + 1)^2 row-major in (x1, x2)
  double sup_norm = 0.0;
  double abs_sum = 0.0;        // sum of |values|; meaningful when compact

  using Fn = FieldFn;

  // Samples fn on the box |z|_inf <= ceil(support_radius * sqrt(N)).
  static TestFunctionGrid from_function(long N, double support_radius,
                                        const Fn& fn);
  static TestFunctionGrid constant(long N, double c);
  // Lattice value N at the origin: under the 1/N field normalization this
  // is the partition function started at a single point.
  static TestFunctionGrid point_mass(long N);

  double at(long x1, long x2) const;
  bool compact() const { return background == 0.0; }
  bool is_constant(double* c = nullptr) const;
  bool is_point_mass() const;
};

// q^N_{0,a}(phi, x) = sum_z phi(z) q_a(x - z), held on the reachable box.
// For constant psi the reverse pairing q^N_{b,t}(x, psi) is the constant
// itself (the kernel row sums to 1), so no field is built for that side.
struct SmoothedField {
  long N = 0;
  long a = 0;
  long radius = 0;  // grid radius + a
  std::vector<double> values;

  static SmoothedField forward(const TestFunctionGrid& grid, long a);
  void step();  // advance a -> a + 1 by one transfer pass
  double at(long x1, long x2) const;
};

// Both terms of the exact variance of the averaged field Z(phi) at lattice
// horizon T = round(N t): (sigma^2/N^2) sum_{m=1}^{T-1} S(m) (1 + sum_{v=1}
// ^{T-1-m} U_N(v)) with S(m) = sum_x q^N_{0,m}(phi,x)^2. S(m) is evaluated
// through the autocorrelation of phi contracted against the two-step kernel
// diagonal, which keeps large horizons exact at O(T sqrt(T)) per row.
struct VarianceBreakdown {
  long N = 0;
  long T = 0;
  double mean = 0.0;         // E[Z(phi)] = (1/N) sum_z phi(z)
  double term_single = 0.0;  // coincidence at one row only
  double term_renewal = 0.0; // renewal-weighted remainder
  double value = 0.0;        // term_single + term_renewal
};

VarianceBreakdown variance_exact(const CriticalWindow& window,
                                 const TestFunctionGrid& phi, double t);

// Per-depth stretch sums I^(N,m) of the no-triple part of the centered
// third moment, and their weighted total sum_m 3 * 2^(m-1) I^(N,m).
struct StretchSeries {
  long N = 0;
  long T = 0;
  int m_min = 2;
  std::vector<double> values;   // I^(N,m), m = m_min .. m_min+values.size()-1
  std::vector<double> std_err;  // 0 for exact entries
  std::string method;           // "transfer-exact" | "simplex-mc"
  double nt_sum = 0.0;          // weighted sum over the computed depths
  double nt_sum_se = 0.0;
  double tail_geometric = 0.0;  // extrapolated weighted tail beyond the series
  double tail_ratio = 0.0;      // last observed weighted-term ratio
  bool tail_valid = false;      // ratios < 1 and not increasing
  double tail_envelope = 0.0;   // analytic per-depth envelope tail
  bool tail_envelope_certified = false;
  bool precision_warning = false;

  int m_max() const { return m_min + static_cast<int>(values.size()) - 1; }
  double weighted(int m) const;  // 3 * 2^(m-1) * I^(N,m)
};

// Exact evaluator by packed-lane transfer over stretch states. Requires a
// point-mass phi, constant psi, and N <= 12 (pair-of-positions state).
// Computes every depth the horizon admits, so nt_sum is the full series.
StretchSeries stretch_series_transfer(const CriticalWindow& window,
                                      const TestFunctionGrid& phi,
                                      const TestFunctionGrid& psi, double t);

// Seeded Monte Carlo over the ordered time simplex with exact kernels:
// closed-form walk weights, the temporal renewal mass, and conditioned
// renewal bridges for the spatial displacements. Stratified (Latin
// hypercube per batch) in the time variables; std_err from batch means.
StretchSeries stretch_series_mc(const CriticalWindow& window,
                                const TestFunctionGrid& phi,
                                const TestFunctionGrid& psi, double t,
                                int m_max, long samples, std::uint64_t seed);

// Dispatcher: transfer evaluator when it applies (N <= 12, point mass),
// Monte Carlo otherwise. m_max <= 6 on the MC path.
StretchSeries stretch_third_moment_nt(const CriticalWindow& window,
                                      const TestFunctionGrid& phi,
                                      const TestFunctionGrid& psi, double t,
                                      int m_max = 5, long samples = 200000,
                                      std::uint64_t seed = 0x706f6c79);

// Exact split of the centered third moment of the point-to-plane field at
// DP horizons: the triple-free part is the pairwise-weight oracle and the
// triple part is the full/pairwise difference. N <= 24.
struct ThirdMomentSplit {
  double centered = 0.0;   // E[(Z-1)^3]
  double no_triple = 0.0;
  double triple = 0.0;
};
ThirdMomentSplit third_moment_split_dp(const CriticalWindow& window);

// rho = |E[xi^3]| * sum_{a<=N} sum_z E_pw[Z_{0,a}(0,z)^3], the contraction
// rate of the triple-site resummation, assembled from its three pieces:
// q^3 sums (exact), q * variance sums via sigma^{-2} U_N(a, z), and the
// endpoint-summed stretch sums. Horizons a <= exact_horizon come from the
// bridged DP; larger a from seeded MC with reported standard errors.
struct TripleResummation {
  long N = 0;
  double xi3_abs = 0.0;
  double rho = 0.0;
  double rho_se = 0.0;
  bool geometric_valid = false;  // rho < 1
  double piece_q3 = 0.0;         // |xi3| sum_a sum_z q_a(z)^3
  double piece_qvar = 0.0;       // 3 |xi3| sum_a sum_z q_a(z) Var[Z_{0,a}(0,z)]
  double piece_qvar_se = 0.0;
  double piece_stretch = 0.0;    // |xi3| sum_a sum_z (no-triple remainder)
  double piece_stretch_se = 0.0;
  double endpoint_sup = 0.0;     // sup over closing horizons of the block third moment
  double endpoint_sup_se = 0.0;
  double triple_bound = 0.0;     // rho * endpoint_sup / (1 - rho); inf if rho >= 1
  long exact_horizon = 0;
};

TripleResummation triple_resummation(const CriticalWindow& window,
                                     long samples = 40000,
                                     std::uint64_t seed = 0x726573756d);

// Depth-m label counts behind the 3 * 2^(m-1) stretch weight: the number of
// sequences in {pair12, pair23, pair13}^k with exactly m maximal runs is
// 3 * 2^(m-1) * C(k-1, m-1). Two independent enumerations, by sequences and
// by disjoint site-set triples; entry m of the result is the count at depth
// m (entry 0 unused).
std::vector<long> stretch_label_counts(int k);
std::vector<long> stretch_pairing_counts(int k);

// Continuum shadow of one depth-2 stretch sum between points: the
// four-time simplex integral with the two renewal-density factors reduced
// to closed Gaussian form. Symmetric in (z, zp) but not zpp; the
// symmetrized three-term sum is permutation invariant.
double limit_stretch_m2(const GThetaInterp& g, double z1, double z2,
                        double zp1, double zp2, double zpp1, double zpp2,
                        double abs_tol = 1e-7);

// Simplex integrals J(m) controlling the continuum depth-m terms:
// the integral over 0 < a_1 < b_1 < ... < a_m < b_m < 1 of
// prod_i G_theta(b_i - a_i) * prod_{i>=3} 1/sqrt((a_i-b_{i-1})(a_i-b_{i-2})).
// Each variable is drawn by inverting the exact primitive of a dominating
// density truncated to the remaining gap, so every sample lands inside the
// simplex and the weights stay bounded; no rejection anywhere.
struct SimplexSeries {
  int m_min = 2;
  std::vector<double> values;
  std::vector<double> std_err;
};
SimplexSeries simplex_envelope_mc(const GThetaInterp& g, int m_max,
                                  long samples, std::uint64_t seed);

}  // namespace polylab
