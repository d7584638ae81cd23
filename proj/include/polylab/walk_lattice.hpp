#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace polylab {

// Site of the 2d simple random walk at time n. The walk lives on the even
// sublattice: n + x1 + x2 must be even for q_n(x) to be nonzero.
struct LatticePoint {
  long n = 0;
  long x1 = 0;
  long x2 = 0;
};

inline bool even_site(long n, long x1, long x2) {
  return ((n + x1 + x2) & 1L) == 0;
}

// 2d heat kernel g_u(x) = exp(-|x|^2/(2u)) / (2*pi*u). Throws on u <= 0.
double heat_kernel(double u, double x1, double x2);

// 1d Gaussian density with variance u.
double gauss1d(double u, double x);

// P(sum of n independent +-1 steps equals j). Closed form via lgamma;
// relative accuracy ~1e-12 up to n ~ 1e6. Zero off-parity or out of range.
double binom_half_pmf(long n, long j);

// Exact Pascal-triangle row of the same pmf: entry k is the probability of
// value 2k - n, k = 0..n. Used as the high-precision oracle for small n.
std::vector<double> binom_half_row(long n);

// q_n(x): closed form from the diagonal factorization. The coordinates
// x1+x2 and x1-x2 of the 2d walk evolve as independent 1d walks, so
// q_n(x) = p_n(x1+x2) * p_n(x1-x2) with p_n the 1d pmf above.
double walk_prob(long n, long x1, long x2);

// Dense table of q_n(x) for n = 0..horizon, built by the forward recursion
// q_{n+1}(x) = 1/4 * sum over neighbors e of q_n(x-e).
//
// Storage: layer n holds the even sublattice restricted to |x|_1 <= n,
// packed via the rotated non-negative coordinates
//   a = (x1+x2+n)/2,  b = (x1-x2+n)/2,  (a,b) in [0,n]^2,
// which makes parity structural and uses (n+1)^2 doubles per layer.
class WalkKernelTable {
 public:
  // Throws std::length_error if the table would exceed memory_budget_bytes.
  static WalkKernelTable build(int horizon,
                               std::size_t memory_budget_bytes = kDefaultBudget);

  int horizon() const { return horizon_; }

  // q_n(x); exact 0 off-parity or out of reach. Throws if n < 0 or
  // n > horizon.
  double q(long n, long x1, long x2) const;

  // Row sum over all sites of layer n (should be 1 up to roundoff).
  double row_sum(int n) const;

  // Visits every stored site of layer n as f(x1, x2, value).
  template <class F>
  void for_each_site(int n, F&& f) const {
    const std::vector<double>& layer = layers_.at(static_cast<std::size_t>(n));
    const long m = n;
    for (long a = 0; a <= m; ++a)
      for (long b = 0; b <= m; ++b)
        f(a + b - m, a - b, layer[static_cast<std::size_t>(a * (m + 1) + b)]);
  }

  // Binary cache (versioned header + raw little-endian doubles).
  void save(const std::string& path) const;
  static WalkKernelTable load(const std::string& path);

  static std::size_t bytes_needed(int horizon);
  static constexpr std::size_t kDefaultBudget = std::size_t{1} << 30;

 private:
  WalkKernelTable() = default;
  int horizon_ = -1;
  std::vector<std::vector<double>> layers_;
};

// u_n^2 = q_{2n}(0) = P(two independent walks meet at time n), and the
// partial sums R_N = sum_{n=1..N} u_n^2.
struct OverlapTable {
  std::vector<double> u_sq;    // index n = 0..N, u_sq[0] = 1 (= q_0(0))
  std::vector<double> partial; // partial[n] = R_n, partial[0] = 0
  double alpha = 0.0;          // the limit constant of pi*R_N - log N

  long size() const { return static_cast<long>(u_sq.size()) - 1; }
  double R(long n) const { return partial.at(static_cast<std::size_t>(n)); }
  // R_n - log(n)/pi; converges to alpha/pi.
  double alpha_diagnostic(long n) const;

  // From the closed-form central binomial recurrence
  // a_n = a_{n-1}*(2n-1)/(2n), u_n^2 = a_n^2. O(N), any desk-scale N.
  static OverlapTable closed_form(long N);

  // From a built kernel table (requires horizon >= 2N). Exact table reads.
  static OverlapTable from_table(const WalkKernelTable& table);
};

// gamma + log 16 - pi.
double alpha_constant();

// Euler-Mascheroni constant, 20 significant digits.
inline constexpr double kEulerGamma = 0.57721566490153286061;

}  // namespace polylab
