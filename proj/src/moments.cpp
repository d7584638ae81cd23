#include "polylab/moments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "polylab/rng.hpp"

namespace polylab {

namespace {

// Kahan accumulator: the enumeration sums reach ~1e9 similar-magnitude
// terms, where naive summation loses ~1e-8 absolute.
struct KahanSum {
  double s = 0.0, c = 0.0;
  void add(double x) {
    double y = x - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
};

// Joint step law of ((a-a')/2, (a'-a'')/2) for independent uniform signs:
// the two difference lanes of three coupled walks share the middle walk.
struct Tap {
  int du, dv;
  double p;
};
constexpr Tap kLaneTaps[7] = {{0, 0, 0.25},  {0, 1, 0.125},  {0, -1, 0.125},
                              {1, 0, 0.125}, {-1, 0, 0.125}, {1, -1, 0.125},
                              {-1, 1, 0.125}};

// Shared pair-difference DP. Free: s = N-1 steps, weight after each, sum all
// states. Bridged: N steps, only the first N-1 weighted, read the diagonal
// (both replicas at a common summed endpoint).
double pair_dp(double sigma2, long N, bool bridged) {
  const long s = N - 1;               // number of disorder rows
  const long steps = bridged ? N : s;
  const long W = 2 * steps + 1;       // full reachable range, no leakage
  const long c = steps;               // index of difference 0
  std::vector<double> v(static_cast<std::size_t>(W) * W, 0.0);
  std::vector<double> tmp(v.size(), 0.0);
  v[static_cast<std::size_t>(c * W + c)] = 1.0;

  auto axis_pass = [&](const std::vector<double>& in, std::vector<double>& out,
                       bool along_rows) {
    for (long i = 0; i < W; ++i) {
      for (long j = 0; j < W; ++j) {
        long k = along_rows ? i : j;  // coordinate being convolved
        auto at = [&](long kk) -> double {
          if (kk < 0 || kk >= W) return 0.0;
          return along_rows ? in[static_cast<std::size_t>(kk * W + j)]
                            : in[static_cast<std::size_t>(i * W + kk)];
        };
        out[static_cast<std::size_t>(i * W + j)] =
            0.25 * at(k - 1) + 0.5 * at(k) + 0.25 * at(k + 1);
      }
    }
  };

  const double pair_w = 1.0 + sigma2;
  for (long n = 1; n <= steps; ++n) {
    axis_pass(v, tmp, true);
    axis_pass(tmp, v, false);
    if (n <= s) v[static_cast<std::size_t>(c * W + c)] *= pair_w;
  }
  if (bridged) return v[static_cast<std::size_t>(c * W + c)];
  KahanSum total;
  for (double x : v) total.add(x);
  return total.s;
}

double triple_dp(double sigma2, double xi3_term, long N, bool bridged) {
  const long s = N - 1;
  const long steps = bridged ? N : s;
  const long W = 2 * steps + 1;
  const long c = steps;
  const std::size_t Wu = static_cast<std::size_t>(W);
  const std::size_t total_states = Wu * Wu * Wu * Wu;
  std::vector<double> v(total_states, 0.0);
  std::vector<double> tmp(total_states, 0.0);
  // index layout: ((i1a*W + i2a)*W + i1b)*W + i2b
  auto idx = [&](long i1a, long i2a, long i1b, long i2b) {
    return ((static_cast<std::size_t>(i1a) * Wu + static_cast<std::size_t>(i2a)) * Wu +
            static_cast<std::size_t>(i1b)) * Wu + static_cast<std::size_t>(i2b);
  };
  v[idx(c, c, c, c)] = 1.0;

  // Convolve one lane (a pair of adjacent index axes) with the 7-tap law.
  auto lane_pass = [&](const std::vector<double>& in, std::vector<double>& out,
                       bool lane_a) {
    for (long i1a = 0; i1a < W; ++i1a)
      for (long i2a = 0; i2a < W; ++i2a)
        for (long i1b = 0; i1b < W; ++i1b)
          for (long i2b = 0; i2b < W; ++i2b) {
            double acc = 0.0;
            for (const Tap& t : kLaneTaps) {
              long u1 = lane_a ? i1a - t.du : i1a;
              long u2 = lane_a ? i2a - t.dv : i2a;
              long u3 = lane_a ? i1b : i1b - t.du;
              long u4 = lane_a ? i2b : i2b - t.dv;
              if (u1 < 0 || u1 >= W || u2 < 0 || u2 >= W || u3 < 0 ||
                  u3 >= W || u4 < 0 || u4 >= W)
                continue;
              acc += t.p * in[idx(u1, u2, u3, u4)];
            }
            out[idx(i1a, i2a, i1b, i2b)] = acc;
          }
  };

  const double pair_w = 1.0 + sigma2;
  const double triple_w = 1.0 + 3.0 * sigma2 + xi3_term;
  for (long n = 1; n <= steps; ++n) {
    lane_pass(v, tmp, true);
    lane_pass(tmp, v, false);
    if (n > s) break;
    // The three pair-coincidence planes intersect only at the triple state,
    // so each state in the union gets its exact weight applied once.
    for (long ia = 0; ia < W; ++ia)
      for (long ib = 0; ib < W; ++ib) {
        if (ia != c || ib != c) v[idx(c, ia, c, ib)] *= pair_w;  // D1 = 0
        if (ia != c || ib != c) v[idx(ia, c, ib, c)] *= pair_w;  // D2 = 0
        long ja = 2 * c - ia, jb = 2 * c - ib;                   // D1+D2 = 0
        if ((ia != c || ib != c) && ja >= 0 && ja < W && jb >= 0 && jb < W)
          v[idx(ia, ja, ib, jb)] *= pair_w;
      }
    v[idx(c, c, c, c)] *= triple_w;
  }
  if (bridged) return v[idx(c, c, c, c)];
  KahanSum total;
  for (double x : v) total.add(x);
  return total.s;
}

}  // namespace

double second_moment_dp(const CriticalWindow& window) {
  if (window.N < 1 || window.N > 512)
    throw std::length_error("second_moment_dp: N outside [1, 512]");
  return pair_dp(window.sigma2, window.N, false);
}

double second_moment_dp_bridged(const CriticalWindow& window) {
  if (window.N < 1 || window.N > 512)
    throw std::length_error("second_moment_dp_bridged: N outside [1, 512]");
  return pair_dp(window.sigma2, window.N, true);
}

double third_moment_dp(const CriticalWindow& window, TripleWeight weight) {
  if (window.N < 1 || window.N > 24)
    throw std::length_error("third_moment_dp: N outside [1, 24]");
  return triple_dp(window.sigma2,
                   weight == TripleWeight::full ? window.xi3 : 0.0, window.N,
                   false);
}

double third_moment_dp_bridged(const CriticalWindow& window,
                               TripleWeight weight) {
  if (window.N < 1 || window.N > 24)
    throw std::length_error("third_moment_dp_bridged: N outside [1, 24]");
  return triple_dp(window.sigma2,
                   weight == TripleWeight::full ? window.xi3 : 0.0, window.N,
                   true);
}

// ---------------------------------------------------------------------------
// exhaustive enumeration

namespace {

struct PathSet {
  long steps = 0;
  long count = 0;                 // 4^steps
  std::vector<std::uint8_t> mask;  // coincidence bits of path pairs, times 1..steps

  static PathSet build(long N) {
    if (N < 1 || N > 6)
      throw std::length_error("moment enumeration: N outside [1, 6]");
    PathSet ps;
    ps.steps = N - 1;
    ps.count = 1;
    for (long i = 0; i < ps.steps; ++i) ps.count *= 4;
    const int dx[4] = {1, -1, 0, 0};
    const int dy[4] = {0, 0, 1, -1};
    std::vector<std::int8_t> pos(
        static_cast<std::size_t>(ps.count * std::max(ps.steps, 1L) * 2), 0);
    for (long p = 0; p < ps.count; ++p) {
      long code = p;
      int x = 0, y = 0;
      for (long n = 0; n < ps.steps; ++n) {
        int d = static_cast<int>(code & 3);
        code >>= 2;
        x += dx[d];
        y += dy[d];
        pos[static_cast<std::size_t>((p * std::max(ps.steps, 1L) + n) * 2)] =
            static_cast<std::int8_t>(x);
        pos[static_cast<std::size_t>((p * std::max(ps.steps, 1L) + n) * 2) + 1] =
            static_cast<std::int8_t>(y);
      }
    }
    ps.mask.assign(static_cast<std::size_t>(ps.count) *
                       static_cast<std::size_t>(ps.count),
                   0);
    for (long i = 0; i < ps.count; ++i)
      for (long j = 0; j < ps.count; ++j) {
        std::uint8_t m = 0;
        for (long n = 0; n < ps.steps; ++n) {
          std::size_t a = static_cast<std::size_t>(
              (i * std::max(ps.steps, 1L) + n) * 2);
          std::size_t b = static_cast<std::size_t>(
              (j * std::max(ps.steps, 1L) + n) * 2);
          if (pos[a] == pos[b] && pos[a + 1] == pos[b + 1])
            m |= static_cast<std::uint8_t>(1u << n);
        }
        ps.mask[static_cast<std::size_t>(i * ps.count + j)] = m;
      }
    return ps;
  }
};

}  // namespace

double second_moment_enum(const CriticalWindow& window) {
  PathSet ps = PathSet::build(window.N);
  double pw[7];
  pw[0] = 1.0;
  for (int k = 1; k <= 6; ++k) pw[k] = pw[k - 1] * (1.0 + window.sigma2);
  KahanSum sum;
  for (long i = 0; i < ps.count; ++i)
    for (long j = 0; j < ps.count; ++j)
      sum.add(pw[__builtin_popcount(
          ps.mask[static_cast<std::size_t>(i * ps.count + j)])]);
  double norm = std::pow(0.25, static_cast<double>(2 * ps.steps));
  return sum.s * norm;
}

double third_moment_enum(const CriticalWindow& window, TripleWeight weight) {
  PathSet ps = PathSet::build(window.N);
  const double s2 = window.sigma2;
  const double xi3 = (weight == TripleWeight::full) ? window.xi3 : 0.0;

  // Per-slice weight depends only on the three pair-coincidence bits, so the
  // path-triple weight depends only on the three masks.
  const long B = ps.steps;
  const std::size_t keys = static_cast<std::size_t>(1) << (3 * B);
  std::vector<double> wtab(std::max<std::size_t>(keys, 1), 1.0);
  for (std::size_t key = 0; key < keys; ++key) {
    double w = 1.0;
    for (long n = 0; n < B; ++n) {
      int p = static_cast<int>((key >> n) & 1);
      int q = static_cast<int>((key >> (B + n)) & 1);
      int r = static_cast<int>((key >> (2 * B + n)) & 1);
      double site = 1.0 + s2 * (p + q + r);
      if (p + q + r >= 2) site += xi3;  // all three walks share the site
      w *= site;
    }
    wtab[key] = w;
  }

  auto key_of = [&](long i, long j, long k) {
    std::size_t mab = ps.mask[static_cast<std::size_t>(i * ps.count + j)];
    std::size_t mbc = ps.mask[static_cast<std::size_t>(j * ps.count + k)];
    std::size_t mac = ps.mask[static_cast<std::size_t>(i * ps.count + k)];
    return mab | (mbc << B) | (mac << (2 * B));
  };

  KahanSum sum;
  for (long i = 0; i < ps.count; ++i) {
    sum.add(wtab[key_of(i, i, i)]);
    for (long j = i + 1; j < ps.count; ++j) {
      sum.add(3.0 * wtab[key_of(i, i, j)]);
      sum.add(3.0 * wtab[key_of(i, j, j)]);
      for (long k = j + 1; k < ps.count; ++k)
        sum.add(6.0 * wtab[key_of(i, j, k)]);
    }
  }
  double norm = std::pow(0.25, static_cast<double>(3 * ps.steps));
  return sum.s * norm;
}

// ---------------------------------------------------------------------------
// averaged-field Monte Carlo

namespace {

// One exact transfer evaluation of Z(phi, psi) in a sampled environment.
// `sampler == nullptr` runs the disorder-free recursion (the exact mean).
double transfer_field(const CriticalWindow& window, const FieldFn& phi,
                      long R0, const FieldFn& psi, XiSampler* sampler) {
  const long N = window.N;
  const double sqN = std::sqrt(static_cast<double>(N));
  const long RF = R0 + N;
  const long W = 2 * RF + 1;
  std::vector<double> v(static_cast<std::size_t>(W) * W, 0.0);
  std::vector<double> nxt(v.size(), 0.0);
  auto at = [&](std::vector<double>& a, long x, long y) -> double& {
    return a[static_cast<std::size_t>((x + RF) * W + (y + RF))];
  };
  for (long x = -R0; x <= R0; ++x)
    for (long y = -R0; y <= R0; ++y)
      at(v, x, y) = phi(static_cast<double>(x) / sqN,
                        static_cast<double>(y) / sqN);

  for (long n = 1; n <= N; ++n) {
    long R = R0 + n;
    for (long x = -R; x <= R; ++x)
      for (long y = -R; y <= R; ++y) {
        double m = 0.0;
        if (x - 1 >= -RF) m += at(v, x - 1, y);
        if (x + 1 <= RF) m += at(v, x + 1, y);
        if (y - 1 >= -RF) m += at(v, x, y - 1);
        if (y + 1 <= RF) m += at(v, x, y + 1);
        m *= 0.25;
        if (n < N && sampler != nullptr) m *= 1.0 + sampler->next();
        at(nxt, x, y) = m;
      }
    std::swap(v, nxt);
  }
  double z = 0.0;
  for (long x = -RF; x <= RF; ++x)
    for (long y = -RF; y <= RF; ++y) {
      double w = at(v, x, y);
      if (w != 0.0)
        z += w * psi(static_cast<double>(x) / sqN,
                     static_cast<double>(y) / sqN);
    }
  return z / static_cast<double>(N);
}

}  // namespace

FieldMcStats averaged_field_mc(const DisorderSpec& disorder,
                               const CriticalWindow& window, const FieldFn& phi,
                               double phi_radius, const FieldFn& psi,
                               int replicas, std::uint64_t seed) {
  if (window.N < 2 || window.N > 256)
    throw std::length_error("averaged_field_mc: N outside [2, 256]");
  if (replicas < 100)
    throw std::domain_error("averaged_field_mc: need at least 100 replicas");
  if (!(phi_radius > 0.0))
    throw std::domain_error("averaged_field_mc: phi_radius must be positive");
  const long R0 = static_cast<long>(
      std::ceil(phi_radius * std::sqrt(static_cast<double>(window.N))));

  FieldMcStats st;
  st.replicas = replicas;
  st.exact_mean = transfer_field(window, phi, R0, psi, nullptr);

  Rng base(seed);
  std::vector<double> z(static_cast<std::size_t>(replicas));
  for (int r = 0; r < replicas; ++r) {
    XiSampler xs(disorder, window.beta,
                 base.split(static_cast<std::uint64_t>(r)).next_u64());
    z[static_cast<std::size_t>(r)] =
        transfer_field(window, phi, R0, psi, &xs);
  }

  const double n = static_cast<double>(replicas);
  double mean = 0.0;
  for (double x : z) mean += x;
  mean /= n;
  double m2 = 0.0, m3 = 0.0;
  for (double x : z) {
    double d = x - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  st.mean = mean;
  st.variance = m2 / (n - 1.0);
  st.third_central = n / ((n - 1.0) * (n - 2.0)) * m3;
  st.se_mean = std::sqrt(st.variance / n);
  st.se_variance = st.variance * std::sqrt(2.0 / (n - 1.0));

  // Jackknife spread of the third k-statistic.
  double s1 = 0.0, s2 = 0.0, s3 = 0.0;
  for (double x : z) {
    s1 += x;
    s2 += x * x;
    s3 += x * x * x;
  }
  std::vector<double> k3i(z.size());
  const double m = n - 1.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    double x = z[i];
    double t1 = s1 - x, t2 = s2 - x * x, t3 = s3 - x * x * x;
    double mu = t1 / m;
    double c3 = t3 - 3.0 * mu * t2 + 2.0 * m * mu * mu * mu;
    k3i[i] = m / ((m - 1.0) * (m - 2.0)) * c3;
  }
  double kbar = 0.0;
  for (double k : k3i) kbar += k;
  kbar /= n;
  double acc = 0.0;
  for (double k : k3i) acc += (k - kbar) * (k - kbar);
  st.se_third = std::sqrt((n - 1.0) / n * acc);
  return st;
}

}  // namespace polylab
