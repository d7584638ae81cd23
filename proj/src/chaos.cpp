#include "polylab/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdlib>
#include <stdexcept>

#include "fft_internal.hpp"
#include "polylab/quadrature.hpp"
#include "polylab/renewal.hpp"
#include "polylab/walk_lattice.hpp"

namespace polylab {

namespace {

struct KahanSum {
  double s = 0.0, c = 0.0;
  void add(double x) {
    double y = x - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
};

std::size_t box_index(long x1, long x2, long radius) {
  const long w = 2 * radius + 1;
  return static_cast<std::size_t>((x1 + radius) * w + (x2 + radius));
}

}  // namespace

// ---------------------------------------------------------------------------
// test function grids

TestFunctionGrid TestFunctionGrid::from_function(long N, double support_radius,
                                                 const Fn& fn) {
  if (N < 1) throw std::domain_error("from_function: N must be positive");
  if (!(support_radius > 0.0))
    throw std::domain_error("from_function: support_radius must be positive");
  TestFunctionGrid g;
  g.N = N;
  g.radius = static_cast<long>(
      std::ceil(support_radius * std::sqrt(static_cast<double>(N))));
  const long w = 2 * g.radius + 1;
  g.values.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(w),
                  0.0);
  const double sn = std::sqrt(static_cast<double>(N));
  KahanSum abs_sum;
  for (long x1 = -g.radius; x1 <= g.radius; ++x1)
    for (long x2 = -g.radius; x2 <= g.radius; ++x2) {
      double v = fn(static_cast<double>(x1) / sn, static_cast<double>(x2) / sn);
      g.values[box_index(x1, x2, g.radius)] = v;
      g.sup_norm = std::max(g.sup_norm, std::fabs(v));
      abs_sum.add(std::fabs(v));
    }
  g.abs_sum = abs_sum.s;
  return g;
}

TestFunctionGrid TestFunctionGrid::constant(long N, double c) {
  if (N < 1) throw std::domain_error("constant: N must be positive");
  TestFunctionGrid g;
  g.N = N;
  g.background = c;
  g.sup_norm = std::fabs(c);
  return g;
}

TestFunctionGrid TestFunctionGrid::point_mass(long N) {
  if (N < 1) throw std::domain_error("point_mass: N must be positive");
  TestFunctionGrid g;
  g.N = N;
  g.radius = 0;
  g.values.assign(1, static_cast<double>(N));
  g.sup_norm = static_cast<double>(N);
  g.abs_sum = static_cast<double>(N);
  return g;
}

double TestFunctionGrid::at(long x1, long x2) const {
  if (radius < 0 || std::labs(x1) > radius || std::labs(x2) > radius)
    return background;
  return values[box_index(x1, x2, radius)];
}

bool TestFunctionGrid::is_constant(double* c) const {
  for (double v : values)
    if (v != background) return false;
  if (c) *c = background;
  return true;
}

bool TestFunctionGrid::is_point_mass() const {
  if (radius < 0 || background != 0.0) return false;
  for (long x1 = -radius; x1 <= radius; ++x1)
    for (long x2 = -radius; x2 <= radius; ++x2) {
      double want = (x1 == 0 && x2 == 0) ? static_cast<double>(N) : 0.0;
      if (values[box_index(x1, x2, radius)] != want) return false;
    }
  return true;
}

// ---------------------------------------------------------------------------
// smoothed field

SmoothedField SmoothedField::forward(const TestFunctionGrid& grid, long a) {
  if (!grid.compact())
    throw std::domain_error("forward: grid must be compactly supported");
  if (a < 0) throw std::domain_error("forward: a must be nonnegative");
  SmoothedField f;
  f.N = grid.N;
  f.a = 0;
  f.radius = std::max(grid.radius, 0L);
  const long w = 2 * f.radius + 1;
  f.values.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(w),
                  0.0);
  if (grid.radius >= 0) f.values = grid.values;
  for (long k = 0; k < a; ++k) f.step();
  return f;
}

void SmoothedField::step() {
  const long r = radius, rn = radius + 1;
  const long wn = 2 * rn + 1;
  std::vector<double> out(
      static_cast<std::size_t>(wn) * static_cast<std::size_t>(wn), 0.0);
  auto old_at = [&](long x1, long x2) -> double {
    if (std::labs(x1) > r || std::labs(x2) > r) return 0.0;
    return values[box_index(x1, x2, r)];
  };
  for (long x1 = -rn; x1 <= rn; ++x1)
    for (long x2 = -rn; x2 <= rn; ++x2)
      out[box_index(x1, x2, rn)] =
          0.25 * (old_at(x1 - 1, x2) + old_at(x1 + 1, x2) +
                  old_at(x1, x2 - 1) + old_at(x1, x2 + 1));
  values.swap(out);
  radius = rn;
  ++a;
}

double SmoothedField::at(long x1, long x2) const {
  if (std::labs(x1) > radius || std::labs(x2) > radius) return 0.0;
  return values[box_index(x1, x2, radius)];
}

// ---------------------------------------------------------------------------
// variance

namespace {

// Autocorrelation C(d) = sum_z phi(z) phi(z+d) on |d|_inf <= 2R by a
// zero-padded 2d FFT, then re-expressed in the rotated half-coordinates
// (i, j) = ((d1+d2)/2, (d1-d2)/2) and folded onto the nonnegative quadrant.
// Only even-parity d contribute to S(m) (the two-step kernel vanishes on
// odd parity), which is exactly the lattice points carrying integer (i, j).
std::vector<double> folded_autocorrelation(const TestFunctionGrid& phi,
                                           long r) {
  const long w = 2 * r + 1;
  long l = 1;
  while (l < 2 * w) l <<= 1;
  std::vector<std::complex<double>> a(static_cast<std::size_t>(l) *
                                      static_cast<std::size_t>(l));
  for (long x1 = -r; x1 <= r; ++x1)
    for (long x2 = -r; x2 <= r; ++x2)
      a[static_cast<std::size_t>(((x1 + l) % l) * l + ((x2 + l) % l))] =
          phi.values[box_index(x1, x2, r)];

  std::vector<std::complex<double>> tmp(static_cast<std::size_t>(l));
  auto fft_rows = [&](bool inverse) {
    for (long i = 0; i < l; ++i) {
      std::copy(a.begin() + i * l, a.begin() + (i + 1) * l, tmp.begin());
      detail::fft(tmp, inverse);
      std::copy(tmp.begin(), tmp.end(), a.begin() + i * l);
    }
  };
  auto fft_cols = [&](bool inverse) {
    for (long j = 0; j < l; ++j) {
      for (long i = 0; i < l; ++i) tmp[static_cast<std::size_t>(i)] = a[i * l + j];
      detail::fft(tmp, inverse);
      for (long i = 0; i < l; ++i) a[i * l + j] = tmp[static_cast<std::size_t>(i)];
    }
  };
  fft_rows(false);
  fft_cols(false);
  for (auto& z : a) z *= std::conj(z);
  fft_rows(true);
  fft_cols(true);

  const long rr = 2 * r;
  std::vector<double> fold(static_cast<std::size_t>(rr + 1) *
                               static_cast<std::size_t>(rr + 1),
                           0.0);
  for (long i = -rr; i <= rr; ++i)
    for (long j = -rr; j <= rr; ++j) {
      const long d1 = i + j, d2 = i - j;
      if (std::labs(d1) > rr || std::labs(d2) > rr) continue;
      double c =
          a[static_cast<std::size_t>(((d1 + l) % l) * l + ((d2 + l) % l))]
              .real();
      fold[static_cast<std::size_t>(std::labs(i) * (rr + 1) + std::labs(j))] +=
          c;
    }
  return fold;
}

}  // namespace

VarianceBreakdown variance_exact(const CriticalWindow& window,
                                 const TestFunctionGrid& phi, double t) {
  if (phi.N != window.N)
    throw std::invalid_argument("variance_exact: phi built for a different N");
  if (!phi.compact())
    throw std::domain_error("variance_exact: phi must be compactly supported");
  if (!(t > 0.0) || t > 1.0)
    throw std::domain_error("variance_exact: t must lie in (0, 1]");
  const long N = window.N;
  const long T = std::lround(t * static_cast<double>(N));

  VarianceBreakdown out;
  out.N = N;
  out.T = T;
  KahanSum mean;
  for (double v : phi.values) mean.add(v);
  out.mean = mean.s / static_cast<double>(N);
  if (T < 2 || window.sigma2 == 0.0 || phi.radius < 0) return out;

  OverlapTable ov = OverlapTable::closed_form(N);
  RenewalTable rt = solve_renewal_time(
      window, ov, N > 4096 ? RenewalMethod::fft : RenewalMethod::direct);
  // pu[k] = sum_{v=0}^{k} U_N(v); the v = 0 delta is the single-row term.
  std::vector<double> pu(static_cast<std::size_t>(T - 1), 0.0);
  {
    KahanSum acc;
    acc.add(1.0);
    pu[0] = acc.s;
    for (long v = 1; v <= T - 2; ++v) {
      acc.add(rt.U(v));
      pu[static_cast<std::size_t>(v)] = acc.s;
    }
  }

  KahanSum single, renewal;
  if (phi.is_point_mass()) {
    // C = N^2 delta_0, so S(m) = N^2 u_m^2 straight from the overlap table;
    // this keeps the identity Var = sum_n U_N(n) exact to roundoff.
    const double n2 = static_cast<double>(N) * static_cast<double>(N);
    for (long m = 1; m <= T - 1; ++m) {
      const double s = n2 * ov.u_sq[static_cast<std::size_t>(m)];
      single.add(s);
      renewal.add(s * (pu[static_cast<std::size_t>(T - 1 - m)] - 1.0));
    }
  } else {
    const long r = std::max(phi.radius, 0L);
    const long rr = 2 * r;
    std::vector<double> fold = folded_autocorrelation(phi, r);
    // S(m) = sum_{i,j>=0} fold[i][j] p_{2m}(2i) p_{2m}(2j) from the diagonal
    // factorization of the two-step kernel. The row p_{2m}(2i) is built by
    // the exact ratio recurrence and truncated at 1e-18 of its peak.
    std::vector<double> row(static_cast<std::size_t>(rr + 1), 0.0);
    double p0 = 0.5;  // p_2(0)
    for (long m = 1; m <= T - 1; ++m) {
      if (m > 1) p0 *= (2.0 * m - 1.0) / (2.0 * m);
      long len = 0;
      double p = p0;
      while (len <= std::min(rr, m)) {
        row[static_cast<std::size_t>(len)] = p;
        p *= static_cast<double>(m - len) / static_cast<double>(m + len + 1);
        ++len;
        if (p < 1e-18 * p0) break;
      }
      KahanSum s;
      for (long i = 0; i < len; ++i) {
        double inner = 0.0;
        const double* frow = fold.data() + i * (rr + 1);
        for (long j = 0; j < len; ++j)
          inner += frow[j] * row[static_cast<std::size_t>(j)];
        s.add(row[static_cast<std::size_t>(i)] * inner);
      }
      single.add(s.s);
      renewal.add(s.s * (pu[static_cast<std::size_t>(T - 1 - m)] - 1.0));
    }
  }

  const double scale =
      window.sigma2 / (static_cast<double>(N) * static_cast<double>(N));
  out.term_single = scale * single.s;
  out.term_renewal = scale * renewal.s;
  out.value = out.term_single + out.term_renewal;
  return out;
}

// ---------------------------------------------------------------------------
// third moment split

ThirdMomentSplit third_moment_split_dp(const CriticalWindow& window) {
  ThirdMomentSplit out;
  const double full = third_moment_dp(window, TripleWeight::full);
  const double pw = third_moment_dp(window, TripleWeight::pairwise_only);
  const double second = second_moment_dp(window);
  out.centered = full - 3.0 * second + 2.0;
  out.no_triple = pw - 3.0 * second + 2.0;
  out.triple = full - pw;
  return out;
}

// ---------------------------------------------------------------------------
// depth weights

std::vector<long> stretch_label_counts(int k) {
  if (k < 1 || k > 14) throw std::domain_error("stretch_label_counts: k in 1..14");
  std::vector<long> out(static_cast<std::size_t>(k + 1), 0);
  long total = 1;
  for (int i = 0; i < k; ++i) total *= 3;
  for (long code = 0; code < total; ++code) {
    long c = code;
    int prev = -1, runs = 0;
    for (int s = 0; s < k; ++s) {
      int lab = static_cast<int>(c % 3);
      c /= 3;
      if (lab != prev) {
        ++runs;
        prev = lab;
      }
    }
    ++out[static_cast<std::size_t>(runs)];
  }
  return out;
}

std::vector<long> stretch_pairing_counts(int k) {
  if (k < 1 || k > 14)
    throw std::domain_error("stretch_pairing_counts: k in 1..14");
  std::vector<long> out(static_cast<std::size_t>(k + 1), 0);
  const long full = (1L << k) - 1;
  for (long a = 0; a <= full; ++a) {
    const long comp = full & ~a;
    long b = comp;
    for (;;) {
      int prev = -1, runs = 0;
      for (int s = 0; s < k; ++s) {
        int lab = ((a >> s) & 1) ? 0 : (((b >> s) & 1) ? 1 : 2);
        if (lab != prev) {
          ++runs;
          prev = lab;
        }
      }
      ++out[static_cast<std::size_t>(runs)];
      if (b == 0) break;
      b = (b - 1) & comp;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// continuum depth-2 integral

// The two inner renewal-density factors are reduced in closed form: the
// first block contributes g_{a1}(z - z') after integrating out the meeting
// point, the second contributes g_{a2 - b1/4}((z+z')/2 - z'') after the
// first meeting point is integrated against the bridge marginal, and the
// closing side integrates the density of the gap to 1. What is left is a
// three-dimensional iterated integral over 0 < a1 < b1 < a2 < 1.
double limit_stretch_m2(const GThetaInterp& g, double z1, double z2,
                        double zp1, double zp2, double zpp1, double zpp2,
                        double abs_tol) {
  const double theta = g.theta();
  const double dz1 = z1 - zp1, dz2 = z2 - zp2;
  const double m1 = 0.5 * (z1 + zp1) - zpp1, m2 = 0.5 * (z2 + zp2) - zpp2;
  if (dz1 == 0.0 && dz2 == 0.0)
    throw std::domain_error("limit_stretch_m2: z and zp must be distinct");

  auto inner_a2 = [&](double b1) {
    auto f = [&](double a2) {
      return g.integral_0_to(1.0 - a2) * heat_kernel(a2 - 0.25 * b1, m1, m2);
    };
    return integrate(f, b1, 1.0, abs_tol * 0.02, 1e-10, 2000).value;
  };

  // b1 = a1 + v with v drawn through the substitution v = exp(2 - 2/y);
  // G(v) dv = [G(v) v] (2/y^2) dy stays bounded as y -> 0, so the slowly
  // divergent mass of G near v = 0 is integrated without losing the chunk
  // below any fixed cutoff.
  auto inner_v1 = [&](double a1) {
    const double vmax = 1.0 - a1;
    const double ymax = 2.0 / (2.0 + std::log(1.0 / vmax));
    auto f = [&](double y) {
      const double lv = 2.0 / y - 2.0;
      double gv;  // G_theta(v) * v
      double v;
      if (lv > 700.0) {
        v = 0.0;
        gv = (1.0 + 2.0 * theta / lv) / (lv * lv);
      } else {
        v = std::exp(-lv);
        gv = g(v) * v;
      }
      return gv * (2.0 / (y * y)) * inner_a2(a1 + v);
    };
    return integrate(f, 0.0, ymax, abs_tol * 0.2, 1e-10, 600).value;
  };

  auto fa1 = [&](double a1) { return heat_kernel(a1, dz1, dz2) * inner_v1(a1); };
  return integrate(fa1, 0.0, 1.0, abs_tol, 1e-10, 400).value;
}

// ---------------------------------------------------------------------------
// continuum simplex integrals

SimplexSeries simplex_envelope_mc(const GThetaInterp& g, int m_max,
                                  long samples, std::uint64_t seed) {
  if (m_max < 2 || m_max > 12)
    throw std::domain_error("simplex_envelope_mc: m_max in 2..12");
  if (samples < 256)
    throw std::domain_error("simplex_envelope_mc: samples >= 256");
  SimplexSeries out;
  out.m_min = 2;
  const double theta = g.theta();
  const double tmin = g.t_min();
  Rng base(seed);
  const int nb = 32;
  const long per = samples / nb;

  for (int m = 2; m <= m_max; ++m) {
    std::vector<double> batch(static_cast<std::size_t>(nb), 0.0);
    for (int b = 0; b < nb; ++b) {
      Rng rng = base.split(static_cast<std::uint64_t>(m) * 1009 + b);
      KahanSum acc;
      for (long s = 0; s < per; ++s) {
        double rem = 1.0, w = 1.0;
        double u_prev = 0.0, v_prev = 0.0;
        bool dead = false;
        for (int i = 1; i <= m && !dead; ++i) {
          // gap u_i = a_i - b_{i-1} (or a_1 itself when i = 1)
          double u;
          if (i <= 2) {
            u = rem * rng.uniform_pos();
            w *= rem;
          } else {
            // proposal density 1/(2 sqrt(rem u)) cancels the 1/sqrt(u)
            // half of the chain factor exactly
            const double y = rng.uniform_pos();
            u = rem * y * y;
            w *= 2.0 * std::sqrt(rem / (u + v_prev + u_prev));
          }
          rem -= u;
          if (rem <= 0.0) {
            dead = true;
            break;
          }
          // stretch length v_i, drawn from the envelope density
          // c/(v (2+log(1/v))^2) truncated to (0, rem): exact inverse CDF.
          const double aa = 2.0 + std::log(1.0 / rem);
          const double y = rng.uniform_pos();
          const double lv = aa / y - 2.0;
          const double lh = 2.0 + lv;
          double v, factor;
          if (lv > 700.0 || std::exp(-lv) < tmin) {
            v = (lv > 700.0) ? 0.0 : std::exp(-lv);
            factor = (1.0 + 2.0 * theta / lv) * (lh / lv) * (lh / lv) / aa;
          } else {
            v = std::exp(-lv);
            factor = g(v) * v * lh * lh / aa;
          }
          w *= factor;
          rem -= v;
          if (rem <= 0.0) {
            dead = true;
            break;
          }
          u_prev = u;
          v_prev = v;
        }
        acc.add(dead ? 0.0 : w);
      }
      batch[static_cast<std::size_t>(b)] = acc.s / static_cast<double>(per);
    }
    double mean = 0.0;
    for (double x : batch) mean += x;
    mean /= nb;
    double var = 0.0;
    for (double x : batch) var += (x - mean) * (x - mean);
    var /= (nb - 1.0);
    out.values.push_back(mean);
    out.std_err.push_back(std::sqrt(var / nb));
  }
  return out;
}

}  // namespace polylab
