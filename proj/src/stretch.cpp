#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "polylab/chaos.hpp"
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

// ---------------------------------------------------------------------------
// exact transfer evaluator
//
// Levels are packed through the rotated nonnegative coordinates
// (i, j) = ((x1+x2+n)/2, (x1-x2+n)/2) in [0, n]^2, so parity is structural
// and a lane advances i -> i + k across a gap g with the exact one-lane
// kernel row_g[k]. The renewal layers U_N(v, .) use the same packing, with
// lane offsets k in [0, v].

struct TransferTables {
  std::vector<std::vector<double>> row;  // row[g], g = 0..horizon
  std::vector<std::vector<double>> upk;  // upk[v], v = 0..max(horizon-2, 0)
};

TransferTables build_transfer_tables(const CriticalWindow& window,
                                     long horizon) {
  TransferTables t;
  t.row.resize(static_cast<std::size_t>(horizon) + 1);
  for (long g = 0; g <= horizon; ++g)
    t.row[static_cast<std::size_t>(g)] = binom_half_row(g);
  const long n_sp = std::max(horizon - 2, 0L);
  t.upk.resize(static_cast<std::size_t>(n_sp) + 1);
  t.upk[0] = {1.0};
  if (n_sp >= 1) {
    OverlapTable ov = OverlapTable::closed_form(window.N);
    RenewalTable rt = solve_renewal_time(window, ov);
    solve_renewal_spacetime(rt, window, ov, static_cast<int>(n_sp));
    for (long v = 1; v <= n_sp; ++v)
      t.upk[static_cast<std::size_t>(v)] =
          rt.U_xy[static_cast<std::size_t>(v)];
  }
  return t;
}

}  // namespace

StretchSeries stretch_series_transfer(const CriticalWindow& window,
                                      const TestFunctionGrid& phi,
                                      const TestFunctionGrid& psi, double t) {
  if (phi.N != window.N || psi.N != window.N)
    throw std::invalid_argument("stretch transfer: grids built for another N");
  if (!phi.is_point_mass())
    throw std::domain_error("stretch transfer: phi must be the point mass");
  double cpsi = 0.0;
  if (!psi.is_constant(&cpsi))
    throw std::domain_error("stretch transfer: psi must be constant");
  if (!(t > 0.0) || t > 1.0)
    throw std::domain_error("stretch transfer: t must lie in (0, 1]");
  if (window.N > 12)
    throw std::length_error("stretch transfer: N <= 12 (pair state)");

  const long T = std::lround(t * static_cast<double>(window.N));
  StretchSeries out;
  out.N = window.N;
  out.T = T;
  out.method = "transfer-exact";
  const double cpsi3 = cpsi * cpsi * cpsi;
  if (T < 3 || window.sigma2 == 0.0 || cpsi3 == 0.0) {
    out.tail_valid = true;
    return out;
  }

  const TransferTables tt = build_transfer_tables(window, T);
  const double s2 = window.sigma2;

  // First stretch ending at b: sum over a <= b and the squared start of
  // q_a(x)^2 sigma^2 U(b-a, y-x). Point-mass phi cancels the 1/N^3 field
  // normalization exactly, so bare kernels are used throughout.
  std::vector<std::vector<double>> f1(static_cast<std::size_t>(T));
  for (long b = 1; b <= T - 1; ++b) {
    const long wb = b + 1;
    auto& fb = f1[static_cast<std::size_t>(b)];
    fb.assign(static_cast<std::size_t>(wb * wb), 0.0);
    for (long a = 1; a <= b; ++a) {
      const long g = b - a;
      const auto& qr = tt.row[static_cast<std::size_t>(a)];
      const auto& u = tt.upk[static_cast<std::size_t>(g)];
      for (long ia = 0; ia <= a; ++ia)
        for (long ja = 0; ja <= a; ++ja) {
          const double qq = s2 * qr[static_cast<std::size_t>(ia)] *
                            qr[static_cast<std::size_t>(ia)] *
                            qr[static_cast<std::size_t>(ja)] *
                            qr[static_cast<std::size_t>(ja)];
          for (long k1 = 0; k1 <= g; ++k1) {
            double* dst = fb.data() + (ia + k1) * wb + ja;
            const double* urow = u.data() + k1 * (g + 1);
            for (long k2 = 0; k2 <= g; ++k2) dst[k2] += qq * urow[k2];
          }
        }
    }
  }

  // Stretch states: S[(bp, b)] holds the joint mass over (y_{m-1}, y_m) at
  // levels bp < b, flattened as (yp index) * (b+1)^2 + (y index).
  auto sidx = [T](long bp, long b) {
    return static_cast<std::size_t>(bp * T + b);
  };
  std::vector<std::vector<double>> st(static_cast<std::size_t>(T * T)),
      stnew(static_cast<std::size_t>(T * T));

  for (long b1 = 1; b1 <= T - 2; ++b1) {
    const long w1 = b1 + 1;
    const auto& fb = f1[static_cast<std::size_t>(b1)];
    for (long a2 = b1 + 1; a2 <= T - 1; ++a2) {
      const long u2 = a2 - b1;
      const auto& wr = tt.row[static_cast<std::size_t>(u2)];
      const auto& qr = tt.row[static_cast<std::size_t>(a2)];
      for (long b2 = a2; b2 <= T - 1; ++b2) {
        const long v2 = b2 - a2, w2 = b2 + 1;
        auto& dst = st[sidx(b1, b2)];
        if (dst.empty())
          dst.assign(static_cast<std::size_t>(w1 * w1) *
                         static_cast<std::size_t>(w2 * w2),
                     0.0);
        const auto& u = tt.upk[static_cast<std::size_t>(v2)];
        for (long i1 = 0; i1 <= b1; ++i1)
          for (long j1 = 0; j1 <= b1; ++j1) {
            const double f = fb[static_cast<std::size_t>(i1 * w1 + j1)];
            if (f == 0.0) continue;
            double* drow = dst.data() +
                           static_cast<std::size_t>(i1 * w1 + j1) *
                               static_cast<std::size_t>(w2 * w2);
            for (long k1 = 0; k1 <= u2; ++k1)
              for (long k2 = 0; k2 <= u2; ++k2) {
                const long ia = i1 + k1, ja = j1 + k2;
                const double base = s2 * f * wr[static_cast<std::size_t>(k1)] *
                                    wr[static_cast<std::size_t>(k2)] *
                                    qr[static_cast<std::size_t>(ia)] *
                                    qr[static_cast<std::size_t>(ja)];
                for (long l1 = 0; l1 <= v2; ++l1) {
                  const double* urow = u.data() + l1 * (v2 + 1);
                  double* d2 = drow + (ia + l1) * w2 + ja;
                  for (long l2 = 0; l2 <= v2; ++l2) d2[l2] += base * urow[l2];
                }
              }
          }
      }
    }
  }

  auto total = [](const std::vector<std::vector<double>>& s) {
    KahanSum k;
    for (const auto& v : s)
      for (double x : v) k.add(x);
    return k.s;
  };

  std::vector<double> vals;
  vals.push_back(cpsi3 * total(st));

  std::vector<double> ta, mid;
  for (;;) {
    for (auto& v : stnew) v.clear();
    bool produced = false;
    for (long bp = 1; bp <= T - 2; ++bp)
      for (long b = bp + 1; b <= T - 1; ++b) {
        const auto& s = st[sidx(bp, b)];
        if (s.empty()) continue;
        const long wp = bp + 1, wb = b + 1;
        const long ny = wb * wb;
        for (long a = b + 1; a <= T - 1; ++a) {
          const long gp = a - bp, ug = a - b, wa = a + 1;
          const auto& wrp = tt.row[static_cast<std::size_t>(gp)];
          const auto& wru = tt.row[static_cast<std::size_t>(ug)];
          // contract y_{m-2} against both lanes of the gap-gp kernel
          ta.assign(static_cast<std::size_t>(wa * wp * ny), 0.0);
          for (long ip = 0; ip <= bp; ++ip)
            for (long jp = 0; jp <= bp; ++jp) {
              const double* srow =
                  s.data() + static_cast<std::size_t>(ip * wp + jp) *
                                 static_cast<std::size_t>(ny);
              for (long k = 0; k <= gp; ++k) {
                const double w0 = wrp[static_cast<std::size_t>(k)];
                double* trow = ta.data() +
                               static_cast<std::size_t>(((ip + k) * wp + jp)) *
                                   static_cast<std::size_t>(ny);
                for (long y = 0; y < ny; ++y) trow[y] += w0 * srow[y];
              }
            }
          mid.assign(static_cast<std::size_t>(wa * wa * ny), 0.0);
          for (long ix = 0; ix <= a; ++ix)
            for (long jp = 0; jp <= bp; ++jp) {
              const double* trow = ta.data() +
                                   static_cast<std::size_t>(ix * wp + jp) *
                                       static_cast<std::size_t>(ny);
              for (long k = 0; k <= gp; ++k) {
                const double w0 = wrp[static_cast<std::size_t>(k)];
                double* mrow = mid.data() +
                               static_cast<std::size_t>(ix * wa + jp + k) *
                                   static_cast<std::size_t>(ny);
                for (long y = 0; y < ny; ++y) mrow[y] += w0 * trow[y];
              }
            }
          for (long v = 0; v <= T - 1 - a; ++v) {
            const long bn = a + v, wn = bn + 1;
            auto& dst = stnew[sidx(b, bn)];
            if (dst.empty())
              dst.assign(static_cast<std::size_t>(ny) *
                             static_cast<std::size_t>(wn * wn),
                         0.0);
            produced = true;
            const auto& uu = tt.upk[static_cast<std::size_t>(v)];
            for (long iy = 0; iy <= b; ++iy)
              for (long jy = 0; jy <= b; ++jy) {
                const long y = iy * wb + jy;
                double* dsty = dst.data() + static_cast<std::size_t>(y) *
                                                static_cast<std::size_t>(wn * wn);
                for (long k1 = 0; k1 <= ug; ++k1)
                  for (long k2 = 0; k2 <= ug; ++k2) {
                    const long ix = iy + k1, jx = jy + k2;
                    const double base =
                        s2 * wru[static_cast<std::size_t>(k1)] *
                        wru[static_cast<std::size_t>(k2)] *
                        mid[static_cast<std::size_t>(ix * wa + jx) *
                                static_cast<std::size_t>(ny) +
                            static_cast<std::size_t>(y)];
                    if (base == 0.0) continue;
                    for (long l1 = 0; l1 <= v; ++l1) {
                      const double* urow = uu.data() + l1 * (v + 1);
                      double* d2 = dsty + (ix + l1) * wn + jx;
                      for (long l2 = 0; l2 <= v; ++l2) d2[l2] += base * urow[l2];
                    }
                  }
              }
          }
        }
      }
    if (!produced) break;
    vals.push_back(cpsi3 * total(stnew));
    st.swap(stnew);
  }

  out.values = vals;
  out.std_err.assign(vals.size(), 0.0);
  KahanSum nt;
  double w = 6.0;  // 3 * 2^(m-1) at m = 2
  for (double v : vals) {
    nt.add(w * v);
    w *= 2.0;
  }
  out.nt_sum = nt.s;
  out.tail_valid = true;  // the series is complete: the tail is exactly zero
  if (vals.size() >= 2) {
    const double wl = vals.back(), wp = vals[vals.size() - 2];
    if (wp != 0.0) out.tail_ratio = 2.0 * wl / wp;
  }
  return out;
}

double StretchSeries::weighted(int m) const {
  if (m < m_min || m > m_max())
    throw std::out_of_range("StretchSeries::weighted: depth outside series");
  return 3.0 * std::ldexp(1.0, m - 1) * values[static_cast<std::size_t>(m - m_min)];
}

// ---------------------------------------------------------------------------
// Monte Carlo engine

namespace {

// Shared sampling context. `budget` bounds the last stretch end b_m; the
// bridge rows invert P(first jump = g | total lifetime v), which by the
// renewal recursion is sigma^2 u_g^2 U(v-g) / U(v) and sums to one.
struct McCtx {
  long N = 0;
  long budget = 0;
  double sigma2 = 0.0;
  OverlapTable ov;
  RenewalTable rt;
  RenewalIncrementLaw law;
  std::vector<double> pu;    // pu[k] = sum_{v=0}^{k} U_N(v)
  std::vector<double> cumh;  // cumh[g] = sum_{h=1}^{g} 1/h
  std::vector<double> cum2;  // cum2[g] = sum_{h=1}^{g} 1/h^2
  std::vector<std::vector<double>> bridge;  // bridge[v]: cdf over g = 1..v
};

McCtx build_mc_ctx(const CriticalWindow& window, long budget,
                   long bridge_to = -1) {
  if (budget > 8192)
    throw std::length_error("stretch mc: bridge tables need budget <= 8192");
  if (bridge_to < budget) bridge_to = budget;
  McCtx c;
  c.N = window.N;
  c.budget = budget;
  c.sigma2 = window.sigma2;
  c.ov = OverlapTable::closed_form(window.N);
  c.rt = solve_renewal_time(
      window, c.ov, window.N > 4096 ? RenewalMethod::fft : RenewalMethod::direct);
  c.law = RenewalIncrementLaw::build(c.ov, window.N);
  c.pu.assign(static_cast<std::size_t>(budget) + 1, 0.0);
  {
    KahanSum acc;
    for (long v = 0; v <= budget; ++v) {
      acc.add(c.rt.U(v));
      c.pu[static_cast<std::size_t>(v)] = acc.s;
    }
  }
  c.cumh.assign(2 * static_cast<std::size_t>(window.N) + 1, 0.0);
  c.cum2.assign(static_cast<std::size_t>(window.N) + 1, 0.0);
  for (long g = 1; g <= 2 * window.N; ++g) {
    const double gd = static_cast<double>(g);
    c.cumh[static_cast<std::size_t>(g)] =
        c.cumh[static_cast<std::size_t>(g - 1)] + 1.0 / gd;
    if (g <= window.N)
      c.cum2[static_cast<std::size_t>(g)] =
          c.cum2[static_cast<std::size_t>(g - 1)] + 1.0 / (gd * gd);
  }
  c.bridge.resize(static_cast<std::size_t>(bridge_to) + 1);
  for (long v = 1; v <= bridge_to; ++v) {
    auto& cdf = c.bridge[static_cast<std::size_t>(v)];
    cdf.resize(static_cast<std::size_t>(v));
    double acc = 0.0;
    for (long g = 1; g <= v; ++g) {
      acc += c.sigma2 * c.ov.u_sq[static_cast<std::size_t>(g)] *
             c.rt.U(v - g);
      cdf[static_cast<std::size_t>(g - 1)] = acc;
    }
  }
  return c;
}

std::array<long, 2> sample_bridge(const McCtx& c, long v, Rng& rng) {
  std::array<long, 2> p{0, 0};
  while (v > 0) {
    const auto& cdf = c.bridge[static_cast<std::size_t>(v)];
    const double y = rng.uniform() * cdf.back();
    long g = 1 + static_cast<long>(
                     std::lower_bound(cdf.begin(), cdf.end(), y) - cdf.begin());
    if (g > v) g = v;
    const auto dx = c.law.sample_X_given_T(g, rng);
    p[0] += dx[0];
    p[1] += dx[1];
    v -= g;
  }
  return p;
}

// Samples the meeting lane of two pinned lane walks, P(X) propto
// p_u(X) p_v(X - D); the caller multiplies the weight by the exact
// normalizer p_{u+v}(D). Inverse CDF by outward sweep from the mode of the
// product, with the binomial ratio recurrence supplying each step.
long product_lane_sample(long u, long v, long D, Rng& rng) {
  long xlo = std::max(-u, D - v), xhi = std::min(u, D + v);
  if (((xlo + u) & 1L) != 0) ++xlo;
  if (((xhi + u) & 1L) != 0) --xhi;
  long xm = 2 * std::lround(static_cast<double>(u) * static_cast<double>(D) /
                            (2.0 * static_cast<double>(u + v)));
  if (((xm + u) & 1L) != 0) ++xm;
  if (xm < xlo) xm = xlo;
  if (xm > xhi) xm = xhi;
  const double wm = binom_half_pmf(u, xm) * binom_half_pmf(v, xm - D);
  const double t = rng.uniform() * binom_half_pmf(u + v, D);
  double acc = wm;
  if (acc >= t) return xm;
  double wup = wm, wdn = wm;
  long xu = xm, xd = xm;
  while (xu + 2 <= xhi || xd - 2 >= xlo) {
    if (xu + 2 <= xhi) {
      const double ku = static_cast<double>((xu + u) / 2);
      const double ju = static_cast<double>((xu - D + v) / 2);
      wup *= (static_cast<double>(u) - ku) / (ku + 1.0) *
             ((static_cast<double>(v) - ju) / (ju + 1.0));
      xu += 2;
      acc += wup;
      if (acc >= t) return xu;
    }
    if (xd - 2 >= xlo) {
      const double kd = static_cast<double>((xd + u) / 2);
      const double jd = static_cast<double>((xd - D + v) / 2);
      wdn *= kd / (static_cast<double>(u) - kd + 1.0) *
             (jd / (static_cast<double>(v) - jd + 1.0));
      xd -= 2;
      acc += wdn;
      if (acc >= t) return xd;
    }
  }
  return xm;
}

// sum over z of q_{h1}(z - ya) q_{h2}(z - yb)^2: lanes are independent, and
// each lane sum runs over the shorter of the two kernel windows (8 standard
// deviations; the dropped mass is below 1e-14 of the sum).
double closing_lane(long h1, long h2, long d) {
  KahanSum s;
  if (h1 <= h2) {
    const long w = std::min(
        h1, static_cast<long>(8.0 * std::sqrt(static_cast<double>(h1))) + 2);
    long xi = -w;
    if (((xi + h1) & 1L) != 0) ++xi;
    for (; xi <= w; xi += 2) {
      const double p1 = binom_half_pmf(h1, xi);
      const double p2 = binom_half_pmf(h2, xi - d);
      s.add(p1 * p2 * p2);
    }
  } else {
    const long w = std::min(
        h2, static_cast<long>(8.0 * std::sqrt(static_cast<double>(h2))) + 2);
    long eta = -w;
    if (((eta + h2) & 1L) != 0) ++eta;
    for (; eta <= w; eta += 2) {
      const double p2 = binom_half_pmf(h2, eta);
      s.add(binom_half_pmf(h1, eta + d) * p2 * p2);
    }
  }
  return s.s;
}

double closing_e3(long h1, long h2, long dx1, long dx2) {
  return closing_lane(h1, h2, dx1 + dx2) * closing_lane(h1, h2, dx1 - dx2);
}

// Draws u in [1, umax] from an even mixture of two shifted harmonic laws.
// The first shift matches the 1/(time) scale of the convolution normalizer;
// the second sits at the timescale preferred by its exponential factor, so
// configurations with a wide spatial gap still get covered. Returns u and
// the reciprocal of the mixture density.
long mixture_harmonic(const McCtx& c, long umax, long sa, long sb, double uu,
                      double& inv_density) {
  const auto seg = [&](long s) {
    return c.cumh[static_cast<std::size_t>(s + umax)] -
           c.cumh[static_cast<std::size_t>(s)];
  };
  const double ma = seg(sa), mb = seg(sb);
  long s;
  double frac;
  if (uu < 0.5) {
    s = sa;
    frac = 2.0 * uu;
  } else {
    s = sb;
    frac = 2.0 * uu - 1.0;
  }
  const double lo = c.cumh[static_cast<std::size_t>(s)];
  const double tgt = lo + frac * seg(s);
  long u = static_cast<long>(
               std::lower_bound(c.cumh.begin(),
                                c.cumh.begin() + s + umax + 1, tgt) -
               c.cumh.begin()) -
           s;
  if (u < 1) u = 1;
  if (u > umax) u = umax;
  const double dens =
      0.5 / (static_cast<double>(sa + u) * ma) +
      0.5 / (static_cast<double>(sb + u) * mb);
  inv_density = 1.0 / dens;
  return u;
}

struct SiteDraw {
  long z1 = 0, z2 = 0;
  double sgn = 0.0;
};

// Draws a lattice site with probability |phi(z)| / sum |phi|.
struct SiteSampler {
  const TestFunctionGrid* g = nullptr;
  std::vector<double> cdf;

  explicit SiteSampler(const TestFunctionGrid& grid) : g(&grid) {
    cdf.resize(grid.values.size());
    KahanSum acc;
    for (std::size_t i = 0; i < grid.values.size(); ++i) {
      acc.add(std::fabs(grid.values[i]));
      cdf[i] = acc.s;
    }
    if (!(acc.s > 0.0))
      throw std::domain_error("stretch mc: phi vanishes identically");
  }

  SiteDraw draw(Rng& rng) const {
    const double y = rng.uniform() * cdf.back();
    std::size_t i = static_cast<std::size_t>(
        std::lower_bound(cdf.begin(), cdf.end(), y) - cdf.begin());
    if (i >= cdf.size()) i = cdf.size() - 1;
    const long w = 2 * g->radius + 1;
    SiteDraw d;
    d.z1 = static_cast<long>(i) / w - g->radius;
    d.z2 = static_cast<long>(i) % w - g->radius;
    const double v = g->values[i];
    d.sgn = (v > 0.0) ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
    return d;
  }
};

struct StretchDraw {
  double w = 0.0;  // weight, including sigma^(2m) and any phi factors
  long b_last = 0, b_prev = 0;
  std::array<long, 2> y_last{0, 0}, y_prev{0, 0};
};

// Draws one depth-m configuration. Every proposal is an exact truncated
// inverse CDF, so the weight is deterministic given the draw and there is
// no rejection: a_1 from the squared-overlap mass (or uniformly for a
// general phi), each stretch length from the renewal prefix sums with the
// bridge supplying the exact spatial law, each inter-stretch gap from the
// shifted harmonic law matching the 1/(time gap) scale of the convolution
// normalizer it picks up, and each meeting point from the product of the
// two incoming walk kernels. phis == nullptr means the bare point start
// q_{a1}(x1)^2 q_{a2}(x2) (the 1/N^3 of the averaged field cancels against
// a point mass of size N).
bool nt_draw_config(const McCtx& c, int m, const SiteSampler* phis, Rng& rng,
                    const double* uni, StretchDraw& out) {
  const long budget = c.budget;
  double w = 1.0;
  int ucur = 0;
  auto tu = [&]() { return uni ? uni[ucur++] : rng.uniform_pos(); };

  const long rest0 = m - 1;  // unit gaps still owed after the first block
  const long amax = budget - rest0;
  if (amax < 1) return false;
  long a1;
  std::array<long, 2> x{0, 0};
  if (!phis) {
    const double tgt = tu() * c.ov.R(amax);
    a1 = static_cast<long>(std::lower_bound(c.ov.partial.begin() + 1,
                                            c.ov.partial.begin() + amax + 1,
                                            tgt) -
                           c.ov.partial.begin());
    if (a1 > amax) a1 = amax;
    if (a1 < 1) a1 = 1;
    w *= c.ov.R(amax);
    x = c.law.sample_X_given_T(a1, rng);
  } else {
    a1 = 1 + static_cast<long>(tu() * static_cast<double>(amax));
    if (a1 > amax) a1 = amax;
    w *= static_cast<double>(amax);
    const SiteDraw z = phis->draw(rng);
    const SiteDraw zp = phis->draw(rng);
    const double s1 = phis->cdf.back();
    w *= s1 * s1 * z.sgn * zp.sgn * walk_prob(2 * a1, zp.z1 - z.z1,
                                              zp.z2 - z.z2);
    if (w == 0.0) return false;
    const long dd1 = zp.z1 - z.z1 + zp.z2 - z.z2;
    const long dd2 = zp.z1 - z.z1 - (zp.z2 - z.z2);
    const long X1 = product_lane_sample(a1, a1, dd1, rng);
    const long X2 = product_lane_sample(a1, a1, dd2, rng);
    x = {z.z1 + (X1 + X2) / 2, z.z2 + (X1 - X2) / 2};
  }

  long vmax = budget - a1 - rest0;
  {
    const double tgt = tu() * c.pu[static_cast<std::size_t>(vmax)];
    long v1 = 0;
    if (tgt > 1.0)
      v1 = static_cast<long>(std::lower_bound(c.pu.begin(),
                                              c.pu.begin() + vmax + 1, tgt) -
                             c.pu.begin());
    if (v1 > vmax) v1 = vmax;
    w *= c.pu[static_cast<std::size_t>(vmax)];
    const auto dy = sample_bridge(c, v1, rng);
    out.y_last = {x[0] + dy[0], x[1] + dy[1]};
    out.b_last = a1 + v1;
  }
  out.y_prev = out.y_last;
  out.b_prev = out.b_last;

  for (int i = 2; i <= m; ++i) {
    const long rest = m - i;
    const long umax = budget - out.b_last - rest;
    if (umax < 1) return false;
    const long shift = (i == 2) ? out.b_last : out.b_last - out.b_prev;

    std::array<long, 2> anc{0, 0};
    if (i == 2) {
      if (phis) {
        const SiteDraw zpp = phis->draw(rng);
        w *= phis->cdf.back() * zpp.sgn;
        if (w == 0.0) return false;
        anc = {zpp.z1, zpp.z2};
      }
    } else {
      anc = out.y_prev;
    }
    const long e1 = anc[0] - out.y_last[0], e2 = anc[1] - out.y_last[1];
    const long ustar = (e1 * e1 + e2 * e2 - shift) / 2;
    long sb = std::max(shift, ustar);
    if (const long scap = 2 * c.N - umax; sb > scap) sb = scap;
    double invd = 0.0;
    const long u = mixture_harmonic(c, umax, shift, sb, tu(), invd);
    w *= invd;
    const long ai = out.b_last + u;
    const long tv = shift + u;

    // meeting point from the product of the two incoming kernels; the
    // normalizer is their convolution, known in closed form
    w *= walk_prob(u + tv, e1, e2);
    if (w == 0.0) return false;
    const long X1 = product_lane_sample(u, tv, e1 + e2, rng);
    const long X2 = product_lane_sample(u, tv, e1 - e2, rng);
    const std::array<long, 2> xi = {out.y_last[0] + (X1 + X2) / 2,
                                    out.y_last[1] + (X1 - X2) / 2};

    vmax = budget - ai - rest;
    const double tgt3 = tu() * c.pu[static_cast<std::size_t>(vmax)];
    long vi = 0;
    if (tgt3 > 1.0)
      vi = static_cast<long>(std::lower_bound(c.pu.begin(),
                                              c.pu.begin() + vmax + 1, tgt3) -
                             c.pu.begin());
    if (vi > vmax) vi = vmax;
    w *= c.pu[static_cast<std::size_t>(vmax)];
    const auto dyi = sample_bridge(c, vi, rng);
    out.y_prev = out.y_last;
    out.b_prev = out.b_last;
    out.y_last = {xi[0] + dyi[0], xi[1] + dyi[1]};
    out.b_last = ai + vi;
  }
  w *= std::pow(c.sigma2, m);
  out.w = w;
  return true;
}

struct McOut {
  double mean = 0.0, se = 0.0;
};

// Latin hypercube over the 2m time uniforms per batch; spatial draws use
// the raw stream. Standard error from the 32 batch means.
template <class Closer>
McOut run_mc(const McCtx& c, int m, const SiteSampler* phis, long samples,
             Rng base, Closer&& closer) {
  const int nb = 32;
  const long per = std::max(samples / nb, 4L);
  const int dims = 2 * m;
  std::vector<std::vector<long>> perm(static_cast<std::size_t>(dims));
  std::vector<double> uni(static_cast<std::size_t>(dims));
  std::vector<double> bmean(static_cast<std::size_t>(nb));
  for (int b = 0; b < nb; ++b) {
    Rng rng = base.split(static_cast<std::uint64_t>(b));
    for (auto& p : perm) {
      p.resize(static_cast<std::size_t>(per));
      for (long j = 0; j < per; ++j) p[static_cast<std::size_t>(j)] = j;
      for (long j = per - 1; j > 0; --j)
        std::swap(p[static_cast<std::size_t>(j)],
                  p[static_cast<std::size_t>(rng.below(
                      static_cast<std::uint64_t>(j + 1)))]);
    }
    KahanSum acc;
    for (long j = 0; j < per; ++j) {
      for (int d = 0; d < dims; ++d)
        uni[static_cast<std::size_t>(d)] =
            (static_cast<double>(perm[static_cast<std::size_t>(d)]
                                     [static_cast<std::size_t>(j)]) +
             rng.uniform_pos()) /
            static_cast<double>(per);
      StretchDraw dr;
      double val = 0.0;
      if (nt_draw_config(c, m, phis, rng, uni.data(), dr))
        val = closer(dr, rng);
      acc.add(val);
    }
    bmean[static_cast<std::size_t>(b)] = acc.s / static_cast<double>(per);
  }
  McOut o;
  for (double x : bmean) o.mean += x;
  o.mean /= nb;
  double var = 0.0;
  for (double x : bmean) var += (x - o.mean) * (x - o.mean);
  var /= (nb - 1.0);
  o.se = std::sqrt(var / nb);
  return o;
}

// Reported per-depth envelope on the weighted terms: geometric in the
// contraction factor e * [sigma^2 sum_v e^(-k v/N) U(v)] with the kernel
// sup constant c_hat = max_g g max_x q_g(x) and the chain-integral bound
// 2e * 32^(m-2). Summed term by term; certified only if the terms decrease
// monotonically all the way down.
void fill_envelope(const McCtx& c, double prefactor, int m_max,
                   StretchSeries& out) {
  double c_hat = 0.0;
  for (long g = 1; g <= c.budget; ++g) {
    const double p = binom_half_pmf(g, g % 2);
    c_hat = std::max(c_hat, static_cast<double>(g) * p * p);
  }
  auto su = [&](double lam) {
    KahanSum s;
    for (long v = 0; v <= c.budget; ++v)
      s.add(std::exp(-lam * static_cast<double>(v) /
                     static_cast<double>(c.N)) *
            c.rt.U(v));
    return c.sigma2 * s.s;
  };
  const double lp = std::log(prefactor) + std::log(2.0 * std::exp(1.0) * 3.0);
  KahanSum tail;
  double prev = std::numeric_limits<double>::infinity();
  bool certified = true;
  for (int k = m_max + 1; k <= m_max + 400; ++k) {
    const double lterm = lp + (k - 1) * std::log(2.0) +
                         k * (1.0 + std::log(su(k))) +
                         (k - 2) * (std::log(c_hat) + std::log(32.0));
    const double term = std::exp(lterm);
    if (!std::isfinite(term) || term >= prev) {
      certified = false;
      break;
    }
    tail.add(term);
    if (term < 1e-300) break;
    if (k == m_max + 400) {
      // still decreasing at the cutoff: close with the last observed ratio
      const double r = term / prev;
      tail.add(term * r / (1.0 - r));
    }
    prev = term;
  }
  out.tail_envelope =
      certified ? tail.s : std::numeric_limits<double>::infinity();
  out.tail_envelope_certified = certified && std::isfinite(tail.s);
}

// Closes a truncated positive series from the ratio of the last terms,
// pooled over three points when available. The tail estimate is geometric
// with the uncertainty of the ratio propagated through r/(1-r); a ratio at
// or above 0.98 yields no estimate and the capped geometric majorant of the
// last term is charged to the error instead.
void geometric_close(const std::vector<double>& wv,
                     const std::vector<double>& ws, double& sum, double& se) {
  KahanSum acc, accv;
  for (double v : wv) acc.add(v);
  for (double s : ws) accv.add(s * s);
  sum = acc.s;
  se = std::sqrt(accv.s);
  const std::size_t n = wv.size();
  if (n < 2 || !(wv[n - 1] > 0.0) || !(wv[n - 2] > 0.0)) {
    if (n >= 1) se += std::fabs(wv[n - 1]);
    return;
  }
  double r, rr2;
  if (n >= 3 && wv[n - 3] > 0.0) {
    r = (wv[n - 1] + wv[n - 2]) / (wv[n - 2] + wv[n - 3]);
    rr2 = std::hypot(ws[n - 2], ws[n - 3]) / (wv[n - 2] + wv[n - 3]);
  } else {
    r = wv[n - 1] / wv[n - 2];
    rr2 = ws[n - 2] / wv[n - 2];
  }
  if (r < 0.98) {
    const double tail = wv[n - 1] * r / (1.0 - r);
    const double rr1 = ws[n - 1] / wv[n - 1];
    const double ser = r * std::sqrt(rr1 * rr1 + rr2 * rr2);
    sum += tail;
    se += wv[n - 1] * ser / ((1.0 - r) * (1.0 - r)) +
          r / (1.0 - r) * ws[n - 1];
  } else {
    se += std::fabs(wv[n - 1]) * 49.0;
  }
}

// State of one particle: the pair after its last renewal collision and the
// walk that left at the last switch.
struct StretchState {
  long b_last = 0, b_prev = 0;
  std::array<long, 2> y_last{0, 0}, y_prev{0, 0};
};

// One sequential population for the point-start stretch chain: stage k
// extends every particle by one stretch and evaluates the depth-k closing
// factor. Particles carry persistent weights; when the effective sample size
// drops below half the population the weights are folded into the running
// normalizer and the population is resampled systematically. The normalizer
// times the stage mean of weighted closes is an unbiased estimate of the
// depth-k value, and the variance stays roughly linear in the depth instead
// of compounding.
template <class Close>
std::vector<double> smc_island(const McCtx& c, long n, int kmax, Rng& rng,
                               Close&& close) {
  const long budget = c.budget;
  std::vector<StretchState> pop(static_cast<std::size_t>(n));
  std::vector<double> wt(static_cast<std::size_t>(n), 0.0);
  std::vector<double> vals;

  for (long i = 0; i < n; ++i) {
    const double tgt = rng.uniform() * c.ov.R(budget);
    long a1 = static_cast<long>(
        std::lower_bound(c.ov.partial.begin() + 1,
                         c.ov.partial.begin() + budget + 1, tgt) -
        c.ov.partial.begin());
    if (a1 < 1) a1 = 1;
    if (a1 > budget) a1 = budget;
    const auto x = c.law.sample_X_given_T(a1, rng);
    const long vmax = budget - a1;
    const double tv = rng.uniform() * c.pu[static_cast<std::size_t>(vmax)];
    long v = 0;
    if (tv > 1.0)
      v = static_cast<long>(std::lower_bound(c.pu.begin(),
                                             c.pu.begin() + vmax + 1, tv) -
                            c.pu.begin());
    if (v > vmax) v = vmax;
    const auto dy = sample_bridge(c, v, rng);
    StretchState& p = pop[static_cast<std::size_t>(i)];
    p.b_last = p.b_prev = a1 + v;
    p.y_last = p.y_prev = {x[0] + dy[0], x[1] + dy[1]};
    wt[static_cast<std::size_t>(i)] =
        c.sigma2 * c.ov.R(budget) * c.pu[static_cast<std::size_t>(vmax)];
  }

  std::vector<double> cum(static_cast<std::size_t>(n));
  std::vector<StretchState> np(static_cast<std::size_t>(n));
  double zprod = 1.0;
  // folds the weights into the normalizer and equalizes the population when
  // they have grown too uneven
  const auto maybe_resample = [&]() -> bool {
    KahanSum w, w2;
    for (long i = 0; i < n; ++i) {
      const double v = wt[static_cast<std::size_t>(i)];
      w.add(v);
      w2.add(v * v);
    }
    if (!(w.s > 0.0)) return false;
    if (w.s * w.s > 0.5 * static_cast<double>(n) * w2.s) return true;
    KahanSum cw;
    for (long i = 0; i < n; ++i) {
      cw.add(wt[static_cast<std::size_t>(i)]);
      cum[static_cast<std::size_t>(i)] = cw.s;
    }
    const double step = w.s / static_cast<double>(n);
    double pos = rng.uniform() * step;
    long idx = 0;
    for (long j = 0; j < n; ++j) {
      while (idx < n - 1 && cum[static_cast<std::size_t>(idx)] < pos) ++idx;
      np[static_cast<std::size_t>(j)] = pop[static_cast<std::size_t>(idx)];
      pos += step;
    }
    pop.swap(np);
    zprod *= step;
    std::fill(wt.begin(), wt.end(), 1.0);
    return true;
  };

  bool alive = maybe_resample();
  for (int k = 2; k <= kmax && alive; ++k) {
    KahanSum closed;
    for (long i = 0; i < n; ++i) {
      StretchState& p = pop[static_cast<std::size_t>(i)];
      double& w = wt[static_cast<std::size_t>(i)];
      if (!(w > 0.0)) continue;
      const long umax = budget - p.b_last;
      if (umax < 1) {
        w = 0.0;
        continue;
      }
      const long shift = (k == 2) ? p.b_last : p.b_last - p.b_prev;
      const std::array<long, 2> anc =
          (k == 2) ? std::array<long, 2>{0, 0} : p.y_prev;
      const long e1 = anc[0] - p.y_last[0], e2 = anc[1] - p.y_last[1];
      const long ustar = (e1 * e1 + e2 * e2 - shift) / 2;
      long sb = std::max(shift, ustar);
      if (const long scap = 2 * c.N - umax; sb > scap) sb = scap;
      double invd = 0.0;
      const long u = mixture_harmonic(c, umax, shift, sb,
                                      rng.uniform_pos(), invd);
      const long tvv = shift + u;
      const double wp = walk_prob(u + tvv, e1, e2);
      if (wp == 0.0) {
        w = 0.0;
        continue;
      }
      const long X1 = product_lane_sample(u, tvv, e1 + e2, rng);
      const long X2 = product_lane_sample(u, tvv, e1 - e2, rng);
      const std::array<long, 2> xi = {p.y_last[0] + (X1 + X2) / 2,
                                      p.y_last[1] + (X1 - X2) / 2};
      const long ai = p.b_last + u;
      const long vmax = budget - ai;
      const double tv2 = rng.uniform() * c.pu[static_cast<std::size_t>(vmax)];
      long v = 0;
      if (tv2 > 1.0)
        v = static_cast<long>(std::lower_bound(c.pu.begin(),
                                               c.pu.begin() + vmax + 1, tv2) -
                              c.pu.begin());
      if (v > vmax) v = vmax;
      const auto dy = sample_bridge(c, v, rng);
      p.y_prev = p.y_last;
      p.b_prev = p.b_last;
      p.y_last = {xi[0] + dy[0], xi[1] + dy[1]};
      p.b_last = ai + v;
      w *= c.sigma2 * invd * wp * c.pu[static_cast<std::size_t>(vmax)];
      if (w > 0.0) closed.add(w * close(p, rng));
    }
    vals.push_back(zprod * closed.s / static_cast<double>(n));
    alive = maybe_resample();
  }
  vals.resize(static_cast<std::size_t>(kmax - 1), 0.0);
  return vals;
}

// Runs 32 independent islands to the depth cap (the weighted terms rise for
// many depths before they decay, and the sequential population makes extra
// depth cheap), weights depth m by its stretch multiplicity, and closes
// whatever tail is left past the cap geometrically.
template <class Close>
void smc_series(const McCtx& c, long samples, Rng base, Close&& close,
                double& sum, double& se) {
  const int nb = 32, kmax = 72;
  const long n = std::max(samples / nb, 64L);
  std::vector<std::vector<double>> island(static_cast<std::size_t>(nb));
  for (int b = 0; b < nb; ++b) {
    Rng rng = base.split(static_cast<std::uint64_t>(b));
    island[static_cast<std::size_t>(b)] = smc_island(c, n, kmax, rng, close);
  }
  std::vector<double> wv, ws;
  for (int k = 2; k <= kmax; ++k) {
    const double wk = 3.0 * std::ldexp(1.0, k - 1);
    double mean = 0.0;
    for (int b = 0; b < nb; ++b)
      mean += island[static_cast<std::size_t>(b)][static_cast<std::size_t>(
          k - 2)];
    mean /= nb;
    double var = 0.0;
    for (int b = 0; b < nb; ++b) {
      const double d = island[static_cast<std::size_t>(b)]
                             [static_cast<std::size_t>(k - 2)] -
                       mean;
      var += d * d;
    }
    var /= (nb - 1.0);
    wv.push_back(wk * mean);
    ws.push_back(wk * std::sqrt(var / nb));
    if (std::getenv("POLYLAB_NT_DUMP"))
      std::fprintf(stderr, "  depth %d: %.4g +- %.3g\n", k, wv.back(),
                   ws.back());
  }
  geometric_close(wv, ws, sum, se);
}

void fill_tails(StretchSeries& out) {
  const std::size_t n = out.values.size();
  if (n >= 2) {
    const double wl = out.weighted(out.m_max());
    const double wp = out.weighted(out.m_max() - 1);
    if (wp != 0.0) out.tail_ratio = wl / wp;
    bool pos = true;
    for (double v : out.values) pos = pos && v > 0.0;
    double rprev = 0.0;
    if (n >= 3) {
      const double wpp = out.weighted(out.m_max() - 2);
      if (wpp != 0.0) rprev = wp / wpp;
    }
    out.tail_valid = pos && out.tail_ratio > 0.0 && out.tail_ratio < 0.95 &&
                     (n < 3 || out.tail_ratio <= 1.25 * rprev);
    if (out.tail_valid)
      out.tail_geometric = wl * out.tail_ratio / (1.0 - out.tail_ratio);
  }
  for (std::size_t i = 0; i < n; ++i)
    if (out.std_err[i] > 0.5 * std::fabs(out.values[i]))
      out.precision_warning = true;
}

}  // namespace

StretchSeries stretch_series_mc(const CriticalWindow& window,
                                const TestFunctionGrid& phi,
                                const TestFunctionGrid& psi, double t,
                                int m_max, long samples, std::uint64_t seed) {
  if (phi.N != window.N || psi.N != window.N)
    throw std::invalid_argument("stretch mc: grids built for another N");
  if (!phi.compact() || phi.radius < 0)
    throw std::domain_error("stretch mc: phi must be compactly supported");
  double cpsi = 0.0;
  if (!psi.is_constant(&cpsi))
    throw std::domain_error("stretch mc: psi must be constant");
  if (!(t > 0.0) || t > 1.0)
    throw std::domain_error("stretch mc: t must lie in (0, 1]");
  if (m_max < 2 || m_max > 8)
    throw std::domain_error("stretch mc: m_max in 2..8");
  if (samples < 1024) throw std::domain_error("stretch mc: samples >= 1024");

  const long T = std::lround(t * static_cast<double>(window.N));
  StretchSeries out;
  out.N = window.N;
  out.T = T;
  out.method = "simplex-mc";
  const double cpsi3 = cpsi * cpsi * cpsi;
  if (T < 3 || window.sigma2 == 0.0 || cpsi3 == 0.0) {
    out.tail_valid = true;
    return out;
  }

  const McCtx c = build_mc_ctx(window, T - 1);
  const bool point = phi.is_point_mass();
  std::optional<SiteSampler> sampler;
  if (!point) sampler.emplace(phi);
  const SiteSampler* phis = point ? nullptr : &*sampler;
  const double norm =
      point ? cpsi3
            : cpsi3 / (static_cast<double>(window.N) *
                       static_cast<double>(window.N) *
                       static_cast<double>(window.N));
  Rng base(seed);
  const int mm = static_cast<int>(std::min<long>(m_max, T - 1));
  KahanSum nt, ntv;
  for (int m = 2; m <= mm; ++m) {
    McOut r = run_mc(c, m, phis, samples, base.split(1000 + m),
                     [&](const StretchDraw& d, Rng&) { return d.w * norm; });
    out.values.push_back(r.mean);
    out.std_err.push_back(r.se);
    const double wk = 3.0 * std::ldexp(1.0, m - 1);
    nt.add(wk * r.mean);
    ntv.add(wk * r.se * wk * r.se);
  }
  out.nt_sum = nt.s;
  out.nt_sum_se = std::sqrt(ntv.s);
  fill_tails(out);
  if (point)
    fill_envelope(c, c.ov.R(c.budget) * cpsi3, out.m_max(), out);
  else
    out.tail_envelope = std::numeric_limits<double>::infinity();
  return out;
}

StretchSeries stretch_third_moment_nt(const CriticalWindow& window,
                                      const TestFunctionGrid& phi,
                                      const TestFunctionGrid& psi, double t,
                                      int m_max, long samples,
                                      std::uint64_t seed) {
  double cpsi = 0.0;
  if (window.N <= 12 && phi.is_point_mass() && psi.is_constant(&cpsi))
    return stretch_series_transfer(window, phi, psi, t);
  if (m_max > 6)
    throw std::domain_error("stretch nt: m_max <= 6 on the mc path");
  return stretch_series_mc(window, phi, psi, t, m_max, samples, seed);
}

// ---------------------------------------------------------------------------
// triple resummation

TripleResummation triple_resummation(const CriticalWindow& window,
                                     long samples, std::uint64_t seed) {
  TripleResummation out;
  out.N = window.N;
  out.xi3_abs = std::fabs(window.xi3);
  if (window.sigma2 == 0.0 || out.xi3_abs == 0.0) {
    out.geometric_valid = true;
    return out;
  }
  const long N = window.N;
  const long a0 = std::min(N, 12L);
  out.exact_horizon = a0;
  const double x3 = out.xi3_abs;
  const double s2 = window.sigma2;

  // exact head: pinned pairwise third moments for a <= a0
  double head_dp = 0.0;
  for (long a = 1; a <= a0; ++a) {
    CriticalWindow wa = window;
    wa.N = a;
    head_dp += third_moment_dp_bridged(wa, TripleWeight::pairwise_only);
  }

  // sum_z q_a(z)^3 for every a: one incremental Pascal row
  std::vector<double> q3(static_cast<std::size_t>(N) + 1, 0.0);
  {
    std::vector<double> row{1.0}, next;
    for (long a = 1; a <= N; ++a) {
      next.assign(static_cast<std::size_t>(a) + 1, 0.0);
      for (long k = 0; k < a; ++k) {
        next[static_cast<std::size_t>(k)] +=
            0.5 * row[static_cast<std::size_t>(k)];
        next[static_cast<std::size_t>(k) + 1] +=
            0.5 * row[static_cast<std::size_t>(k)];
      }
      row.swap(next);
      KahanSum cs;
      for (double p : row) cs.add(p * p * p);
      q3[static_cast<std::size_t>(a)] = cs.s * cs.s;
    }
  }
  KahanSum q3head, q3tail;
  for (long a = 1; a <= a0; ++a) q3head.add(q3[static_cast<std::size_t>(a)]);
  for (long a = a0 + 1; a <= N; ++a)
    q3tail.add(q3[static_cast<std::size_t>(a)]);

  McCtx c = build_mc_ctx(window, N - 1, N);
  solve_renewal_spacetime(c.rt, window, c.ov, static_cast<int>(a0));

  // exact sigma^{-2} sum_z q_a(z) U_N(a, z) for a <= a0
  double vhead = 0.0;
  {
    KahanSum acc;
    for (long a = 1; a <= a0; ++a) {
      const std::vector<double> row = binom_half_row(a);
      KahanSum va;
      for (long i = 0; i <= a; ++i)
        for (long j = 0; j <= a; ++j)
          va.add(row[static_cast<std::size_t>(i)] *
                 row[static_cast<std::size_t>(j)] *
                 c.rt.U(a, i + j - a, i - j));
      acc.add(va.s / s2);
    }
    vhead = acc.s;
  }
  const double stretch_head = head_dp + 2.0 * q3head.s - 3.0 * vhead;

  double vtail = 0.0, vtail_se = 0.0;
  double sttail = 0.0, sttail_se = 0.0;
  Rng base(seed);
  if (N > a0) {
    // sigma^{-2} V tail by importance 1/a over (a0, N]; the bridge draw
    // turns sum_z q U into U(a) E[q_a at the bridge endpoint]
    {
      const double lo = c.cumh[static_cast<std::size_t>(a0)];
      const double mass = c.cumh[static_cast<std::size_t>(N)] - lo;
      const int nb = 32;
      const long per = std::max(samples / nb, 4L);
      std::vector<double> bm(static_cast<std::size_t>(nb));
      for (int b = 0; b < nb; ++b) {
        Rng rng = base.split(200 + static_cast<std::uint64_t>(b));
        KahanSum acc;
        for (long j = 0; j < per; ++j) {
          const double tgt = lo + rng.uniform_pos() * mass;
          long a = static_cast<long>(
              std::lower_bound(c.cumh.begin(), c.cumh.end(), tgt) -
              c.cumh.begin());
          if (a <= a0) a = a0 + 1;
          if (a > N) a = N;
          const auto y = sample_bridge(c, a, rng);
          acc.add(mass * static_cast<double>(a) * c.rt.U(a) *
                  walk_prob(a, y[0], y[1]) / s2);
        }
        bm[static_cast<std::size_t>(b)] = acc.s / static_cast<double>(per);
      }
      for (double v : bm) vtail += v;
      vtail /= nb;
      double var = 0.0;
      for (double v : bm) var += (v - vtail) * (v - vtail);
      vtail_se = std::sqrt(var / (nb - 1.0) / nb);
    }

    // stretch tail: the closing gap comes from a mixture of the
    // inverse-square law (which dominates the closing kernel and keeps the
    // weights bounded) and a shifted harmonic law at the timescale the
    // spatial spread of the close prefers
    smc_series(
        c, samples, base.split(50),
        [&](const StretchState& p, Rng& rng) {
          const long gmin = std::max(p.b_last, a0) + 1 - p.b_last;
          const long gmax = N - p.b_last;
          if (gmax < gmin) return 0.0;
          const long dy1 = p.y_last[0] - p.y_prev[0];
          const long dy2 = p.y_last[1] - p.y_prev[1];
          const long db = p.b_last - p.b_prev;
          long s3 = std::max(1L, dy1 * dy1 + dy2 * dy2 - db);
          if (const long cap = 2 * N - gmax; s3 > cap) s3 = cap;
          const double m2 = c.cum2[static_cast<std::size_t>(gmax)] -
                            c.cum2[static_cast<std::size_t>(gmin - 1)];
          const double m3 =
              c.cumh[static_cast<std::size_t>(s3 + gmax)] -
              c.cumh[static_cast<std::size_t>(s3 + gmin - 1)];
          long g;
          if (rng.uniform() < 0.5) {
            const double tgt = c.cum2[static_cast<std::size_t>(gmin - 1)] +
                               rng.uniform_pos() * m2;
            g = static_cast<long>(
                std::lower_bound(c.cum2.begin(), c.cum2.begin() + gmax + 1,
                                 tgt) -
                c.cum2.begin());
          } else {
            const double tgt =
                c.cumh[static_cast<std::size_t>(s3 + gmin - 1)] +
                rng.uniform_pos() * m3;
            g = static_cast<long>(
                    std::lower_bound(c.cumh.begin(),
                                     c.cumh.begin() + s3 + gmax + 1, tgt) -
                    c.cumh.begin()) -
                s3;
          }
          if (g < gmin) g = gmin;
          if (g > gmax) g = gmax;
          const double gd = static_cast<double>(g);
          const double dens = 0.5 / (gd * gd * m2) +
                              0.5 / (static_cast<double>(s3 + g) * m3);
          return closing_e3(db + g, g, dy1, dy2) / dens;
        },
        sttail, sttail_se);
  }

  out.piece_q3 = x3 * (q3head.s + q3tail.s);
  out.piece_qvar = 3.0 * x3 * ((vhead - q3head.s) + (vtail - q3tail.s));
  out.piece_qvar_se = 3.0 * x3 * vtail_se;
  out.piece_stretch = x3 * (stretch_head + sttail);
  out.piece_stretch_se = x3 * sttail_se;
  out.rho = out.piece_q3 + out.piece_qvar + out.piece_stretch;
  out.rho_se = std::sqrt(out.piece_qvar_se * out.piece_qvar_se +
                         out.piece_stretch_se * out.piece_stretch_se);
  out.geometric_valid = out.rho < 1.0;

  // closing block: sup over horizons of 1 + 3 Var + (no-triple stretch sum);
  // every term grows with the horizon, so the sup sits at N
  const double var_n = c.pu[static_cast<std::size_t>(N - 1)] - 1.0;
  double mnt = 0.0, mnt_se = 0.0;
  if (N <= 12) {
    StretchSeries s = stretch_series_transfer(
        window, TestFunctionGrid::point_mass(N),
        TestFunctionGrid::constant(N, 1.0), 1.0);
    mnt = s.nt_sum;
  } else {
    smc_series(
        c, samples, base.split(800),
        [](const StretchState&, Rng&) { return 1.0; }, mnt, mnt_se);
  }
  out.endpoint_sup = 1.0 + 3.0 * var_n + mnt;
  out.endpoint_sup_se = mnt_se;
  out.triple_bound = out.geometric_valid
                         ? out.rho * out.endpoint_sup / (1.0 - out.rho)
                         : std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace polylab
