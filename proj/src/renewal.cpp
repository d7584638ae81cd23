#include "polylab/renewal.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <stdexcept>

#include "fft_internal.hpp"

namespace polylab {

RenewalIncrementLaw RenewalIncrementLaw::build(const OverlapTable& overlap,
                                               long N) {
  if (N < 1 || overlap.size() < N)
    throw std::domain_error("RenewalIncrementLaw: overlap table too short");
  RenewalIncrementLaw law;
  law.N = N;
  law.R_N = overlap.R(N);
  law.mass.assign(static_cast<std::size_t>(N) + 1, 0.0);
  law.cdf.assign(static_cast<std::size_t>(N) + 1, 0.0);
  for (long n = 1; n <= N; ++n) {
    law.mass[static_cast<std::size_t>(n)] =
        overlap.u_sq[static_cast<std::size_t>(n)] / law.R_N;
    law.cdf[static_cast<std::size_t>(n)] =
        law.cdf[static_cast<std::size_t>(n) - 1] +
        law.mass[static_cast<std::size_t>(n)];
  }
  return law;
}

long RenewalIncrementLaw::sample_T(Rng& rng) const {
  double u = rng.uniform() * cdf[static_cast<std::size_t>(N)];
  auto it = std::upper_bound(cdf.begin() + 1, cdf.end(), u);
  long n = static_cast<long>(it - cdf.begin());
  return std::min(n, N);
}

namespace {

// k ~ C(n,k)^2 / C(2n,n) on 0..n (the rotated-coordinate marginal of the
// squared-kernel law). Greedy inversion outward from the mode; pmf values
// maintained by exact multiplicative ratios.
long sample_squared_binomial_index(long n, Rng& rng) {
  if (n == 0) return 0;
  long m = n / 2;
  double log_hm = 2.0 * (std::lgamma(static_cast<double>(n) + 1.0) -
                         std::lgamma(static_cast<double>(m) + 1.0) -
                         std::lgamma(static_cast<double>(n - m) + 1.0)) -
                  (std::lgamma(2.0 * static_cast<double>(n) + 1.0) -
                   2.0 * std::lgamma(static_cast<double>(n) + 1.0));
  double hm = std::exp(log_hm);
  double u = rng.uniform();
  double cum = hm;
  if (u < cum) return m;
  long kl = m, kr = m;
  double hl = hm, hr = hm;
  for (;;) {
    double next_l = 0.0, next_r = 0.0;
    if (kl > 0) {
      double r = static_cast<double>(kl) / static_cast<double>(n - kl + 1);
      next_l = hl * r * r;
    }
    if (kr < n) {
      double r = static_cast<double>(n - kr) / static_cast<double>(kr + 1);
      next_r = hr * r * r;
    }
    if (next_l == 0.0 && next_r == 0.0) return m;  // mass exhausted (roundoff)
    if (next_r >= next_l) {
      ++kr;
      hr = next_r;
      cum += hr;
      if (u < cum) return kr;
    } else {
      --kl;
      hl = next_l;
      cum += hl;
      if (u < cum) return kl;
    }
  }
}

}  // namespace

std::array<long, 2> RenewalIncrementLaw::sample_X_given_T(long n,
                                                          Rng& rng) const {
  long ka = sample_squared_binomial_index(n, rng);
  long kb = sample_squared_binomial_index(n, rng);
  long alpha = 2 * ka - n;
  long beta = 2 * kb - n;
  return {(alpha + beta) / 2, (alpha - beta) / 2};
}

std::vector<RenewalPathPoint> sample_renewal_path(
    const RenewalIncrementLaw& law, int steps, Rng& rng) {
  if (steps < 1) throw std::domain_error("sample_renewal_path: steps >= 1");
  std::vector<RenewalPathPoint> path(static_cast<std::size_t>(steps));
  long tau = 0, x1 = 0, x2 = 0;
  for (int k = 0; k < steps; ++k) {
    long t = law.sample_T(rng);
    std::array<long, 2> dx = law.sample_X_given_T(t, rng);
    tau += t;
    x1 += dx[0];
    x2 += dx[1];
    path[static_cast<std::size_t>(k)] = {tau, x1, x2};
  }
  return path;
}

// ---------------------------------------------------------------------------
// temporal solve

namespace {

void check_window(const CriticalWindow& window, const OverlapTable& overlap) {
  if (overlap.size() < window.N)
    throw std::domain_error("renewal: overlap table shorter than window N");
  if (!(window.lambda_N > 0.0) || window.lambda_N > 2.0)
    throw std::runtime_error(
        "renewal: lambda_N outside the convergent range (diverging series)");
}

using detail::fft;

// acc[n] += sum_{m in [l, mid)} U[m] * f[n-m] for n in [mid, r), by FFT.
void cdq_block(const std::vector<double>& U, const std::vector<double>& f,
               std::vector<double>& acc, std::size_t l, std::size_t mid,
               std::size_t r) {
  std::size_t la = mid - l;          // U segment length
  std::size_t lb = r - l;            // kernel offsets 0..lb-1 used
  std::size_t need = la + lb;
  std::size_t sz = 1;
  while (sz < need) sz <<= 1;
  std::vector<std::complex<double>> A(sz), B(sz);
  for (std::size_t i = 0; i < la; ++i) A[i] = U[l + i];
  for (std::size_t i = 1; i < lb && i < f.size(); ++i) B[i] = f[i];
  fft(A, false);
  fft(B, false);
  for (std::size_t i = 0; i < sz; ++i) A[i] *= B[i];
  fft(A, true);
  for (std::size_t n = mid; n < r; ++n) acc[n] += A[n - l].real();
}

void cdq(std::vector<double>& U, const std::vector<double>& f,
         std::vector<double>& acc, std::size_t l, std::size_t r) {
  if (r - l == 1) {
    if (l > 0) U[l] = acc[l];
    return;
  }
  std::size_t mid = l + (r - l) / 2;
  cdq(U, f, acc, l, mid);
  if (r - l <= 64) {
    for (std::size_t n = mid; n < r; ++n) {
      double s = 0.0;
      for (std::size_t m = l; m < mid; ++m) s += U[m] * f[n - m];
      acc[n] += s;
    }
  } else {
    cdq_block(U, f, acc, l, mid, r);
  }
  cdq(U, f, acc, mid, r);
}

}  // namespace

std::vector<double> renewal_time_distribution(const RenewalIncrementLaw& law,
                                              int k) {
  if (k < 0) throw std::domain_error("renewal_time_distribution: k < 0");
  const std::size_t n1 = static_cast<std::size_t>(law.N) + 1;
  std::size_t sz = 1;
  while (sz < 2 * n1) sz <<= 1;
  std::vector<std::complex<double>> step(sz, 0.0);
  for (std::size_t n = 1; n < n1; ++n) step[n] = law.mass[n];
  fft(step, false);
  std::vector<double> dist(n1, 0.0);
  dist[0] = 1.0;
  for (int r = 0; r < k; ++r) {
    std::vector<std::complex<double>> cur(sz, 0.0);
    for (std::size_t n = 0; n < n1; ++n) cur[n] = dist[n];
    fft(cur, false);
    for (std::size_t i = 0; i < sz; ++i) cur[i] *= step[i];
    fft(cur, true);
    // Mass pushed past the horizon can never return; dropping it keeps the
    // vector as the sub-probability law of tau_k on [0, N].
    for (std::size_t n = 0; n < n1; ++n)
      dist[n] = std::max(0.0, cur[n].real());
  }
  return dist;
}

RenewalTable solve_renewal_time(const CriticalWindow& window,
                                const OverlapTable& overlap,
                                RenewalMethod method) {
  check_window(window, overlap);
  const long N = window.N;
  RenewalTable t;
  t.N = N;
  t.theta = window.theta;
  t.sigma2 = window.sigma2;
  t.lambda_N = window.lambda_N;
  t.U_time.assign(static_cast<std::size_t>(N) + 1, 0.0);
  t.U_time[0] = 1.0;

  // f[k] = sigma^2 u_k^2: one-increment weight of the renewal recursion.
  std::vector<double> f(static_cast<std::size_t>(N) + 1, 0.0);
  for (long k = 1; k <= N; ++k)
    f[static_cast<std::size_t>(k)] =
        window.sigma2 * overlap.u_sq[static_cast<std::size_t>(k)];

  if (method == RenewalMethod::direct) {
    for (long n = 1; n <= N; ++n) {
      const double* fp = f.data();
      const double* Up = t.U_time.data();
      double s = 0.0;
      for (long m = 0; m < n; ++m)
        s += fp[n - m] * Up[m];
      t.U_time[static_cast<std::size_t>(n)] = s;
    }
  } else {
    std::vector<double> acc(static_cast<std::size_t>(N) + 1, 0.0);
    cdq(t.U_time, f, acc, 0, static_cast<std::size_t>(N) + 1);
  }
  return t;
}

std::vector<double> geometric_sum_truncation(const CriticalWindow& window,
                                             const OverlapTable& overlap,
                                             int r_max) {
  check_window(window, overlap);
  const long N = window.N;
  const std::size_t sz = static_cast<std::size_t>(N) + 1;
  RenewalIncrementLaw law = RenewalIncrementLaw::build(overlap, N);
  std::vector<double> D(law.mass);  // D_1 = increment mass
  std::vector<double> out(sz, 0.0), next(sz, 0.0);
  double lam_pow = window.lambda_N;
  for (std::size_t n = 1; n < sz; ++n) out[n] = lam_pow * D[n];
  for (int r = 2; r <= r_max; ++r) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t m = 1; m < sz; ++m) {
      double dm = D[m];
      if (dm == 0.0) continue;
      const double* mp = law.mass.data();
      std::size_t top = sz - m;
      for (std::size_t k = 1; k < top; ++k) next[m + k] += dm * mp[k];
    }
    D.swap(next);
    lam_pow *= window.lambda_N;
    for (std::size_t n = 1; n < sz; ++n) out[n] += lam_pow * D[n];
  }
  return out;
}

// ---------------------------------------------------------------------------
// spacetime solve

double RenewalTable::U(long n, long x1, long x2) const {
  if (n < 0 || n > N_sp)
    throw std::out_of_range("U(n,x): n outside spatial horizon");
  if (n == 0) return (x1 == 0 && x2 == 0) ? 1.0 : 0.0;
  if (!even_site(n, x1, x2)) return 0.0;
  long a2 = x1 + x2 + n, b2 = x1 - x2 + n;
  if (a2 < 0 || a2 > 2 * n || b2 < 0 || b2 > 2 * n) return 0.0;
  return U_xy[static_cast<std::size_t>(n)]
             [static_cast<std::size_t>((a2 / 2) * (n + 1) + b2 / 2)];
}

double RenewalTable::spatial_marginal(long n) const {
  const std::vector<double>& layer = U_xy.at(static_cast<std::size_t>(n));
  double s = 0.0;
  for (double v : layer) s += v;
  return s;
}

void solve_renewal_spacetime(RenewalTable& table, const CriticalWindow& window,
                             const OverlapTable& overlap, int N_sp,
                             int spatial_budget) {
  check_window(window, overlap);
  if (N_sp < 1 || N_sp > spatial_budget)
    throw std::length_error("solve_renewal_spacetime: N_sp above budget");
  if (static_cast<long>(N_sp) > table.N)
    throw std::domain_error("solve_renewal_spacetime: N_sp > N");

  const double sigma2 = window.sigma2;

  // Squared 1d kernel rows w_g[c] = p_g(2c-g)^2 with their support windows
  // [lo,hi] cut where the row falls below 1e-18 of its peak.
  std::vector<std::vector<double>> w(static_cast<std::size_t>(N_sp) + 1);
  std::vector<long> lo(static_cast<std::size_t>(N_sp) + 1, 0);
  std::vector<long> hi(static_cast<std::size_t>(N_sp) + 1, 0);
  std::vector<double> trunc_sq_mass(static_cast<std::size_t>(N_sp) + 1, 0.0);
  for (long g = 1; g <= N_sp; ++g) {
    std::vector<double> row = binom_half_row(g);
    for (double& v : row) v *= v;
    double peak = *std::max_element(row.begin(), row.end());
    long a = 0, b = g;
    while (a < b && row[static_cast<std::size_t>(a)] < 1e-18 * peak) ++a;
    while (b > a && row[static_cast<std::size_t>(b)] < 1e-18 * peak) --b;
    lo[static_cast<std::size_t>(g)] = a;
    hi[static_cast<std::size_t>(g)] = b;
    double s = 0.0;
    for (long c = a; c <= b; ++c) s += row[static_cast<std::size_t>(c)];
    trunc_sq_mass[static_cast<std::size_t>(g)] = s * s;
    w[static_cast<std::size_t>(g)] = std::move(row);
  }

  table.N_sp = N_sp;
  table.U_xy.assign(static_cast<std::size_t>(N_sp) + 1, {});
  table.U_xy[0] = {1.0};
  table.spatial_mass_loss = 0.0;
  std::vector<double> layer_mass(static_cast<std::size_t>(N_sp) + 1, 0.0);
  layer_mass[0] = 1.0;

  std::vector<double> scratch;
  for (long n = 1; n <= N_sp; ++n) {
    const long W = n + 1;
    std::vector<double>& out = table.U_xy[static_cast<std::size_t>(n)];
    out.assign(static_cast<std::size_t>(W * W), 0.0);

    // m = 0 term: sigma^2 q_n(x)^2, untruncated
    {
      const std::vector<double>& wn = w[static_cast<std::size_t>(n)];
      for (long a = 0; a < W; ++a) {
        double va = sigma2 * wn[static_cast<std::size_t>(a)];
        double* row_out = out.data() + a * W;
        for (long b = 0; b < W; ++b)
          row_out[b] = va * wn[static_cast<std::size_t>(b)];
      }
    }

    for (long m = 1; m < n; ++m) {
      const long g = n - m;
      const std::vector<double>& wg = w[static_cast<std::size_t>(g)];
      const long cl = lo[static_cast<std::size_t>(g)];
      const long ch = hi[static_cast<std::size_t>(g)];
      const std::vector<double>& um = table.U_xy[static_cast<std::size_t>(m)];
      const long Wm = m + 1;

      // axis a: scratch[(a+c)*Wm + b] += wg[c] * um[a*Wm+b]
      scratch.assign(static_cast<std::size_t>(W * Wm), 0.0);
      for (long a = 0; a < Wm; ++a) {
        const double* src = um.data() + a * Wm;
        for (long c = cl; c <= ch; ++c) {
          double wv = wg[static_cast<std::size_t>(c)];
          double* dst = scratch.data() + (a + c) * Wm;
          for (long b = 0; b < Wm; ++b) dst[b] += wv * src[b];
        }
      }
      // axis b: out[ap*W + (b+c)] += sigma^2 * wg[c] * scratch[ap*Wm + b]
      for (long ap = 0; ap < W; ++ap) {
        const double* src = scratch.data() + ap * Wm;
        double* dst = out.data() + ap * W;
        for (long b = 0; b < Wm; ++b) {
          double sv = sigma2 * src[b];
          if (sv == 0.0) continue;
          for (long c = cl; c <= ch; ++c)
            dst[b + c] += sv * wg[static_cast<std::size_t>(c)];
        }
      }

      table.spatial_mass_loss +=
          sigma2 *
          (overlap.u_sq[static_cast<std::size_t>(g)] -
           trunc_sq_mass[static_cast<std::size_t>(g)]) *
          layer_mass[static_cast<std::size_t>(m)];
    }

    double s = 0.0;
    for (double v : out) s += v;
    layer_mass[static_cast<std::size_t>(n)] = s;
  }
}

void RenewalTable::export_time_csv(const std::string& path) const {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw std::runtime_error("export_time_csv: cannot open " + path);
  std::fprintf(fp, "n,U\n");
  for (std::size_t n = 0; n < U_time.size(); ++n)
    std::fprintf(fp, "%zu,%.17g\n", n, U_time[n]);
  std::fclose(fp);
}

void RenewalTable::export_space_csv(const std::string& path, long n) const {
  if (n < 0 || n > N_sp)
    throw std::out_of_range("export_space_csv: n outside spatial horizon");
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw std::runtime_error("export_space_csv: cannot open " + path);
  std::fprintf(fp, "x1,x2,U\n");
  const std::vector<double>& layer = U_xy[static_cast<std::size_t>(n)];
  for (long a = 0; a <= n; ++a)
    for (long b = 0; b <= n; ++b)
      std::fprintf(fp, "%ld,%ld,%.17g\n", a + b - n, a - b,
                   layer[static_cast<std::size_t>(a * (n + 1) + b)]);
  std::fclose(fp);
}

// ---------------------------------------------------------------------------
// Monte Carlo evaluator

RenewalMcEvaluator::RenewalMcEvaluator(const CriticalWindow& window,
                                       const RenewalIncrementLaw& law)
    : window_(window), law_(law) {
  if (window.N != law.N)
    throw std::domain_error("RenewalMcEvaluator: window/law horizon mismatch");
  OverlapTable o = OverlapTable::closed_form(window.N);
  u_sq_ = std::move(o.u_sq);
}

McEstimate RenewalMcEvaluator::estimate_point(long n, long x1, long x2,
                                              int paths, Rng& rng) const {
  if (n < 1 || n > window_.N)
    throw std::domain_error("estimate_point: n outside (0, N]");
  double sum = 0.0, sum_sq = 0.0;
  const double lam = window_.lambda_N;
  for (int p = 0; p < paths; ++p) {
    double contrib = 0.0;
    double lam_pow = lam;
    long tau = 0, s1 = 0, s2 = 0;
    while (tau < n) {
      double qv = walk_prob(n - tau, x1 - s1, x2 - s2);
      contrib += lam_pow * qv * qv / law_.R_N;
      long t = law_.sample_T(rng);
      tau += t;
      if (tau < n) {  // the spatial step only matters if the path continues
        std::array<long, 2> dx = law_.sample_X_given_T(t, rng);
        s1 += dx[0];
        s2 += dx[1];
      }
      lam_pow *= lam;
    }
    sum += contrib;
    sum_sq += contrib * contrib;
  }
  McEstimate e;
  e.paths = paths;
  e.value = sum / paths;
  double var = std::max(0.0, sum_sq / paths - e.value * e.value);
  e.std_err = std::sqrt(var / paths);
  return e;
}

McEstimate RenewalMcEvaluator::estimate_time(long n, int paths,
                                             Rng& rng) const {
  if (n < 1 || n > window_.N)
    throw std::domain_error("estimate_time: n outside (0, N]");
  double sum = 0.0, sum_sq = 0.0;
  const double lam = window_.lambda_N;
  for (int p = 0; p < paths; ++p) {
    double contrib = 0.0;
    double lam_pow = lam;
    long tau = 0;
    while (tau < n) {
      contrib += lam_pow * u_sq_[static_cast<std::size_t>(n - tau)] / law_.R_N;
      tau += law_.sample_T(rng);
      lam_pow *= lam;
    }
    sum += contrib;
    sum_sq += contrib * contrib;
  }
  McEstimate e;
  e.paths = paths;
  e.value = sum / paths;
  double var = std::max(0.0, sum_sq / paths - e.value * e.value);
  e.std_err = std::sqrt(var / paths);
  return e;
}

}  // namespace polylab
