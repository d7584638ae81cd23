#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace polylab {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;  // estimated absolute error
  long evals = 0;
  bool converged = false;
};

namespace detail {

// Gauss-Kronrod 7-15 pair on [-1,1].
inline constexpr double kK15Nodes[8] = {
    0.9914553711208126, 0.9491079123427585, 0.8648644233597691,
    0.7415311855993944, 0.5860872354676911, 0.4058451513773972,
    0.2077849550078985, 0.0};
inline constexpr double kK15Weights[8] = {
    0.0229353220105292, 0.0630920926299786, 0.1047900103222502,
    0.1406532597155259, 0.1690047266392679, 0.1903505780647854,
    0.2044329400752989, 0.2094821410847278};
inline constexpr double kG7Weights[4] = {
    0.1294849661688697, 0.2797053914892767, 0.3818300505051189,
    0.4179591836734694};

template <class F>
inline void gk15(const F& f, double a, double b, double& kronrod,
                 double& err_est) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double fc = f(c);
  double gauss = kG7Weights[3] * fc;
  kronrod = kK15Weights[7] * fc;
  for (int i = 0; i < 7; ++i) {
    double x = h * kK15Nodes[i];
    double v = f(c - x) + f(c + x);
    kronrod += kK15Weights[i] * v;
    if (i % 2 == 1) gauss += kG7Weights[i / 2] * v;
  }
  kronrod *= h;
  gauss *= h;
  // |K-G| is already a conservative error estimate for the Kronrod value;
  // the floor keeps roundoff from reporting spurious convergence.
  err_est = std::max(std::fabs(kronrod - gauss), std::fabs(kronrod) * 5e-16);
}

}  // namespace detail

// Adaptive bisection on [a,b] until the summed error estimate is below
// abs_tol + rel_tol*|integral|. Always splits the current worst interval.
template <class F>
QuadResult integrate(const F& f, double a, double b, double abs_tol = 1e-10,
                     double rel_tol = 1e-12, int max_intervals = 4000) {
  struct Seg {
    double a, b, value, error;
  };
  QuadResult out;
  if (!(b > a)) {
    out.converged = true;
    return out;
  }
  std::vector<Seg> segs;
  Seg s{a, b, 0, 0};
  detail::gk15(f, a, b, s.value, s.error);
  out.evals = 15;
  segs.push_back(s);
  double total = s.value, toterr = s.error;
  while (static_cast<int>(segs.size()) < max_intervals) {
    double tol = std::max(abs_tol, rel_tol * std::fabs(total));
    if (toterr <= tol) break;
    std::size_t wi = 0;
    for (std::size_t i = 1; i < segs.size(); ++i)
      if (segs[i].error > segs[wi].error) wi = i;
    Seg w = segs[wi];
    double mid = 0.5 * (w.a + w.b);
    if (mid <= w.a || mid >= w.b) break;  // interval at fp resolution
    Seg l{w.a, mid, 0, 0}, r{mid, w.b, 0, 0};
    detail::gk15(f, l.a, l.b, l.value, l.error);
    detail::gk15(f, r.a, r.b, r.value, r.error);
    out.evals += 30;
    total += l.value + r.value - w.value;
    toterr += l.error + r.error - w.error;
    segs[wi] = l;
    segs.push_back(r);
  }
  out.value = total;
  out.error = toterr;
  out.converged = toterr <= std::max(abs_tol, rel_tol * std::fabs(total));
  return out;
}

// Integral over [a, inf) via x = a + u/(1-u).
template <class F>
QuadResult integrate_to_inf(const F& f, double a, double abs_tol = 1e-10,
                            double rel_tol = 1e-12, int max_intervals = 8000) {
  auto g = [&](double u) {
    double om = 1.0 - u;
    double x = a + u / om;
    return f(x) / (om * om);
  };
  return integrate(g, 0.0, 1.0, abs_tol, rel_tol, max_intervals);
}

}  // namespace polylab
