#include "polylab/walk_lattice.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <stdexcept>

namespace polylab {

double heat_kernel(double u, double x1, double x2) {
  if (!(u > 0.0)) throw std::domain_error("heat_kernel: u must be positive");
  return std::exp(-(x1 * x1 + x2 * x2) / (2.0 * u)) /
         (2.0 * std::numbers::pi * u);
}

double gauss1d(double u, double x) {
  if (!(u > 0.0)) throw std::domain_error("gauss1d: u must be positive");
  return std::exp(-x * x / (2.0 * u)) / std::sqrt(2.0 * std::numbers::pi * u);
}

double binom_half_pmf(long n, long j) {
  if (n < 0) throw std::domain_error("binom_half_pmf: n must be >= 0");
  if (j < -n || j > n || ((n + j) & 1L) != 0) return 0.0;
  double k = 0.5 * static_cast<double>(n + j);
  double lg = std::lgamma(static_cast<double>(n) + 1.0) -
              std::lgamma(k + 1.0) -
              std::lgamma(static_cast<double>(n) - k + 1.0) -
              static_cast<double>(n) * std::numbers::ln2;
  return std::exp(lg);
}

std::vector<double> binom_half_row(long n) {
  if (n < 0) throw std::domain_error("binom_half_row: n must be >= 0");
  std::vector<double> row{1.0};
  for (long m = 1; m <= n; ++m) {
    std::vector<double> next(static_cast<std::size_t>(m) + 1, 0.0);
    for (long k = 0; k < m; ++k) {
      next[static_cast<std::size_t>(k)] += 0.5 * row[static_cast<std::size_t>(k)];
      next[static_cast<std::size_t>(k) + 1] +=
          0.5 * row[static_cast<std::size_t>(k)];
    }
    row.swap(next);
  }
  return row;
}

double walk_prob(long n, long x1, long x2) {
  if (n < 0) throw std::domain_error("walk_prob: n must be >= 0");
  if (n == 0) return (x1 == 0 && x2 == 0) ? 1.0 : 0.0;
  return binom_half_pmf(n, x1 + x2) * binom_half_pmf(n, x1 - x2);
}

std::size_t WalkKernelTable::bytes_needed(int horizon) {
  std::size_t total = 0;
  for (std::size_t n = 0; n <= static_cast<std::size_t>(horizon); ++n)
    total += (n + 1) * (n + 1) * sizeof(double);
  return total;
}

WalkKernelTable WalkKernelTable::build(int horizon,
                                       std::size_t memory_budget_bytes) {
  if (horizon < 1) throw std::domain_error("build: horizon must be >= 1");
  if (bytes_needed(horizon) > memory_budget_bytes)
    throw std::length_error("build: kernel table exceeds memory budget");

  WalkKernelTable t;
  t.horizon_ = horizon;
  t.layers_.resize(static_cast<std::size_t>(horizon) + 1);
  t.layers_[0] = {1.0};
  // In the rotated coordinates each walk step increments a and b
  // independently by 0 or 1, each with probability 1/2; the four
  // combinations are exactly the four lattice neighbors. The gather is
  // summed in symmetric pairs so every lattice symmetry holds exactly in
  // floating point, not just up to roundoff.
  for (long n = 0; n < horizon; ++n) {
    const std::vector<double>& cur = t.layers_[static_cast<std::size_t>(n)];
    std::vector<double>& next = t.layers_[static_cast<std::size_t>(n) + 1];
    next.assign(static_cast<std::size_t>((n + 2) * (n + 2)), 0.0);
    auto w = [&](long a, long b) -> double {
      if (a < 0 || a > n || b < 0 || b > n) return 0.0;
      return cur[static_cast<std::size_t>(a * (n + 1) + b)];
    };
    for (long a = 0; a <= n + 1; ++a) {
      for (long b = 0; b <= n + 1; ++b) {
        double s1 = w(a - 1, b - 1) + w(a, b);
        double s2 = w(a - 1, b) + w(a, b - 1);
        next[static_cast<std::size_t>(a * (n + 2) + b)] = 0.25 * (s1 + s2);
      }
    }
  }
  return t;
}

double WalkKernelTable::q(long n, long x1, long x2) const {
  if (n < 0 || n > horizon_)
    throw std::out_of_range("q: time outside table horizon");
  if (!even_site(n, x1, x2)) return 0.0;
  long a2 = x1 + x2 + n;
  long b2 = x1 - x2 + n;
  if (a2 < 0 || a2 > 2 * n || b2 < 0 || b2 > 2 * n) return 0.0;
  return layers_[static_cast<std::size_t>(n)]
                [static_cast<std::size_t>((a2 / 2) * (n + 1) + b2 / 2)];
}

double WalkKernelTable::row_sum(int n) const {
  const std::vector<double>& layer = layers_.at(static_cast<std::size_t>(n));
  double s = 0.0;
  for (double v : layer) s += v;
  return s;
}

namespace {
constexpr char kCacheMagic[8] = {'P', 'L', 'W', 'K', 'T', 'B', 'L', '1'};

struct FileCloser {
  std::FILE* f;
  ~FileCloser() {
    if (f) std::fclose(f);
  }
};
}  // namespace

void WalkKernelTable::save(const std::string& path) const {
  static_assert(std::endian::native == std::endian::little,
                "cache format is little-endian");
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("save: cannot open " + path);
  FileCloser closer{f};
  std::uint64_t h = static_cast<std::uint64_t>(horizon_);
  if (std::fwrite(kCacheMagic, 1, 8, f) != 8 ||
      std::fwrite(&h, sizeof h, 1, f) != 1)
    throw std::runtime_error("save: write failed");
  for (const std::vector<double>& layer : layers_)
    if (std::fwrite(layer.data(), sizeof(double), layer.size(), f) !=
        layer.size())
      throw std::runtime_error("save: write failed");
}

WalkKernelTable WalkKernelTable::load(const std::string& path) {
  static_assert(std::endian::native == std::endian::little,
                "cache format is little-endian");
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("load: cannot open " + path);
  FileCloser closer{f};
  char magic[8];
  std::uint64_t h = 0;
  if (std::fread(magic, 1, 8, f) != 8 ||
      std::memcmp(magic, kCacheMagic, 8) != 0 ||
      std::fread(&h, sizeof h, 1, f) != 1)
    throw std::runtime_error("load: not a kernel table cache: " + path);
  WalkKernelTable t;
  t.horizon_ = static_cast<int>(h);
  t.layers_.resize(h + 1);
  for (std::uint64_t n = 0; n <= h; ++n) {
    t.layers_[n].resize((n + 1) * (n + 1));
    if (std::fread(t.layers_[n].data(), sizeof(double), t.layers_[n].size(),
                   f) != t.layers_[n].size())
      throw std::runtime_error("load: truncated cache: " + path);
  }
  return t;
}

double OverlapTable::alpha_diagnostic(long n) const {
  return R(n) - std::log(static_cast<double>(n)) / std::numbers::pi;
}

OverlapTable OverlapTable::closed_form(long N) {
  if (N < 1) throw std::domain_error("closed_form: N must be >= 1");
  OverlapTable t;
  t.alpha = alpha_constant();
  t.u_sq.resize(static_cast<std::size_t>(N) + 1);
  t.partial.resize(static_cast<std::size_t>(N) + 1);
  t.u_sq[0] = 1.0;
  t.partial[0] = 0.0;
  double a = 1.0;  // a_n = 2^{-2n} C(2n,n)
  for (long n = 1; n <= N; ++n) {
    a *= (2.0 * static_cast<double>(n) - 1.0) / (2.0 * static_cast<double>(n));
    t.u_sq[static_cast<std::size_t>(n)] = a * a;
    t.partial[static_cast<std::size_t>(n)] =
        t.partial[static_cast<std::size_t>(n) - 1] + a * a;
  }
  return t;
}

OverlapTable OverlapTable::from_table(const WalkKernelTable& table) {
  long N = table.horizon() / 2;
  if (N < 1) throw std::domain_error("from_table: horizon must be >= 2");
  OverlapTable t;
  t.alpha = alpha_constant();
  t.u_sq.resize(static_cast<std::size_t>(N) + 1);
  t.partial.resize(static_cast<std::size_t>(N) + 1);
  t.u_sq[0] = 1.0;
  t.partial[0] = 0.0;
  for (long n = 1; n <= N; ++n) {
    t.u_sq[static_cast<std::size_t>(n)] = table.q(2 * n, 0, 0);
    t.partial[static_cast<std::size_t>(n)] =
        t.partial[static_cast<std::size_t>(n) - 1] +
        t.u_sq[static_cast<std::size_t>(n)];
  }
  return t;
}

double alpha_constant() {
  return kEulerGamma + std::log(16.0) - std::numbers::pi;
}

}  // namespace polylab
