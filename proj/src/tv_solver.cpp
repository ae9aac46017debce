#include "flivver/tv_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace flivver {

void weighted_tv_denoise(std::span<const double> y, std::span<const double> w, double lambda,
                         std::span<double> x) {
  const std::size_t n = y.size();
  if (w.size() != n || x.size() != n) throw std::invalid_argument("weighted_tv_denoise: size mismatch");
  if (!(lambda >= 0.0)) throw std::invalid_argument("weighted_tv_denoise: lambda must be >= 0");
  if (n == 0) return;
  for (double wi : w) {
    if (!(wi > 0.0)) throw std::invalid_argument("weighted_tv_denoise: weights must be > 0");
  }
  if (n == 1 || lambda == 0.0) {
    std::copy(y.begin(), y.end(), x.begin());
    return;
  }

  // Knots live in [l, r] of buffers sized 2n; each knot k adds a[k] b + c[k]
  // to the derivative beyond it (scanning from the nearer end).
  std::vector<double> kx(2 * n), ka(2 * n), kb(2 * n);
  std::vector<double> tm(n - 1), tp(n - 1);

  tm[0] = -lambda / w[0] + y[0];
  tp[0] = lambda / w[0] + y[0];
  std::size_t l = n - 1;
  std::size_t r = n;
  kx[l] = tm[0];
  kx[r] = tp[0];
  ka[l] = w[0];
  kb[l] = -w[0] * y[0] + lambda;
  ka[r] = -w[0];
  kb[r] = w[0] * y[0] + lambda;
  double afirst = w[1];
  double bfirst = -w[1] * y[1] - lambda;
  double alast = -w[1];
  double blast = w[1] * y[1] - lambda;

  for (std::size_t k = 1; k + 1 < n; ++k) {
    std::size_t lo = l;
    for (; lo <= r; ++lo) {
      if (afirst * kx[lo] + bfirst > -lambda) break;
      afirst += ka[lo];
      bfirst += kb[lo];
    }
    std::size_t hi = r;
    for (; hi >= lo; --hi) {
      if (-alast * kx[hi] - blast < lambda) break;
      alast += ka[hi];
      blast += kb[hi];
    }
    tm[k] = (-lambda - bfirst) / afirst;
    l = lo - 1;
    kx[l] = tm[k];
    tp[k] = (lambda + blast) / (-alast);
    r = hi + 1;
    kx[r] = tp[k];
    ka[l] = afirst;
    kb[l] = bfirst + lambda;
    ka[r] = alast;
    kb[r] = blast + lambda;
    afirst = w[k + 1];
    bfirst = -w[k + 1] * y[k + 1] - lambda;
    alast = -w[k + 1];
    blast = w[k + 1] * y[k + 1] - lambda;
  }

  for (std::size_t lo = l; lo <= r; ++lo) {
    if (afirst * kx[lo] + bfirst > 0.0) break;
    afirst += ka[lo];
    bfirst += kb[lo];
  }
  x[n - 1] = -bfirst / afirst;
  for (std::size_t k = n - 1; k-- > 0;) {
    x[k] = std::clamp(x[k + 1], tm[k], tp[k]);
  }
}

double tv_line_objective(std::span<const double> u, std::span<const double> cs, std::span<const double> z,
                         double beta, double gamma) {
  double fit = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double e = u[i] - cs[i] * z[i] + beta;
    fit += e * e;
  }
  double tv = 0.0;
  for (std::size_t i = 1; i < z.size(); ++i) tv += std::abs(z[i] - z[i - 1]);
  return fit + gamma * tv;
}

TvLineSolution tv_repair_line(std::span<const double> u, std::span<const double> cs, double gamma,
                              int max_iterations, double tol) {
  if (u.size() != cs.size()) throw std::invalid_argument("tv_repair_line: size mismatch");
  if (!(gamma >= 0.0)) throw std::invalid_argument("tv_repair_line: gamma must be >= 0");
  const std::size_t n = u.size();
  TvLineSolution sol;
  sol.z.assign(n, 0.0);
  double wmax = 0.0;
  for (double c : cs) wmax = std::max(wmax, c * c);
  if (wmax == 0.0) throw std::invalid_argument("tv_repair_line: all gains are zero");
  std::vector<double> w(n), y(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = std::max(cs[i] * cs[i], 1e-12 * wmax);

  double prev = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) y[i] = cs[i] != 0.0 ? (u[i] + sol.beta) / cs[i] : 0.0;
    weighted_tv_denoise(y, w, 0.5 * gamma, sol.z);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += cs[i] * sol.z[i] - u[i];
    sol.beta = acc / static_cast<double>(n);
    const double f = tv_line_objective(u, cs, sol.z, sol.beta, gamma);
    sol.objective_history.push_back(f);
    sol.iterations = it + 1;
    if (it > 0 && prev - f <= tol * std::max(f, 1e-300)) {
      sol.converged = true;
      break;
    }
    prev = f;
  }
  return sol;
}

}  // namespace flivver
