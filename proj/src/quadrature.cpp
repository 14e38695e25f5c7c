#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "entropic_hedge/core.hpp"

namespace ehedge {
namespace {

// Eigenvalues of a symmetric tridiagonal matrix by implicit QL with Wilkinson shifts.
// diag has n entries, off has n entries with off[i] coupling i and i+1 (off[n-1] unused).
std::vector<double> tridiagonal_eigenvalues(std::vector<double> diag, std::vector<double> off) {
  const int n = static_cast<int>(diag.size());
  for (int l = 0; l < n; ++l) {
    int iter = 0;
    int m;
    do {
      for (m = l; m < n - 1; ++m) {
        const double dd = std::abs(diag[m]) + std::abs(diag[m + 1]);
        if (std::abs(off[m]) <= 1e-16 * dd) break;
      }
      if (m != l) {
        if (++iter > 200) throw std::runtime_error("gauss_hermite: QL iteration did not converge");
        double g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
        double r = std::hypot(g, 1.0);
        g = diag[m] - diag[l] + off[l] / (g + std::copysign(r, g));
        double s = 1.0;
        double c = 1.0;
        double p = 0.0;
        int i;
        for (i = m - 1; i >= l; --i) {
          double f = s * off[i];
          const double b = c * off[i];
          r = std::hypot(f, g);
          off[i + 1] = r;
          if (r == 0.0) {
            diag[i + 1] -= p;
            off[m] = 0.0;
            break;
          }
          s = f / r;
          c = g / r;
          g = diag[i + 1] - p;
          r = (diag[i] - g) * s + 2.0 * c * b;
          p = s * r;
          diag[i + 1] = g + p;
          g = c * r - b;
        }
        if (r == 0.0 && i >= l) continue;
        diag[l] -= p;
        off[l] = g;
        off[m] = 0.0;
      }
    } while (m != l);
  }
  std::sort(diag.begin(), diag.end());
  return diag;
}

// Orthonormal probabilists' Hermite values p_0..p_m at x.
void orthonormal_hermite(int m, double x, double& pm, double& pm1, double& sum_sq) {
  double prev = 0.0;
  double cur = 1.0;
  sum_sq = 1.0;
  for (int k = 0; k < m; ++k) {
    const double next = (x * cur - std::sqrt(static_cast<double>(k)) * prev) / std::sqrt(static_cast<double>(k + 1));
    prev = cur;
    cur = next;
    if (k + 1 < m) sum_sq += cur * cur;
  }
  pm = cur;
  pm1 = prev;
}

}  // namespace

QuadRule gauss_hermite(int m) {
  if (m < 2 || m > 256) throw std::invalid_argument("gauss_hermite: order must lie in [2, 256]");
  std::vector<double> diag(m, 0.0);
  std::vector<double> off(m, 0.0);
  for (int k = 0; k + 1 < m; ++k) off[k] = std::sqrt(static_cast<double>(k + 1));
  std::vector<double> nodes = tridiagonal_eigenvalues(diag, off);

  QuadRule rule;
  rule.nodes.resize(m);
  rule.weights.resize(m);
  for (int i = 0; i < m; ++i) {
    double x = nodes[i];
    for (int it = 0; it < 8; ++it) {
      double pm, pm1, ss;
      orthonormal_hermite(m, x, pm, pm1, ss);
      const double dp = std::sqrt(static_cast<double>(m)) * pm1;
      if (dp == 0.0) break;
      const double dx = pm / dp;
      x -= dx;
      if (std::abs(dx) <= 1e-16 * std::max(1.0, std::abs(x))) break;
    }
    double pm, pm1, ss;
    orthonormal_hermite(m, x, pm, pm1, ss);
    rule.nodes[i] = x;
    rule.weights[i] = 1.0 / ss;
  }
  // The rule is symmetric; enforce it exactly.
  for (int i = 0; i < m / 2; ++i) {
    const int j = m - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    rule.weights[i] = w;
    rule.weights[j] = w;
  }
  if (m % 2 == 1) rule.nodes[m / 2] = 0.0;
  double total = 0.0;
  for (double w : rule.weights) total += w;
  for (double& w : rule.weights) w /= total;
  return rule;
}

}  // namespace ehedge
