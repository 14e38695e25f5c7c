#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "entropic_hedge/core.hpp"

namespace ehedge {

SymmetricEigen symmetric_eigen(std::size_t dim, std::span<const double> entries) {
  if (entries.size() != dim * dim) throw std::invalid_argument("symmetric_eigen: size mismatch");
  const std::size_t n = dim;
  std::vector<double> a(entries.begin(), entries.end());
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
    if (off == 0.0) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k];
          const double aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p];
          const double vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a[i * n + i] < a[j * n + j]; });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n * n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a[order[k] * n + order[k]];
    for (std::size_t r = 0; r < n; ++r) out.vectors[r * n + k] = v[r * n + order[k]];
  }
  return out;
}

SpdMatrix spd_sqrt(const SpdMatrix& sigma) {
  const std::size_t n = sigma.dim();
  if (n == 1) return SpdMatrix::scalar(std::sqrt(std::max(0.0, sigma(0, 0))));
  const auto eig = symmetric_eigen(n, sigma.entries());
  std::vector<double> root(n);
  for (std::size_t k = 0; k < n; ++k) root[k] = std::sqrt(std::max(0.0, eig.values[k]));
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += eig.vectors[i * n + k] * root[k] * eig.vectors[j * n + k];
      out[i * n + j] = acc;
      out[j * n + i] = acc;
    }
  }
  return SpdMatrix(n, std::move(out));
}

}  // namespace ehedge
