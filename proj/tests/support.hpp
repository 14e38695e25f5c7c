#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "entropic_hedge/core.hpp"

namespace testing_support {

inline double gauss(std::mt19937_64& gen) { return std::normal_distribution<double>(0.0, 1.0)(gen); }
inline double unif(std::mt19937_64& gen, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(gen);
}

/// Q diag(lambda) Q^T with log-uniform eigenvalues in [lo, hi] and a random orthogonal Q.
inline ehedge::SpdMatrix random_spd(std::mt19937_64& gen, std::size_t d, double lo = 0.1, double hi = 10.0) {
  std::vector<double> q(d * d);
  for (auto& v : q) v = gauss(gen);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t p = 0; p < c; ++p) {
      double dot = 0.0;
      for (std::size_t r = 0; r < d; ++r) dot += q[r * d + c] * q[r * d + p];
      for (std::size_t r = 0; r < d; ++r) q[r * d + c] -= dot * q[r * d + p];
    }
    double norm = 0.0;
    for (std::size_t r = 0; r < d; ++r) norm += q[r * d + c] * q[r * d + c];
    norm = std::sqrt(norm);
    for (std::size_t r = 0; r < d; ++r) q[r * d + c] /= norm;
  }
  std::vector<double> lam(d);
  for (auto& l : lam) l = std::exp(unif(gen, std::log(lo), std::log(hi)));
  std::vector<double> a(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += q[i * d + k] * lam[k] * q[j * d + k];
      a[i * d + j] = s;
      a[j * d + i] = s;
    }
  return ehedge::SpdMatrix(d, a);
}

/// Determinant by cofactor expansion (d <= 3).
inline double det(const ehedge::SpdMatrix& m) {
  const std::size_t d = m.dim();
  if (d == 1) return m(0, 0);
  if (d == 2) return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
         m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

/// Standard normal cdf and density.
inline double Phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
inline double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

}  // namespace testing_support
