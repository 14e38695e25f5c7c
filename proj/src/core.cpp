#include "entropic_hedge/core.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace ehedge {

SpdMatrix::SpdMatrix(std::size_t dim, std::vector<double> entries) : dim_(dim), entries_(std::move(entries)) {
  if (dim_ == 0 || entries_.size() != dim_ * dim_) {
    throw std::invalid_argument("SpdMatrix: expected " + std::to_string(dim_ * dim_) + " entries");
  }
  for (double v : entries_) {
    if (!std::isfinite(v)) throw std::invalid_argument("SpdMatrix: non-finite entry");
  }
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = i + 1; j < dim_; ++j) {
      if (entries_[i * dim_ + j] != entries_[j * dim_ + i]) {
        throw std::invalid_argument("SpdMatrix: asymmetric input");
      }
    }
  }
  const auto eig = symmetric_eigen(dim_, entries_);
  const double scale = std::max(1.0, std::abs(eig.values.back()));
  if (eig.values.front() < -kTolPd * scale) {
    std::ostringstream msg;
    msg << "SpdMatrix: negative eigenvalue " << eig.values.front();
    throw std::invalid_argument(msg.str());
  }
}

SpdMatrix SpdMatrix::identity(std::size_t dim) {
  std::vector<double> e(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) e[i * dim + i] = 1.0;
  return SpdMatrix(dim, std::move(e));
}

SpdMatrix SpdMatrix::diagonal(std::span<const double> diag) {
  const std::size_t d = diag.size();
  std::vector<double> e(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) e[i * d + i] = diag[i];
  return SpdMatrix(d, std::move(e));
}

SpdMatrix SpdMatrix::scalar(double value) { return SpdMatrix(1, {value}); }

double SpdMatrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) t += entries_[i * dim_ + i];
  return t;
}

SpdMatrix SpdMatrix::combine(double wa, const SpdMatrix& a, double wb, const SpdMatrix& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("SpdMatrix::combine: dimension mismatch");
  if (wa < 0.0 || wb < 0.0) throw std::invalid_argument("SpdMatrix::combine: negative weight");
  const std::size_t d = a.dim();
  std::vector<double> e(d * d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      const double v = wa * a(i, j) + wb * b(i, j);
      e[i * d + j] = v;
      e[j * d + i] = v;
    }
  }
  return SpdMatrix(d, std::move(e));
}

double entropy_rate(const SpdMatrix& sigma) {
  const std::size_t d = sigma.dim();
  const auto eig = symmetric_eigen(d, sigma.entries());
  const double top = eig.values.back();
  const double bottom = eig.values.front();
  if (!(bottom > kTolPd * std::max(top, 0.0)) || bottom <= 0.0) {
    std::ostringstream msg;
    msg << "entropy_rate: matrix is not strictly positive definite (eigenvalue " << bottom << ")";
    throw std::domain_error(msg.str());
  }
  double log_det = 0.0;
  for (double v : eig.values) log_det += std::log(v);
  return 0.5 * (sigma.trace() - static_cast<double>(d) - log_det);
}

double entropy_rate_eigen(std::span<const double> eigenvalues) {
  double acc = 0.0;
  for (double v : eigenvalues) {
    if (!(v > 0.0)) {
      std::ostringstream msg;
      msg << "entropy_rate_eigen: non-positive eigenvalue " << v;
      throw std::domain_error(msg.str());
    }
    acc += v - std::log(v) - 1.0;
  }
  return 0.5 * acc;
}

double entropy_rate_scalar(double sigma) {
  if (!(sigma > 0.0)) {
    std::ostringstream msg;
    msg << "entropy_rate: non-positive variance " << sigma;
    throw std::domain_error(msg.str());
  }
  return 0.5 * (sigma - 1.0 - std::log(sigma));
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("log_sum_exp: empty input");
  double top = -std::numeric_limits<double>::infinity();
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("log_sum_exp: non-finite input");
    top = std::max(top, v);
  }
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - top);
  return top + std::log(acc);
}

double log_mean_exp(std::span<const double> values) {
  return log_sum_exp(values) - std::log(static_cast<double>(values.size()));
}

Grid1D::Grid1D(double lo, double hi, std::size_t count) : lo_(lo), hi_(hi), count_(count) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
    throw std::invalid_argument("Grid1D: need finite lo < hi");
  }
  if (count < 2) throw std::invalid_argument("Grid1D: need at least two nodes");
  step_ = (hi - lo) / static_cast<double>(count - 1);
}

Grid1D Grid1D::aligned(double anchor, double lo, double hi, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("Grid1D::aligned: step must be positive");
  const double kmin = std::floor((lo - anchor) / step + 1e-9);
  const double kmax = std::ceil((hi - anchor) / step - 1e-9);
  const auto count = static_cast<std::size_t>(kmax - kmin) + 1;
  return Grid1D(anchor + kmin * step, anchor + kmax * step, std::max<std::size_t>(count, 2));
}

std::vector<double> Grid1D::nodes() const {
  std::vector<double> out(count_);
  for (std::size_t i = 0; i < count_; ++i) out[i] = node(i);
  return out;
}

Grid1D::Cell Grid1D::locate(double x) const {
  if (x <= lo_) return {0, 0.0, x < lo_};
  if (x >= hi_) return {count_ - 2, 1.0, x > hi_};
  const double s = (x - lo_) / step_;
  auto i = static_cast<std::size_t>(s);
  if (i > count_ - 2) i = count_ - 2;
  return {i, std::clamp(s - static_cast<double>(i), 0.0, 1.0), false};
}

std::size_t Grid1D::nearest(double x) const {
  if (x <= lo_) return 0;
  if (x >= hi_) return count_ - 1;
  return std::min(count_ - 1, static_cast<std::size_t>(std::lround((x - lo_) / step_)));
}

double interpolate(const Grid1D& grid, std::span<const double> values, double x) {
  const auto c = grid.locate(x);
  return values[c.index] + c.weight * (values[c.index + 1] - values[c.index]);
}

namespace {
std::atomic<unsigned> g_workers{1};
}

void set_worker_threads(unsigned count) { g_workers.store(std::max(1u, count)); }
unsigned worker_threads() { return g_workers.load(); }

void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(worker_threads(), count);
  if (workers <= 1) {
    if (count > 0) body(0, count);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
  body(0, std::min(count, chunk));
  for (auto& t : pool) t.join();
}

ConvexMin minimize_convex(const std::function<double(double)>& fn, double lo, double hi, double tol,
                          int max_doublings) {
  if (!(lo < hi)) throw std::invalid_argument("minimize_convex: empty bracket");
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  const double initial = hi - lo;
  int expansions = 0;
  for (;;) {
    double a = lo;
    double b = hi;
    double c = b - ratio * (b - a);
    double d = a + ratio * (b - a);
    double fc = fn(c);
    double fd = fn(d);
    for (int it = 0; it < 400 && (b - a) > tol; ++it) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - ratio * (b - a);
        fc = fn(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + ratio * (b - a);
        fd = fn(d);
      }
    }
    const bool left = fc < fd;
    const double x = left ? c : d;
    const double fx = left ? fc : fd;
    const double width = hi - lo;
    const double edge = std::max(4.0 * tol, 1e-9 * width);
    const bool at_lo = x - lo <= edge;
    const bool at_hi = hi - x <= edge;
    if (!at_lo && !at_hi) return {x, fx, b - a, expansions};
    if (hi - lo >= initial * std::ldexp(1.0, max_doublings)) {
      throw std::logic_error("minimize_convex: bracket expansion limit reached (objective unbounded below?)");
    }
    if (at_lo) lo -= width;
    if (at_hi) hi += width;
    ++expansions;
  }
}

}  // namespace ehedge
