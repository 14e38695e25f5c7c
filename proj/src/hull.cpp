#include "hull.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>

namespace ehedge::detail {

std::vector<double> upper_hull_1d(const Grid1D& grid, std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> hull;
  hull.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    while (hull.size() >= 2) {
      const std::size_t a = hull[hull.size() - 2];
      const std::size_t b = hull.back();
      // Drop b when it lies on or below the chord from a to i.
      const double cross = static_cast<double>(b - a) * (values[i] - values[a]) -
                           static_cast<double>(i - a) * (values[b] - values[a]);
      if (cross >= 0.0) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(i);
  }
  std::vector<double> out(n);
  for (std::size_t k = 0; k + 1 < hull.size(); ++k) {
    const std::size_t a = hull[k];
    const std::size_t b = hull[k + 1];
    out[a] = values[a];
    const double span_ab = static_cast<double>(b - a);
    for (std::size_t i = a + 1; i < b; ++i) {
      const double t = static_cast<double>(i - a) / span_ab;
      out[i] = values[a] + t * (values[b] - values[a]);
    }
  }
  out[hull.back()] = values[hull.back()];
  (void)grid;
  return out;
}

namespace {

using Vec3 = std::array<double, 3>;

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

struct Face {
  std::array<int, 3> v;
  Vec3 normal;  // unit outward normal, zero for degenerate faces
  double offset;
  bool alive;
};

class Hull3 {
 public:
  Hull3(const std::vector<Vec3>& pts, double eps) : pts_(pts), eps_(eps) {}

  void seed(int a, int b, int c, int d) {
    add_face(a, b, c);
    add_face(a, d, b);
    add_face(b, d, c);
    add_face(c, d, a);
  }

  void insert(int p) {
    const Vec3& x = pts_[p];
    visible_.assign(faces_.size(), 0);
    std::vector<int> vis;
    for (int f : alive_) {
      const Face& face = faces_[f];
      if (!face.alive) continue;
      if (dot(face.normal, x) - face.offset > eps_) {
        visible_[f] = 1;
        vis.push_back(f);
      }
    }
    if (vis.empty()) return;
    std::vector<std::pair<int, int>> horizon;
    for (int f : vis) {
      const auto& v = faces_[f].v;
      for (int e = 0; e < 3; ++e) {
        const int a = v[e];
        const int b = v[(e + 1) % 3];
        const auto it = edges_.find(key(b, a));
        if (it == edges_.end() || !visible_[it->second]) horizon.emplace_back(a, b);
      }
    }
    for (int f : vis) remove_face(f);
    for (const auto& [a, b] : horizon) add_face(a, b, p);
    if (2 * dead_ > alive_.size()) compact();
  }

  const std::vector<Face>& faces() const { return faces_; }
  const std::vector<int>& alive() const { return alive_; }

 private:
  static std::uint64_t key(int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
  }

  void add_face(int a, int b, int c) {
    Face f{{a, b, c}, {0.0, 0.0, 0.0}, 0.0, true};
    Vec3 n = cross(sub(pts_[b], pts_[a]), sub(pts_[c], pts_[a]));
    const double len = std::sqrt(dot(n, n));
    if (len > 0.0) {
      for (double& v : n) v /= len;
      f.normal = n;
      f.offset = dot(n, pts_[a]);
    }
    const int idx = static_cast<int>(faces_.size());
    faces_.push_back(f);
    alive_.push_back(idx);
    edges_[key(a, b)] = idx;
    edges_[key(b, c)] = idx;
    edges_[key(c, a)] = idx;
  }

  void remove_face(int f) {
    Face& face = faces_[f];
    face.alive = false;
    ++dead_;
    for (int e = 0; e < 3; ++e) {
      const auto it = edges_.find(key(face.v[e], face.v[(e + 1) % 3]));
      if (it != edges_.end() && it->second == f) edges_.erase(it);
    }
  }

  void compact() {
    std::vector<int> keep;
    keep.reserve(alive_.size());
    for (int f : alive_)
      if (faces_[f].alive) keep.push_back(f);
    alive_ = std::move(keep);
    dead_ = 0;
  }

 public:
  void finish() { compact(); }

 private:
  const std::vector<Vec3>& pts_;
  double eps_;
  std::vector<Face> faces_;
  std::vector<int> alive_;
  std::size_t dead_ = 0;
  std::vector<char> visible_;
  std::unordered_map<std::uint64_t, int> edges_;
};

}  // namespace

std::vector<double> upper_hull_2d(const Grid1D& gx, const Grid1D& gy, std::span<const double> values) {
  const std::size_t nx = gx.count();
  const std::size_t ny = gy.count();
  double vmin = std::numeric_limits<double>::infinity();
  double vmax = -vmin;
  for (double v : values) {
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  const double vscale = std::max({1.0, std::abs(vmin), std::abs(vmax)});
  const double keep_tol = 1e-12 * vscale;

  // A node strictly below the chord of its row or column cannot be a hull vertex.
  std::vector<char> candidate(nx * ny, 1);
  {
    for (std::size_t i = 0; i < nx; ++i) {
      const auto row = values.subspan(i * ny, ny);
      const auto env = upper_hull_1d(gy, row);
      for (std::size_t j = 0; j < ny; ++j)
        if (row[j] < env[j] - keep_tol) candidate[i * ny + j] = 0;
    }
    std::vector<double> col(nx);
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < nx; ++i) col[i] = values[i * ny + j];
      const auto env = upper_hull_1d(gx, col);
      for (std::size_t i = 0; i < nx; ++i)
        if (col[i] < env[i] - keep_tol) candidate[i * ny + j] = 0;
    }
  }

  // Work in index coordinates so that projected geometry is exact integer arithmetic.
  std::vector<Vec3> pts;
  std::vector<std::array<long, 2>> idx;
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      if (!candidate[i * ny + j]) continue;
      pts.push_back({static_cast<double>(i), static_cast<double>(j), values[i * ny + j]});
      idx.push_back({static_cast<long>(i), static_cast<long>(j)});
    }
  }
  const int ntop = static_cast<int>(pts.size());
  const double floor_z = vmin - (vmax - vmin) - 1.0;
  const double xi = static_cast<double>(nx - 1);
  const double yi = static_cast<double>(ny - 1);
  pts.push_back({0.0, 0.0, floor_z});
  pts.push_back({xi, 0.0, floor_z});
  pts.push_back({xi, yi, floor_z});
  pts.push_back({0.0, yi, floor_z});

  const double eps = 1e-12 * (xi + yi + (vmax - vmin) + vscale);
  Hull3 hull(pts, eps);
  int apex = 0;
  for (int k = 1; k < ntop; ++k)
    if (pts[k][2] > pts[apex][2]) apex = k;
  // Floor triangle oriented downward, apex above it.
  hull.seed(ntop, ntop + 2, ntop + 1, apex);

  std::vector<int> order;
  order.reserve(ntop + 1);
  order.push_back(ntop + 3);
  std::vector<int> rest;
  for (int k = 0; k < ntop; ++k)
    if (k != apex) rest.push_back(k);
  RngStream rng(0x68756c6cULL, 0);
  std::shuffle(rest.begin(), rest.end(), rng);
  order.insert(order.end(), rest.begin(), rest.end());
  for (int p : order) hull.insert(p);
  hull.finish();

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> out(nx * ny, nan);
  struct Plane {
    double a, b, c;  // z = a*i + b*j + c
  };
  std::vector<Plane> planes;
  for (int f : hull.alive()) {
    const Face& face = hull.faces()[f];
    const auto& v = face.v;
    if (v[0] >= ntop || v[1] >= ntop || v[2] >= ntop) continue;
    if (!(face.normal[2] > 0.0)) continue;
    const auto& A = idx[v[0]];
    const auto& B = idx[v[1]];
    const auto& Cc = idx[v[2]];
    const long det = (B[0] - A[0]) * (Cc[1] - A[1]) - (B[1] - A[1]) * (Cc[0] - A[0]);
    if (det == 0) continue;
    planes.push_back({-face.normal[0] / face.normal[2], -face.normal[1] / face.normal[2], face.offset / face.normal[2]});
    const double za = pts[v[0]][2];
    const double zb = pts[v[1]][2];
    const double zc = pts[v[2]][2];
    const long i0 = std::min({A[0], B[0], Cc[0]});
    const long i1 = std::max({A[0], B[0], Cc[0]});
    const long j0 = std::min({A[1], B[1], Cc[1]});
    const long j1 = std::max({A[1], B[1], Cc[1]});
    for (long i = i0; i <= i1; ++i) {
      for (long j = j0; j <= j1; ++j) {
        // Barycentric weights scaled by det, exact in integers.
        long la = (B[0] - i) * (Cc[1] - j) - (B[1] - j) * (Cc[0] - i);
        long lb = (Cc[0] - i) * (A[1] - j) - (Cc[1] - j) * (A[0] - i);
        long lc = (A[0] - i) * (B[1] - j) - (A[1] - j) * (B[0] - i);
        if (det < 0) {
          la = -la;
          lb = -lb;
          lc = -lc;
        }
        if (la < 0 || lb < 0 || lc < 0) continue;
        const double d = static_cast<double>(std::abs(det));
        double z;
        if (la == 0 && lb == 0) {
          z = zc;
        } else if (lb == 0 && lc == 0) {
          z = za;
        } else if (la == 0 && lc == 0) {
          z = zb;
        } else {
          z = (static_cast<double>(la) * za + static_cast<double>(lb) * zb + static_cast<double>(lc) * zc) / d;
        }
        double& slot = out[static_cast<std::size_t>(i) * ny + static_cast<std::size_t>(j)];
        slot = std::isnan(slot) ? z : std::min(slot, z);
      }
    }
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (!std::isnan(out[k])) continue;
    const double i = static_cast<double>(k / ny);
    const double j = static_cast<double>(k % ny);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : planes) best = std::min(best, p.a * i + p.b * j + p.c);
    out[k] = std::isfinite(best) ? best : values[k];
  }
  return out;
}

}  // namespace ehedge::detail
