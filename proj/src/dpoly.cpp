#include "tsctl/dpoly.hpp"

#include <Eigen/QR>

#include <cmath>
#include <iostream>

namespace tsctl {

Mat DerivativePolytope::vertex_matrix() const {
  Mat H(r, static_cast<int>(vertices.size()));
  for (std::size_t j = 0; j < vertices.size(); ++j) H.col(static_cast<int>(j)) = vertices[j];
  return H;
}

namespace {

// A candidate is extreme iff the active constraint normals (box facets at the
// candidate plus the all-ones hyperplane normal) span R^r.
bool is_extreme(const Vec& v, const Vec& lo, const Vec& hi, double tol) {
  const int r = static_cast<int>(v.size());
  std::vector<int> active;
  for (int k = 0; k < r; ++k) {
    if (std::abs(v[k] - lo[k]) <= tol || std::abs(v[k] - hi[k]) <= tol) active.push_back(k);
  }
  if (static_cast<int>(active.size()) + 1 < r) return false;
  Mat normals(r, static_cast<int>(active.size()) + 1);
  for (std::size_t a = 0; a < active.size(); ++a) {
    normals.col(static_cast<int>(a)).setZero();
    normals(active[a], static_cast<int>(a)) = 1.0;
  }
  normals.col(static_cast<int>(active.size())).setOnes();
  Eigen::ColPivHouseholderQR<Mat> qr(normals);
  qr.setThreshold(1e-10);
  return qr.rank() == r;
}

}  // namespace

DerivativePolytope enumerate_vertices(const Vec& phi_lower, const Vec& phi_upper) {
  const int r = static_cast<int>(phi_lower.size());
  if (r == 0) throw DimensionError("enumerate_vertices: empty bound vectors");
  if (phi_upper.size() != r) throw DimensionError("enumerate_vertices: bound size mismatch");
  for (int k = 0; k < r; ++k) {
    if (!(phi_lower[k] <= phi_upper[k]))
      throw ValidationError("enumerate_vertices: phi_lower[" + std::to_string(k + 1) +
                            "] exceeds phi_upper[" + std::to_string(k + 1) + "]");
  }
  if (phi_lower.sum() > 0.0 || phi_upper.sum() < 0.0)
    throw ValidationError("enumerate_vertices: zero-sum hyperplane misses the bound box");
  if (r >= 7)
    std::cerr << "warning: exact rate polytope with r=" << r
              << " rules enumerates up to r*2^(r-1) vertices; expect a large constraint set\n";

  const double scale = std::max({1.0, phi_lower.cwiseAbs().maxCoeff(), phi_upper.cwiseAbs().maxCoeff()});
  const double tol = 1e-12 * scale;

  DerivativePolytope poly;
  poly.r = r;
  poly.phi_lower = phi_lower;
  poly.phi_upper = phi_upper;

  if (r == 1) {
    poly.vertices.push_back(Vec::Zero(1));
    return poly;
  }

  std::vector<Vec> candidates;
  const int others = r - 1;
  for (int j = 0; j < r; ++j) {
    for (unsigned mask = 0; mask < (1u << others); ++mask) {
      Vec v(r);
      double fixed_sum = 0.0;
      int bit = 0;
      for (int k = 0; k < r; ++k) {
        if (k == j) continue;
        v[k] = (mask & (1u << bit)) ? phi_upper[k] : phi_lower[k];
        fixed_sum += v[k];
        ++bit;
      }
      // Solved coordinate carries the exact negation of the accumulated sum,
      // so the zero-sum identity holds by construction.
      v[j] = -fixed_sum;
      if (v[j] < phi_lower[j] - tol || v[j] > phi_upper[j] + tol) continue;
      candidates.push_back(v);
    }
  }

  for (const Vec& v : candidates) {
    bool dup = false;
    for (const Vec& w : poly.vertices) {
      if ((v - w).cwiseAbs().maxCoeff() <= tol) {
        dup = true;
        break;
      }
    }
    if (dup) continue;
    if (!is_extreme(v, phi_lower, phi_upper, tol)) continue;
    poly.vertices.push_back(v);
  }

  if (poly.vertices.empty())
    throw ValidationError("enumerate_vertices: no vertex found (degenerate intersection)");
  return poly;
}

bool contains(const DerivativePolytope& poly, const Vec& d) {
  if (d.size() != poly.r) throw DimensionError("contains: dimension mismatch");
  for (int k = 0; k < poly.r; ++k) {
    if (d[k] < poly.phi_lower[k] || d[k] > poly.phi_upper[k]) return false;
  }
  return std::abs(d.sum()) <= 1e-9;
}

}  // namespace tsctl
