#pragma once

#include "tsctl/common.hpp"

#include <vector>

namespace tsctl {

// Admissible membership-rate set: the box of per-rule rate bounds intersected
// with the zero-sum hyperplane, stored by its vertices (one per column of the
// vertex matrix the synthesis conditions enumerate).
struct DerivativePolytope {
  int r = 0;
  Vec phi_lower;
  Vec phi_upper;
  std::vector<Vec> vertices;

  // Vertex matrix, one vertex per column.
  Mat vertex_matrix() const;
};

// Enumerates the vertices of the box/hyperplane intersection. For each
// coordinate j and each assignment of the remaining coordinates to their
// bounds, coordinate j is solved from the zero-sum identity as the negated
// sum of the fixed bounds; candidates outside their own bounds are dropped,
// duplicates merged, and non-extreme points removed by a rank test on the
// active constraints.
//
// Warns to stderr for r >= 7: the vertex count grows as r*2^(r-1) and the
// downstream constraint count with it.
DerivativePolytope enumerate_vertices(const Vec& phi_lower, const Vec& phi_upper);

// Membership test: bounds satisfied and |sum| <= 1e-9.
bool contains(const DerivativePolytope& poly, const Vec& d);

}  // namespace tsctl
