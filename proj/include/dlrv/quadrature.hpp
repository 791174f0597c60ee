#pragma once

#include <vector>

#include "dlrv/mesh.hpp"

namespace dlrv {

/// Quadrature rule on the reference element: unit interval [0,1] or the
/// unit triangle (0,0),(1,0),(0,1). Weights sum to the reference measure
/// (1 resp. 1/2).
struct QuadRule {
  std::vector<Vec2> points;   // reference coordinates (y unused in 1D)
  std::vector<double> weights;
  int size() const { return static_cast<int>(points.size()); }
};

/// Gauss-Legendre rule exact for polynomials up to the given degree.
const QuadRule& interval_rule(int degree);

/// Symmetric triangle rule exact up to the given degree (max 6).
const QuadRule& triangle_rule(int degree);

/// Rule for a mesh element of the given dimension.
inline const QuadRule& element_rule(int dim, int degree) {
  return dim == 1 ? interval_rule(degree) : triangle_rule(degree);
}

}  // namespace dlrv
