#pragma once

#include <vector>

namespace ulfemi {

struct GaussRule {
  std::vector<double> nodes;   // ascending, on [-1, 1]
  std::vector<double> weights;
};

// Gauss-Legendre rule with n points. Nodes are exactly antisymmetric
// (nodes[i] == -nodes[n-1-i] bitwise) so mirrored integrands cancel to rounding.
GaussRule gauss_legendre(int n);

// Same rule mapped to [a, b].
GaussRule gauss_legendre(int n, double a, double b);

} // namespace ulfemi
