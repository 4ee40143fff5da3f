#include "ulfemi/quadrature.hpp"

#include <cmath>

#include "ulfemi/common.hpp"

namespace ulfemi {

GaussRule gauss_legendre(int n) {
  if (n < 1) {
    throw InvalidSpecError("Gauss-Legendre order must be >= 1");
  }
  GaussRule rule;
  if (n == 1) {
    rule.nodes = {0.0};
    rule.weights = {2.0};
    return rule;
  }
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  int const half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Tricomi initial guess, then Newton on P_n.
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        double const pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double const dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) {
        break;
      }
    }
    double const w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[n - 1 - i] = x;
    rule.nodes[i] = -x;
    rule.weights[n - 1 - i] = w;
    rule.weights[i] = w;
  }
  if (n % 2 == 1) {
    rule.nodes[n / 2] = 0.0;
  }
  return rule;
}

GaussRule gauss_legendre(int n, double a, double b) {
  GaussRule rule = gauss_legendre(n);
  double const mid = 0.5 * (a + b);
  double const half = 0.5 * (b - a);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = mid + half * rule.nodes[i];
    rule.weights[i] *= half;
  }
  return rule;
}

} // namespace ulfemi
