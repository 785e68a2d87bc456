#pragma once

// Gauss-Legendre rules and tensor-product quadrature over axis-aligned boxes.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace blowup_pinn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Axis-aligned hyper-rectangle [lower_i, upper_i].
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dim() const { return lower.size(); }

  double volume() const {
    double v = 1.0;
    for (std::size_t i = 0; i < dim(); ++i) v *= upper[i] - lower[i];
    return v;
  }

  bool contains(const double* p, double tol = 1e-12) const {
    for (std::size_t i = 0; i < dim(); ++i) {
      if (p[i] < lower[i] - tol || p[i] > upper[i] + tol) return false;
    }
    return true;
  }
};

/// Points stored column-wise (dim x n) with one weight per point.
struct PointSet {
  Matrix points;
  Vector weights;

  Eigen::Index size() const { return points.cols(); }
  double weight_sum() const { return weights.sum(); }
};

struct QuadratureRule1D {
  int order = 0;
  Vector nodes;    // ascending, in (-1, 1)
  Vector weights;  // positive
};

namespace detail {

// Returns P_n(x) and writes P_n'(x) via the three-term recurrence.
inline double legendre(int n, double x, double& derivative) {
  double p0 = 1.0;
  double p1 = x;
  if (n == 0) {
    derivative = 0.0;
    return 1.0;
  }
  for (int k = 2; k <= n; ++k) {
    const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = pk;
  }
  derivative = n * (x * p1 - p0) / (x * x - 1.0);
  return p1;
}

}  // namespace detail

/// n-point Gauss-Legendre rule on [-1, 1].
///
/// Roots are found by Newton iteration started from Chebyshev-type guesses
/// (tolerance 1e-14, at most 100 steps); the rule is mirrored so nodes and
/// weights are exactly symmetric about zero.
inline QuadratureRule1D gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1, got " + std::to_string(n));
  QuadratureRule1D rule;
  rule.order = n;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      const double p = detail::legendre(n, x, dp);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-14) break;
    }
    detail::legendre(n, x, dp);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // i-th root counted from the right end.
    rule.nodes[n - 1 - i] = x;
    rule.nodes[i] = -x;
    rule.weights[n - 1 - i] = w;
    rule.weights[i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

/// Tensor product of per-axis rules, affinely mapped onto `box`.
inline PointSet tensor_quadrature(std::span<const QuadratureRule1D> rules, const Box& box) {
  const std::size_t dim = box.dim();
  if (dim == 0 || rules.size() != dim) throw std::invalid_argument("tensor_quadrature: one rule per box axis required");
  for (std::size_t a = 0; a < dim; ++a) {
    if (!(box.upper[a] > box.lower[a])) throw std::invalid_argument("tensor_quadrature: degenerate box on axis " + std::to_string(a));
  }
  Eigen::Index total = 1;
  for (const auto& r : rules) total *= r.order;

  PointSet out;
  out.points.resize(static_cast<Eigen::Index>(dim), total);
  out.weights.resize(total);
  std::vector<int> idx(dim, 0);
  for (Eigen::Index p = 0; p < total; ++p) {
    double w = 1.0;
    for (std::size_t a = 0; a < dim; ++a) {
      const double half = 0.5 * (box.upper[a] - box.lower[a]);
      const double mid = 0.5 * (box.upper[a] + box.lower[a]);
      out.points(static_cast<Eigen::Index>(a), p) = mid + half * rules[a].nodes[idx[a]];
      w *= half * rules[a].weights[idx[a]];
    }
    out.weights[p] = w;
    // last axis fastest
    for (std::size_t a = dim; a-- > 0;) {
      if (++idx[a] < rules[a].order) break;
      idx[a] = 0;
    }
  }
  return out;
}

inline PointSet tensor_quadrature(const QuadratureRule1D& rule, const Box& box) {
  std::vector<QuadratureRule1D> rules(box.dim(), rule);
  return tensor_quadrature(rules, box);
}

/// Inserts a fixed coordinate at row `axis`, lifting a face rule into the full space.
inline PointSet embed_fixed_coordinate(const PointSet& face, Eigen::Index axis, double value) {
  PointSet out;
  const Eigen::Index dim = face.points.rows() + 1;
  out.points.resize(dim, face.points.cols());
  for (Eigen::Index r = 0, src = 0; r < dim; ++r) {
    if (r == axis) {
      out.points.row(r).setConstant(value);
    } else {
      out.points.row(r) = face.points.row(src++);
    }
  }
  out.weights = face.weights;
  return out;
}

/// Sum of w_i g(y_i).
template <class F>
double integrate(const PointSet& set, F&& g) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < set.size(); ++i) acc += set.weights[i] * g(set.points.col(i));
  return acc;
}

}  // namespace blowup_pinn
