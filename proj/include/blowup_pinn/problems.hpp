#pragma once

// Inviscid Burgers' instances with closed-form finite-time blow-up solutions,
// their residual operators and the PINN losses built on them.

#include <cmath>
#include <concepts>
#include <functional>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "blowup_pinn/diffnet.hpp"
#include "blowup_pinn/quadrature.hpp"
#include "blowup_pinn/sampling.hpp"

namespace blowup_pinn {

inline constexpr double kDefaultDeltaMargin = 1e-6;

enum class ProblemKind { burgers1d, burgers2d };

inline std::string to_string(ProblemKind k) { return k == ProblemKind::burgers1d ? "burgers1d" : "burgers2d"; }

inline ProblemKind parse_problem_kind(std::string_view s) {
  if (s == "burgers1d") return ProblemKind::burgers1d;
  if (s == "burgers2d") return ProblemKind::burgers2d;
  throw std::invalid_argument("unknown problem '" + std::string(s) + "' (burgers1d | burgers2d)");
}

/// Thrown when delta is outside the problem's admissible interval.
class InvalidDelta : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// u_t + u u_x = 0 on [-1, 1] x [-1 + delta, delta] with exact solution
/// u = x / (t - 1), which blows up at t = 1.
class Burgers1D {
 public:
  static constexpr int space_dim = 1;

  explicit Burgers1D(double delta, double margin = kDefaultDeltaMargin) : delta_(delta), margin_(margin) {
    if (!(margin >= 0.0) || !(delta >= margin && delta > 0.0 && delta <= 1.0 - margin && delta < 1.0)) {
      std::ostringstream os;
      os << "burgers1d: delta must satisfy 0 < delta < 1 (with margin " << margin << "), got " << delta;
      throw InvalidDelta(os.str());
    }
  }

  static constexpr std::string_view name() { return "burgers1d"; }
  double delta() const { return delta_; }
  double margin() const { return margin_; }
  double t0() const { return -1.0 + delta_; }
  double t1() const { return delta_; }
  double window_length() const { return t1() - t0(); }

  Box space_box() const { return {{-1.0}, {1.0}}; }
  Box space_time_box() const { return {{-1.0, t0()}, {1.0, t1()}}; }

  std::vector<Face> faces() const { return {{0, -1.0, 0, "x=-1"}, {0, 1.0, 0, "x=1"}}; }

  double exact(double x, double t) const { return x / (t - 1.0); }

  /// Exact solution with analytic derivatives; d[0] = d/dx, d[1] = d/dt.
  JetBatch exact_jet(const Matrix& pts, bool with_jet = true) const {
    JetBatch out;
    const Eigen::Index n = pts.cols();
    out.value.resize(1, n);
    if (with_jet) out.d.assign(2, Matrix(1, n));
    for (Eigen::Index i = 0; i < n; ++i) {
      const double x = pts(0, i);
      const double tm1 = pts(1, i) - 1.0;
      out.value(0, i) = x / tm1;
      if (with_jet) {
        out.d[0](0, i) = 1.0 / tm1;
        out.d[1](0, i) = -x / (tm1 * tm1);
      }
    }
    return out;
  }

  /// Initial datum u(x, -1 + delta) = x / (-2 + delta).
  Matrix initial_value(const Matrix& pts) const {
    Matrix out(1, pts.cols());
    for (Eigen::Index i = 0; i < pts.cols(); ++i) out(0, i) = pts(0, i) / (-2.0 + delta_);
    return out;
  }

  /// Boundary data: u(-1, t) = 1/(1 - t), u(1, t) = 1/(t - 1).
  double boundary_value(int face, const double* p) const {
    const double t = p[1];
    switch (face) {
      case 0: return 1.0 / (1.0 - t);
      case 1: return 1.0 / (t - 1.0);
      default: throw std::invalid_argument("burgers1d: unknown boundary id " + std::to_string(face));
    }
  }

  /// sup |u_x| over the domain = 1/(1 - delta).
  double exact_gradient_sup() const { return 1.0 / (1.0 - delta_); }

  /// Integral of u^2 over the space-time domain in closed form.
  double exact_norm_sq_integral() const {
    auto antiderivative = [](double t) { return (2.0 / 3.0) / (1.0 - t); };
    return antiderivative(t1()) - antiderivative(t0());
  }

 private:
  double delta_;
  double margin_;
};

/// u_t + (u . grad) u = 0 on [0,1]^2 x [-1/sqrt2 + delta, delta] with exact
/// solution u1 = (x1 + x2 - 2 x1 t)/(1 - 2t^2), u2 = (x1 - x2 - 2 x2 t)/(1 - 2t^2),
/// singular at t = +-1/sqrt2.
class Burgers2D {
 public:
  static constexpr int space_dim = 2;

  explicit Burgers2D(double delta, double margin = kDefaultDeltaMargin) : delta_(delta), margin_(margin) {
    const double upper = 1.0 / std::numbers::sqrt2;
    if (!(margin >= 0.0) || !(delta >= margin && delta > 0.0 && delta <= upper - margin && delta < upper)) {
      std::ostringstream os;
      os << "burgers2d: delta must satisfy 0 < delta < 1/sqrt(2) (with margin " << margin << "), got " << delta;
      throw InvalidDelta(os.str());
    }
  }

  static constexpr std::string_view name() { return "burgers2d"; }
  double delta() const { return delta_; }
  double margin() const { return margin_; }
  double t0() const { return -1.0 / std::numbers::sqrt2 + delta_; }
  double t1() const { return delta_; }
  double window_length() const { return t1() - t0(); }

  Box space_box() const { return {{0.0, 0.0}, {1.0, 1.0}}; }
  Box space_time_box() const { return {{0.0, 0.0, t0()}, {1.0, 1.0, t1()}}; }

  /// u1 is constrained on the x1-faces, u2 on the x2-faces.
  std::vector<Face> faces() const {
    return {{0, 0.0, 0, "x1=0"}, {0, 1.0, 0, "x1=1"}, {1, 0.0, 1, "x2=0"}, {1, 1.0, 1, "x2=1"}};
  }

  /// d[0] = d/dx1, d[1] = d/dx2, d[2] = d/dt.
  JetBatch exact_jet(const Matrix& pts, bool with_jet = true) const {
    JetBatch out;
    const Eigen::Index n = pts.cols();
    out.value.resize(2, n);
    if (with_jet) out.d.assign(3, Matrix(2, n));
    for (Eigen::Index i = 0; i < n; ++i) {
      const double x1 = pts(0, i), x2 = pts(1, i), t = pts(2, i);
      const double den = 1.0 - 2.0 * t * t;
      const double n1 = x1 + x2 - 2.0 * x1 * t;
      const double n2 = x1 - x2 - 2.0 * x2 * t;
      out.value(0, i) = n1 / den;
      out.value(1, i) = n2 / den;
      if (with_jet) {
        out.d[0](0, i) = (1.0 - 2.0 * t) / den;
        out.d[1](0, i) = 1.0 / den;
        out.d[0](1, i) = 1.0 / den;
        out.d[1](1, i) = -(1.0 + 2.0 * t) / den;
        out.d[2](0, i) = (-2.0 * x1 * den + 4.0 * t * n1) / (den * den);
        out.d[2](1, i) = (-2.0 * x2 * den + 4.0 * t * n2) / (den * den);
      }
    }
    return out;
  }

  /// Initial data at t0 = -1/sqrt2 + delta, written in terms of delta.
  Matrix initial_value(const Matrix& pts) const {
    const double s2 = std::numbers::sqrt2;
    const double den = 2.0 * delta_ * (s2 - delta_);
    Matrix out(2, pts.cols());
    for (Eigen::Index i = 0; i < pts.cols(); ++i) {
      const double x1 = pts(0, i), x2 = pts(1, i);
      out(0, i) = ((1.0 + s2 - 2.0 * delta_) * x1 + x2) / den;
      out(1, i) = (x1 - (1.0 - s2 + 2.0 * delta_) * x2) / den;
    }
    return out;
  }

  double boundary_value(int face, const double* p) const {
    const double x1 = p[0], x2 = p[1], t = p[2];
    const double den = 1.0 - 2.0 * t * t;
    switch (face) {
      case 0: return x2 / den;
      case 1: return (1.0 + x2 - 2.0 * t) / den;
      case 2: return x1 / den;
      case 3: return (x1 - 1.0 - 2.0 * t) / den;
      default: throw std::invalid_argument("burgers2d: unknown boundary id " + std::to_string(face));
    }
  }

  /// Max row-sum of |grad u| over the window, attained at an endpoint of the
  /// time interval (the spatial Jacobian does not depend on x).
  double exact_gradient_sup() const {
    double best = 0.0;
    for (double t : {t0(), t1()}) {
      const double den = 1.0 - 2.0 * t * t;
      const double row1 = std::abs((1.0 - 2.0 * t) / den) + std::abs(1.0 / den);
      const double row2 = std::abs(1.0 / den) + std::abs((1.0 + 2.0 * t) / den);
      best = std::max(best, std::max(row1, row2));
    }
    return best;
  }

  /// Integral of |u|^2 over [0,1]^2 x [t0, delta] from the antiderivative
  /// (11t - 7)/(12(1 - 2t^2)) + (5t + 1)/(12(1 - 2t^2)).
  double exact_norm_sq_integral() const {
    auto antiderivative = [](double t) {
      const double den = 12.0 * (1.0 - 2.0 * t * t);
      return (11.0 * t - 7.0) / den + (5.0 * t + 1.0) / den;
    };
    return antiderivative(t1()) - antiderivative(t0());
  }

 private:
  double delta_;
  double margin_;
};

template <class P>
concept BurgersProblem = requires(const P& p, const Matrix& m) {
  { P::space_dim } -> std::convertible_to<int>;
  { p.t0() } -> std::convertible_to<double>;
  { p.space_time_box() } -> std::same_as<Box>;
  { p.exact_jet(m, true) } -> std::same_as<JetBatch>;
  { p.initial_value(m) } -> std::same_as<Matrix>;
};

/// Calls f(problem) with the concrete problem type selected at runtime.
template <class F>
auto with_problem(ProblemKind kind, double delta, double margin, F&& f) {
  if (kind == ProblemKind::burgers1d) return f(Burgers1D(delta, margin));
  return f(Burgers2D(delta, margin));
}

// ---------------------------------------------------------------------------
// Surrogates: anything that evaluates values (and optionally input jets) on a
// batch of space-time points.

template <class S>
concept Surrogate = requires(const S& s, const Matrix& pts) {
  { s.evaluate(pts, true) } -> std::same_as<JetBatch>;
};

struct NetworkSurrogate {
  const NetworkParams* params;

  explicit NetworkSurrogate(const NetworkParams& p) : params(&p) {}
  JetBatch evaluate(const Matrix& pts, bool with_jet) const { return evaluate_batch(*params, pts, with_jet); }
};

template <class Problem>
struct ExactSurrogate {
  Problem problem;

  JetBatch evaluate(const Matrix& pts, bool with_jet) const { return problem.exact_jet(pts, with_jet); }
};

template <class Problem>
ExactSurrogate(Problem) -> ExactSurrogate<Problem>;

/// Point-wise closure surrogate (tests, analytic fields).
struct FieldSurrogate {
  int output_dim = 1;
  std::function<JetValue(const Vector&)> field;

  JetBatch evaluate(const Matrix& pts, bool with_jet) const {
    JetBatch out;
    out.value.resize(output_dim, pts.cols());
    if (with_jet) out.d.assign(static_cast<std::size_t>(pts.rows()), Matrix(output_dim, pts.cols()));
    for (Eigen::Index i = 0; i < pts.cols(); ++i) {
      const JetValue j = field(pts.col(i));
      out.value.col(i) = j.value;
      if (with_jet)
        for (Eigen::Index k = 0; k < pts.rows(); ++k) out.d[k].col(i) = j.input_jacobian.col(k);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Residuals

/// d_t u + (u . grad) u for every column; time is the last input coordinate.
inline Matrix interior_residual(const JetBatch& jet) {
  const Eigen::Index d = jet.value.rows();
  Matrix r = jet.d[d];
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) r.row(i).array() += jet.value.row(j).array() * jet.d[j].row(i).array();
  }
  return r;
}

template <class Problem>
Matrix initial_residual(const Problem& problem, const JetBatch& jet, const Matrix& pts) {
  return jet.value - problem.initial_value(pts);
}

template <class Problem>
Vector boundary_residual(const Problem& problem, int face_id, const JetBatch& jet, const Matrix& pts) {
  const auto faces = problem.faces();
  if (face_id < 0 || face_id >= static_cast<int>(faces.size()))
    throw std::invalid_argument(std::string(Problem::name()) + ": unknown boundary id " + std::to_string(face_id));
  const int comp = faces[face_id].component;
  Vector r(pts.cols());
  for (Eigen::Index i = 0; i < pts.cols(); ++i) r[i] = jet.value(comp, i) - problem.boundary_value(face_id, pts.col(i).data());
  return r;
}

namespace detail {

inline Matrix single_column(const Vector& p) {
  Matrix m(p.size(), 1);
  m.col(0) = p;
  return m;
}

template <class Problem>
void require_in_domain(const Problem& problem, const Vector& point, const char* op) {
  const Box box = problem.space_time_box();
  if (point.size() != static_cast<Eigen::Index>(box.dim()) || !box.contains(point.data())) {
    std::ostringstream os;
    os << op << ": point (";
    for (Eigen::Index i = 0; i < point.size(); ++i) os << (i ? ", " : "") << point[i];
    os << ") outside the " << Problem::name() << " space-time domain";
    throw std::out_of_range(os.str());
  }
}

}  // namespace detail

/// R_pde at one space-time point.
template <class Problem, Surrogate S>
Vector residual_interior(const Problem& problem, const S& surrogate, const Vector& point) {
  detail::require_in_domain(problem, point, "residual_interior");
  return interior_residual(surrogate.evaluate(detail::single_column(point), true)).col(0);
}

/// u_theta(x, t0) - u(x, t0) at one spatial point.
template <class Problem, Surrogate S>
Vector residual_initial(const Problem& problem, const S& surrogate, const Vector& x) {
  const Box space = problem.space_box();
  if (x.size() != static_cast<Eigen::Index>(space.dim()) || !space.contains(x.data()))
    throw std::out_of_range("residual_initial: spatial point outside the domain");
  Vector p(x.size() + 1);
  p.head(x.size()) = x;
  p[x.size()] = problem.t0();
  const Matrix pts = detail::single_column(p);
  return initial_residual(problem, surrogate.evaluate(pts, false), pts).col(0);
}

/// Surrogate component minus boundary datum at a point on face `face_id`.
template <class Problem, Surrogate S>
double residual_boundary(const Problem& problem, const S& surrogate, int face_id, const Vector& point) {
  const auto faces = problem.faces();
  if (face_id < 0 || face_id >= static_cast<int>(faces.size()))
    throw std::invalid_argument(std::string(Problem::name()) + ": unknown boundary id " + std::to_string(face_id));
  detail::require_in_domain(problem, point, "residual_boundary");
  if (std::abs(point[faces[face_id].axis] - faces[face_id].position) > 1e-12)
    throw std::out_of_range("residual_boundary: point not on face " + faces[face_id].name);
  const Matrix pts = detail::single_column(point);
  return boundary_residual(problem, face_id, surrogate.evaluate(pts, false), pts)[0];
}

// ---------------------------------------------------------------------------
// Losses

/// Loss families: interior, initial, then one per face. Each contributes
/// (1/N) sum_n w_n |R_n|^2 (unit weights for random/grid collocation).
template <class Problem>
std::vector<LossTerm> pinn_loss_terms(const Problem& problem, const CollocationSet& set) {
  std::vector<LossTerm> terms;
  auto check = [](const PointSet& ps, const std::string& name) {
    if (ps.size() == 0) throw std::invalid_argument("empirical loss: empty collocation family '" + name + "'");
  };

  check(set.interior, "interior");
  {
    LossTerm t;
    t.name = "interior";
    t.points = set.interior.points;
    t.needs_jet = true;
    const Vector scale = set.interior.weights / static_cast<double>(set.interior.size());
    t.evaluate = [scale](const JetBatch& jet, JetBatch& adj) {
      const Eigen::Index d = jet.value.rows();
      const Matrix r = interior_residual(jet);
      const Eigen::RowVectorXd sq = r.colwise().squaredNorm();
      const double loss = sq.dot(scale.transpose());
      const Eigen::RowVectorXd twice = 2.0 * scale.transpose();
      const Matrix g = (r.array().rowwise() * twice.array()).matrix();
      adj.d[d] = g;
      for (Eigen::Index j = 0; j < d; ++j) {
        adj.d[j] = (g.array().rowwise() * jet.value.row(j).array()).matrix();
        adj.value.row(j) = (g.array() * jet.d[j].array()).colwise().sum();
      }
      return loss;
    };
    terms.push_back(std::move(t));
  }

  check(set.initial, "initial");
  {
    LossTerm t;
    t.name = "initial";
    t.points = set.initial.points;
    const Matrix target = problem.initial_value(set.initial.points);
    const Vector scale = set.initial.weights / static_cast<double>(set.initial.size());
    t.evaluate = [target, scale](const JetBatch& jet, JetBatch& adj) {
      const Matrix r = jet.value - target;
      const Eigen::RowVectorXd twice = 2.0 * scale.transpose();
      adj.value = (r.array().rowwise() * twice.array()).matrix();
      return r.colwise().squaredNorm().dot(scale.transpose());
    };
    terms.push_back(std::move(t));
  }

  const auto faces = problem.faces();
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const PointSet& ps = set.boundary.at(f);
    check(ps, "boundary:" + faces[f].name);
    LossTerm t;
    t.name = "boundary:" + faces[f].name;
    t.points = ps.points;
    Eigen::RowVectorXd target(ps.size());
    for (Eigen::Index i = 0; i < ps.size(); ++i) target[i] = problem.boundary_value(static_cast<int>(f), ps.points.col(i).data());
    const Vector scale = ps.weights / static_cast<double>(ps.size());
    const int comp = faces[f].component;
    t.evaluate = [target, scale, comp](const JetBatch& jet, JetBatch& adj) {
      const Eigen::RowVectorXd r = jet.value.row(comp) - target;
      adj.value.row(comp) = 2.0 * r.array() * scale.transpose().array();
      return r.array().square().matrix().dot(scale.transpose());
    };
    terms.push_back(std::move(t));
  }
  return terms;
}

/// Per-family breakdown of the empirical PINN loss.
struct LossBreakdown {
  std::vector<std::string> names;
  std::vector<double> values;

  double total() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
};

template <class Problem, Surrogate S>
LossBreakdown empirical_loss_breakdown(const Problem& problem, const S& surrogate, const CollocationSet& set) {
  LossBreakdown out;
  for (const LossTerm& term : pinn_loss_terms(problem, set)) {
    const JetBatch jet = surrogate.evaluate(term.points, term.needs_jet);
    JetBatch adj = JetBatch::zeros_like(jet);
    out.names.push_back(term.name);
    out.values.push_back(term.evaluate(jet, adj));
  }
  return out;
}

/// Sum over families of the mean squared residual (weighted by w_n when present).
template <class Problem, Surrogate S>
double empirical_loss(const Problem& problem, const S& surrogate, const CollocationSet& set) {
  return empirical_loss_breakdown(problem, surrogate, set).total();
}

struct L2Risk {
  double integral = 0.0;  // int |u - u_theta|^2 dx dt
  double e_g() const { return std::sqrt(integral); }
};

/// Quadrature approximation of the squared L2 distance to the exact solution.
template <class Problem, Surrogate S>
L2Risk l2_risk(const Problem& problem, const S& surrogate, const PointSet& grid) {
  const Box box = problem.space_time_box();
  if (grid.points.rows() != static_cast<Eigen::Index>(box.dim()))
    throw std::invalid_argument("l2_risk: grid dimension does not match the problem");
  for (Eigen::Index i = 0; i < grid.size(); ++i)
    if (!box.contains(grid.points.col(i).data())) throw std::invalid_argument("l2_risk: grid point outside the domain");
  const JetBatch approx = surrogate.evaluate(grid.points, false);
  const JetBatch exact = problem.exact_jet(grid.points, false);
  const Eigen::RowVectorXd sq = (exact.value - approx.value).colwise().squaredNorm();
  return {sq.dot(grid.weights.transpose())};
}

/// Tensor Gauss-Legendre grid over the whole space-time domain.
template <class Problem>
PointSet integration_grid(const Problem& problem, int order) {
  return tensor_quadrature(gauss_legendre(order), problem.space_time_box());
}

}  // namespace blowup_pinn
