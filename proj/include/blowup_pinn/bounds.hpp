#pragma once

// Numerical evaluation of the three risk bounds and the statistics used by
// the sweep summaries.
//
// T1 (any d, time window of length 1/sqrt(2)):
//   log int_Omega |u - u_theta|^2 <= log(C1 C2 / 4) + C1 / sqrt(2)
//   C1 = d^2 |grad u_theta|_inf + 1 + d^2 |grad u|_inf
//   C2 = int_D |R_t|^2 + int_Omega |R_pde|^2
//        + d^2 |grad u_theta|_inf int_Omega |u_theta|^2 + d^2 |grad u|_inf int_Omega |u|^2
//
// T2 (1+1, delta in (0, 1)):
//   E_G^2 <= (1 + C e^C) C_T
//   C_T = int R_tb^2 + 2 C_2b (int R_sb,-1^2 + int R_sb,1^2)
//         + 2 C_1b (sqrt(int R_sb,-1^2) + sqrt(int R_sb,1^2)) + int int R_int^2
//   C = 1 + 2 C_ux, C_ux = 1/(1-delta), C_1b = 1/(1-delta)^2,
//   C_2b = sup_t |u_theta(1, t)| + (3/2)/(1-delta)
//
// B1: T2 with every integral replaced by its quadrature sum
// sum_n w_n R^2 and additive C_quad / N^alpha corrections.
//
// |grad u|_inf is the largest absolute row sum of the spatial Jacobian
// (max_i sum_j |d u_i / d x_j|), taken over the space-time domain.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "blowup_pinn/checkpoint.hpp"
#include "blowup_pinn/problems.hpp"
#include "blowup_pinn/sampling.hpp"

namespace blowup_pinn {

// ---------------------------------------------------------------------------
// Sup-norm estimation

struct SupEstimate {
  double value = 0.0;
  Vector argmax;
};

/// max |f| over a regular grid with `resolution` points per axis, endpoints
/// (hence all corners) included. `f` maps a (dim x n) block of points to n
/// values. Throws std::runtime_error naming the point on a non-finite value.
template <class F>
SupEstimate sup_norm_estimate(F&& f, const Box& box, int resolution, Eigen::Index chunk = 16384) {
  if (resolution < 2) throw std::invalid_argument("sup_norm_estimate: resolution must be >= 2 per axis");
  const std::size_t dim = box.dim();
  if (dim == 0) throw std::invalid_argument("sup_norm_estimate: empty box");

  std::vector<std::vector<double>> axes(dim);
  for (std::size_t a = 0; a < dim; ++a) {
    axes[a].resize(static_cast<std::size_t>(resolution));
    const double lo = box.lower[a], hi = box.upper[a];
    for (int i = 0; i < resolution; ++i) axes[a][static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (resolution - 1);
    axes[a].back() = hi;
  }
  Eigen::Index total = 1;
  for (std::size_t a = 0; a < dim; ++a) total *= resolution;

  SupEstimate best;
  best.value = -1.0;
  std::vector<int> idx(dim, 0);
  for (Eigen::Index start = 0; start < total; start += chunk) {
    const Eigen::Index len = std::min(chunk, total - start);
    Matrix pts(static_cast<Eigen::Index>(dim), len);
    for (Eigen::Index p = 0; p < len; ++p) {
      for (std::size_t a = 0; a < dim; ++a) pts(static_cast<Eigen::Index>(a), p) = axes[a][static_cast<std::size_t>(idx[a])];
      for (std::size_t a = dim; a-- > 0;) {
        if (++idx[a] < resolution) break;
        idx[a] = 0;
      }
    }
    const auto values = f(pts);
    if (values.size() != len) throw std::logic_error("sup_norm_estimate: function returned wrong number of values");
    for (Eigen::Index p = 0; p < len; ++p) {
      const double v = values[p];
      if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "sup_norm_estimate: non-finite value at (";
        for (Eigen::Index a = 0; a < pts.rows(); ++a) os << (a ? ", " : "") << pts(a, p);
        os << ")";
        throw std::runtime_error(os.str());
      }
      if (std::abs(v) > best.value) {
        best.value = std::abs(v);
        best.argmax = pts.col(p);
      }
    }
  }
  return best;
}

/// Per-point max_i sum_{j < space_dim} |d u_i / d x_j|.
inline Eigen::RowVectorXd spatial_gradient_norm(const JetBatch& jet) {
  const Eigen::Index d = jet.value.rows();
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(jet.size());
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(jet.size());
    for (Eigen::Index j = 0; j < d; ++j) row.array() += jet.d[j].row(i).array().abs();
    out = out.cwiseMax(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grids

template <class Problem>
int default_integration_order() {
  return Problem::space_dim == 1 ? 64 : 32;
}

template <class Problem>
int default_sup_resolution() {
  return Problem::space_dim == 1 ? 512 : 128;
}

/// Weighted point families used to approximate every integral of a bound.
struct IntegrationGrids {
  PointSet interior;               // space-time domain (also used for the risk)
  PointSet initial;                // spatial domain at t0
  std::vector<PointSet> boundary;  // one per face, in problem.faces() order
  int sup_resolution = 512;
  std::string description;
};

/// Tensor Gauss-Legendre rules of `order` nodes per axis on every family.
template <class Problem>
IntegrationGrids gauss_legendre_grids(const Problem& problem, int order, int sup_resolution) {
  const CollocationCounts counts{static_cast<int>(std::lround(std::pow(order, Problem::space_dim + 1))),
                                 static_cast<int>(std::lround(std::pow(order, Problem::space_dim))),
                                 static_cast<int>(std::lround(std::pow(order, Problem::space_dim)))};
  const CollocationSet set = sample_collocation(problem, counts, Scheme::gauss_legendre, 0);
  IntegrationGrids g{set.interior, set.initial, set.boundary, sup_resolution, {}};
  g.description = "gauss-legendre:" + std::to_string(order) + "/sup:" + std::to_string(sup_resolution);
  return g;
}

template <class Problem>
IntegrationGrids default_grids(const Problem& problem) {
  return gauss_legendre_grids(problem, default_integration_order<Problem>(), default_sup_resolution<Problem>());
}

/// Reuses a quadrature collocation set as the integration grids.
template <class Problem>
IntegrationGrids grids_from_collocation(const Problem& problem, const CollocationSet& set, int sup_resolution) {
  (void)problem;
  if (!set.has_quadrature_weights())
    throw std::invalid_argument("collocation scheme '" + to_string(set.scheme) +
                                "' has no quadrature weights; use --scheme gauss-legendre");
  IntegrationGrids g{set.interior, set.initial, set.boundary, sup_resolution, {}};
  g.description = "collocation:" + std::to_string(set.n_int()) + "/" + std::to_string(set.n_tb()) + "/" +
                  std::to_string(set.n_sb()) + "/sup:" + std::to_string(sup_resolution);
  return g;
}

namespace detail {

inline double weighted_sum(const PointSet& ps, const Eigen::RowVectorXd& values) {
  return values.dot(ps.weights.transpose());
}

template <class Problem, Surrogate S>
Matrix initial_residual_at(const Problem& problem, const S& s, const PointSet& ps) {
  return initial_residual(problem, s.evaluate(ps.points, false), ps.points);
}

template <class Problem, Surrogate S>
Eigen::RowVectorXd boundary_residual_at(const Problem& problem, const S& s, int face, const PointSet& ps) {
  return boundary_residual(problem, face, s.evaluate(ps.points, false), ps.points).transpose();
}

// sup_t |u_theta(x = 1, t)| for the 1+1 problem.
template <Surrogate S>
SupEstimate right_boundary_sup(const Burgers1D& problem, const S& s, int resolution) {
  const Box time{{problem.t0()}, {problem.t1()}};
  return sup_norm_estimate(
      [&](const Matrix& t) {
        Matrix pts(2, t.cols());
        pts.row(0).setOnes();
        pts.row(1) = t.row(0);
        return Eigen::RowVectorXd(s.evaluate(pts, false).value.row(0));
      },
      time, resolution);
}

inline double log_or_neg_inf(double x) {
  return x < 1e-300 ? -std::numeric_limits<double>::infinity() : std::log(x);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// T1: log-risk bound

struct Theorem1Report {
  double delta = 0.0;
  int d = 0;
  double sup_grad_surrogate = 0.0;
  Vector sup_grad_argmax;
  double sup_grad_exact = 0.0;
  // C1 = c1_surrogate + 1 + c1_exact
  double c1_surrogate = 0.0;
  double c1_exact = 0.0;
  double C1 = 0.0;
  // C2 addends
  double initial_residual = 0.0;  // int_D |R_t|^2
  double pde_residual = 0.0;      // int_Omega |R_pde|^2
  double norm_sq_surrogate = 0.0;  // int_Omega |u_theta|^2
  double norm_sq_exact = 0.0;      // int_Omega |u|^2, closed form
  double norm_sq_exact_numeric = 0.0;
  double surrogate_term = 0.0;  // d^2 |grad u_theta| int |u_theta|^2
  double exact_term = 0.0;      // d^2 |grad u| int |u|^2
  double C2 = 0.0;
  double rhs = 0.0;
  double risk = 0.0;  // int_Omega |u - u_theta|^2
  double lhs = 0.0;   // log(risk), -inf below 1e-300
  std::string grid;

  double margin() const { return rhs - lhs; }
  bool dominates(double rel_tol = 1e-9) const {
    return lhs == -std::numeric_limits<double>::infinity() || rhs - lhs >= -rel_tol * std::max(1.0, std::abs(rhs));
  }
};

template <class Problem, Surrogate S>
Theorem1Report theorem1_bound(const Problem& problem, const S& surrogate, const IntegrationGrids& grids) {
  constexpr double kWindow = 1.0 / std::numbers::sqrt2;
  if (std::abs(problem.window_length() - kWindow) > 1e-12)
    throw std::invalid_argument(std::string("t1 bound: requires a time window of length 1/sqrt(2); ") +
                                std::string(Problem::name()) + " has length " + std::to_string(problem.window_length()));
  constexpr int d = Problem::space_dim;
  const double d2 = static_cast<double>(d * d);

  Theorem1Report r;
  r.delta = problem.delta();
  r.d = d;
  r.grid = grids.description;

  const SupEstimate sup = sup_norm_estimate(
      [&](const Matrix& pts) { return spatial_gradient_norm(surrogate.evaluate(pts, true)); }, problem.space_time_box(),
      grids.sup_resolution);
  r.sup_grad_surrogate = sup.value;
  r.sup_grad_argmax = sup.argmax;
  r.sup_grad_exact = problem.exact_gradient_sup();
  r.c1_surrogate = d2 * r.sup_grad_surrogate;
  r.c1_exact = d2 * r.sup_grad_exact;
  r.C1 = r.c1_surrogate + 1.0 + r.c1_exact;

  r.initial_residual = detail::weighted_sum(
      grids.initial, detail::initial_residual_at(problem, surrogate, grids.initial).colwise().squaredNorm());

  const JetBatch jet = surrogate.evaluate(grids.interior.points, true);
  const JetBatch exact = problem.exact_jet(grids.interior.points, false);
  r.pde_residual = detail::weighted_sum(grids.interior, interior_residual(jet).colwise().squaredNorm());
  r.norm_sq_surrogate = detail::weighted_sum(grids.interior, jet.value.colwise().squaredNorm());
  r.norm_sq_exact_numeric = detail::weighted_sum(grids.interior, exact.value.colwise().squaredNorm());
  r.norm_sq_exact = problem.exact_norm_sq_integral();
  r.surrogate_term = r.c1_surrogate * r.norm_sq_surrogate;
  r.exact_term = r.c1_exact * r.norm_sq_exact;
  r.C2 = r.initial_residual + r.pde_residual + r.surrogate_term + r.exact_term;
  r.rhs = std::log(r.C1 * r.C2 / 4.0) + r.C1 / std::numbers::sqrt2;

  r.risk = detail::weighted_sum(grids.interior, (exact.value - jet.value).colwise().squaredNorm());
  r.lhs = detail::log_or_neg_inf(r.risk);
  return r;
}

// ---------------------------------------------------------------------------
// T2: 1+1 risk bound

struct Theorem2Options {
  // Use int R_tb (unsquared) as the first C_T addend instead of int R_tb^2.
  bool unsquared_initial = false;
};

struct Theorem2Report {
  double delta = 0.0;
  double C_ux = 0.0;
  double C = 0.0;
  double C_1b = 0.0;
  double sup_boundary_surrogate = 0.0;  // sup_t |u_theta(1, t)|
  double C_2b = 0.0;
  bool unsquared_initial = false;
  double initial_term = 0.0;     // int R_tb^2 (or int R_tb)
  double sb_left_sq = 0.0;       // int R_sb,-1^2
  double sb_right_sq = 0.0;      // int R_sb,1^2
  double sb_left_root = 0.0;     // sqrt(int R_sb,-1^2)
  double sb_right_root = 0.0;    // sqrt(int R_sb,1^2)
  double interior_term = 0.0;    // int int R_int^2
  double C_T = 0.0;
  double prefactor = 0.0;  // 1 + C e^C
  double rhs = 0.0;
  double lhs = 0.0;  // E_G^2
  std::string grid;

  double margin() const { return rhs - lhs; }
  bool dominates(double rel_tol = 1e-9) const { return rhs - lhs >= -rel_tol * std::max(1.0, std::abs(rhs)); }
};

namespace detail {

struct Theorem2Constants {
  double C_ux, C, C_1b, prefactor;
};

inline Theorem2Constants theorem2_constants(const Burgers1D& problem) {
  const double c_ux = problem.exact_gradient_sup();
  const double c = 1.0 + 2.0 * c_ux;
  return {c_ux, c, 1.0 / ((1.0 - problem.delta()) * (1.0 - problem.delta())), 1.0 + c * std::exp(c)};
}

inline double assemble_residual_sum(double initial, double interior, double left_sq, double right_sq, double c_2b,
                                    double c_1b) {
  return initial + 2.0 * c_2b * (left_sq + right_sq) + 2.0 * c_1b * (std::sqrt(left_sq) + std::sqrt(right_sq)) +
         interior;
}

}  // namespace detail

template <Surrogate S>
Theorem2Report theorem2_bound(const Burgers1D& problem, const S& surrogate, const IntegrationGrids& grids,
                              const Theorem2Options& options = {}) {
  if (grids.boundary.size() != 2) throw std::invalid_argument("t2 bound: expected two boundary families");
  const auto k = detail::theorem2_constants(problem);
  Theorem2Report r;
  r.delta = problem.delta();
  r.grid = grids.description;
  r.C_ux = k.C_ux;
  r.C = k.C;
  r.C_1b = k.C_1b;
  r.prefactor = k.prefactor;
  r.sup_boundary_surrogate = detail::right_boundary_sup(problem, surrogate, grids.sup_resolution).value;
  r.C_2b = r.sup_boundary_surrogate + 1.5 / (1.0 - problem.delta());

  const Matrix r_tb = detail::initial_residual_at(problem, surrogate, grids.initial);
  r.unsquared_initial = options.unsquared_initial;
  r.initial_term = options.unsquared_initial ? detail::weighted_sum(grids.initial, r_tb.row(0))
                                             : detail::weighted_sum(grids.initial, r_tb.row(0).array().square().matrix());
  r.sb_left_sq = detail::weighted_sum(
      grids.boundary[0], detail::boundary_residual_at(problem, surrogate, 0, grids.boundary[0]).array().square().matrix());
  r.sb_right_sq = detail::weighted_sum(
      grids.boundary[1], detail::boundary_residual_at(problem, surrogate, 1, grids.boundary[1]).array().square().matrix());
  r.sb_left_root = std::sqrt(r.sb_left_sq);
  r.sb_right_root = std::sqrt(r.sb_right_sq);

  const JetBatch jet = surrogate.evaluate(grids.interior.points, true);
  r.interior_term = detail::weighted_sum(grids.interior, interior_residual(jet).colwise().squaredNorm());
  r.C_T = detail::assemble_residual_sum(r.initial_term, r.interior_term, r.sb_left_sq, r.sb_right_sq, r.C_2b, r.C_1b);
  r.rhs = r.prefactor * r.C_T;

  const JetBatch exact = problem.exact_jet(grids.interior.points, false);
  r.lhs = detail::weighted_sum(grids.interior, (exact.value - jet.value).colwise().squaredNorm());
  return r;
}

// ---------------------------------------------------------------------------
// B1: quadrature form of T2

struct AlphaConfig {
  double alpha_tb = 2.0;
  double alpha_int = 2.0;
  double alpha_sb = 2.0;
  double cquad_tb = 0.0;
  double cquad_int = 0.0;
  double cquad_sb_left = 0.0;
  double cquad_sb_right = 0.0;
};

struct TheoremB1Report {
  double delta = 0.0;
  int n_tb = 0, n_int = 0, n_sb = 0;
  // (E_T^family)^2 = sum_n w_n R^2
  double et_tb_sq = 0.0;
  double et_int_sq = 0.0;
  double et_sb_left_sq = 0.0;
  double et_sb_right_sq = 0.0;
  double C = 0.0;
  double C_1b = 0.0;
  double C_2b = 0.0;
  double prefactor = 0.0;
  AlphaConfig alpha;
  double correction_tb = 0.0;
  double correction_int = 0.0;
  double correction_sb_sq = 0.0;    // 2 C_2b (Cq_-1 + Cq_1) / N_sb^alpha_sb
  double correction_sb_root = 0.0;  // 2 C_1b (Cq_-1 + Cq_1) / N_sb^(alpha_sb/2)
  double residual_sum = 0.0;
  double rhs = 0.0;
  double lhs = 0.0;  // E_G^2 on the interior quadrature nodes

  double corrections() const { return correction_tb + correction_int + correction_sb_sq + correction_sb_root; }
};

template <Surrogate S>
TheoremB1Report theoremB1_bound(const Burgers1D& problem, const S& surrogate, const CollocationSet& collocation,
                                const AlphaConfig& alpha = {}, int sup_resolution = 512) {
  if (!collocation.has_quadrature_weights())
    throw std::invalid_argument("b1 bound: collocation scheme '" + to_string(collocation.scheme) +
                                "' has no quadrature weights; use --scheme gauss-legendre");
  if (collocation.boundary.size() != 2) throw std::invalid_argument("b1 bound: expected two boundary families");
  const auto k = detail::theorem2_constants(problem);
  TheoremB1Report r;
  r.delta = problem.delta();
  r.alpha = alpha;
  r.n_tb = collocation.n_tb();
  r.n_int = collocation.n_int();
  r.n_sb = collocation.n_sb();
  r.C = k.C;
  r.C_1b = k.C_1b;
  r.prefactor = k.prefactor;
  r.C_2b = detail::right_boundary_sup(problem, surrogate, sup_resolution).value + 1.5 / (1.0 - problem.delta());

  const Matrix r_tb = detail::initial_residual_at(problem, surrogate, collocation.initial);
  r.et_tb_sq = detail::weighted_sum(collocation.initial, r_tb.row(0).array().square().matrix());
  const JetBatch jet = surrogate.evaluate(collocation.interior.points, true);
  r.et_int_sq = detail::weighted_sum(collocation.interior, interior_residual(jet).colwise().squaredNorm());
  r.et_sb_left_sq = detail::weighted_sum(
      collocation.boundary[0],
      detail::boundary_residual_at(problem, surrogate, 0, collocation.boundary[0]).array().square().matrix());
  r.et_sb_right_sq = detail::weighted_sum(
      collocation.boundary[1],
      detail::boundary_residual_at(problem, surrogate, 1, collocation.boundary[1]).array().square().matrix());

  const double cq_sb = alpha.cquad_sb_left + alpha.cquad_sb_right;
  r.correction_tb = alpha.cquad_tb / std::pow(r.n_tb, alpha.alpha_tb);
  r.correction_int = alpha.cquad_int / std::pow(r.n_int, alpha.alpha_int);
  r.correction_sb_sq = 2.0 * r.C_2b * cq_sb / std::pow(r.n_sb, alpha.alpha_sb);
  r.correction_sb_root = 2.0 * r.C_1b * cq_sb / std::pow(r.n_sb, alpha.alpha_sb / 2.0);

  r.residual_sum =
      detail::assemble_residual_sum(r.et_tb_sq, r.et_int_sq, r.et_sb_left_sq, r.et_sb_right_sq, r.C_2b, r.C_1b);
  r.rhs = r.prefactor * (r.residual_sum + r.corrections());

  const JetBatch exact = problem.exact_jet(collocation.interior.points, false);
  r.lhs = detail::weighted_sum(collocation.interior, (exact.value - jet.value).colwise().squaredNorm());
  return r;
}

// ---------------------------------------------------------------------------
// Report serialization

/// Doubles at 17 significant digits; -inf as "-inf", NaN as "nan".
inline std::string format_value(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  return format_double(v);
}

struct ReportField {
  std::string name;
  std::string symbol;
  std::string value;
};

inline std::vector<ReportField> report_fields(const Theorem1Report& r) {
  auto f = [](double v) { return format_value(v); };
  return {{"delta", "delta", f(r.delta)},
          {"d", "d", std::to_string(r.d)},
          {"sup_grad_surrogate", "|grad u_theta|_inf", f(r.sup_grad_surrogate)},
          {"sup_grad_exact", "|grad u|_inf", f(r.sup_grad_exact)},
          {"c1_surrogate", "d^2 |grad u_theta|_inf", f(r.c1_surrogate)},
          {"c1_exact", "d^2 |grad u|_inf", f(r.c1_exact)},
          {"C1", "C1", f(r.C1)},
          {"initial_residual", "int_D |R_t|^2", f(r.initial_residual)},
          {"pde_residual", "int_Omega |R_pde|^2", f(r.pde_residual)},
          {"norm_sq_surrogate", "int_Omega |u_theta|^2", f(r.norm_sq_surrogate)},
          {"norm_sq_exact", "int_Omega |u|^2 (closed form)", f(r.norm_sq_exact)},
          {"norm_sq_exact_numeric", "int_Omega |u|^2 (quadrature)", f(r.norm_sq_exact_numeric)},
          {"surrogate_term", "d^2 |grad u_theta|_inf int |u_theta|^2", f(r.surrogate_term)},
          {"exact_term", "d^2 |grad u|_inf int |u|^2", f(r.exact_term)},
          {"C2", "C2", f(r.C2)},
          {"rhs", "log(C1 C2 / 4) + C1 / sqrt(2)", f(r.rhs)},
          {"risk", "int_Omega |u - u_theta|^2", f(r.risk)},
          {"lhs", "log int_Omega |u - u_theta|^2", f(r.lhs)},
          {"grid", "grid", r.grid}};
}

inline std::vector<ReportField> report_fields(const Theorem2Report& r) {
  auto f = [](double v) { return format_value(v); };
  return {{"delta", "delta", f(r.delta)},
          {"C_ux", "C_ux", f(r.C_ux)},
          {"C", "C", f(r.C)},
          {"C_1b", "C_1b", f(r.C_1b)},
          {"sup_boundary_surrogate", "sup_t |u_theta(1,t)|", f(r.sup_boundary_surrogate)},
          {"C_2b", "C_2b", f(r.C_2b)},
          {"unsquared_initial", "initial term unsquared", r.unsquared_initial ? "1" : "0"},
          {"initial_term", r.unsquared_initial ? "int R_tb" : "int R_tb^2", f(r.initial_term)},
          {"sb_left_sq", "int R_sb,-1^2", f(r.sb_left_sq)},
          {"sb_right_sq", "int R_sb,1^2", f(r.sb_right_sq)},
          {"sb_left_root", "(int R_sb,-1^2)^(1/2)", f(r.sb_left_root)},
          {"sb_right_root", "(int R_sb,1^2)^(1/2)", f(r.sb_right_root)},
          {"interior_term", "int int R_int^2", f(r.interior_term)},
          {"C_T", "C_T", f(r.C_T)},
          {"prefactor", "1 + C e^C", f(r.prefactor)},
          {"rhs", "(1 + C e^C) C_T", f(r.rhs)},
          {"lhs", "E_G^2", f(r.lhs)},
          {"grid", "grid", r.grid}};
}

inline std::vector<ReportField> report_fields(const TheoremB1Report& r) {
  auto f = [](double v) { return format_value(v); };
  return {{"delta", "delta", f(r.delta)},
          {"n_tb", "N_tb", std::to_string(r.n_tb)},
          {"n_int", "N_int", std::to_string(r.n_int)},
          {"n_sb", "N_sb", std::to_string(r.n_sb)},
          {"et_tb_sq", "(E_T^tb)^2", f(r.et_tb_sq)},
          {"et_int_sq", "(E_T^int)^2", f(r.et_int_sq)},
          {"et_sb_left_sq", "(E_T^sb,-1)^2", f(r.et_sb_left_sq)},
          {"et_sb_right_sq", "(E_T^sb,1)^2", f(r.et_sb_right_sq)},
          {"C", "C", f(r.C)},
          {"C_1b", "C_1b", f(r.C_1b)},
          {"C_2b", "C_2b", f(r.C_2b)},
          {"alpha_tb", "alpha_tb", f(r.alpha.alpha_tb)},
          {"alpha_int", "alpha_int", f(r.alpha.alpha_int)},
          {"alpha_sb", "alpha_sb", f(r.alpha.alpha_sb)},
          {"cquad_tb", "C_quad^tb", f(r.alpha.cquad_tb)},
          {"cquad_int", "C_quad^int", f(r.alpha.cquad_int)},
          {"cquad_sb_left", "C_quad^sb,-1", f(r.alpha.cquad_sb_left)},
          {"cquad_sb_right", "C_quad^sb,1", f(r.alpha.cquad_sb_right)},
          {"correction_tb", "C_quad^tb / N_tb^alpha_tb", f(r.correction_tb)},
          {"correction_int", "C_quad^int / N_int^alpha_int", f(r.correction_int)},
          {"correction_sb_sq", "2 C_2b (C_quad^sb) / N_sb^alpha_sb", f(r.correction_sb_sq)},
          {"correction_sb_root", "2 C_1b (C_quad^sb) / N_sb^(alpha_sb/2)", f(r.correction_sb_root)},
          {"residual_sum", "weighted residual sum", f(r.residual_sum)},
          {"prefactor", "1 + C e^C", f(r.prefactor)},
          {"rhs", "rhs", f(r.rhs)},
          {"lhs", "E_G^2", f(r.lhs)}};
}

template <class Report>
void write_report_csv(const Report& r, std::ostream& os) {
  const auto fields = report_fields(r);
  for (std::size_t i = 0; i < fields.size(); ++i) os << (i ? "," : "") << fields[i].name;
  os << '\n';
  for (std::size_t i = 0; i < fields.size(); ++i) os << (i ? "," : "") << fields[i].value;
  os << '\n';
}

template <class Report>
void write_report_text(const Report& r, const std::string& title, std::ostream& os) {
  const auto fields = report_fields(r);
  std::size_t width = 0;
  for (const auto& f : fields) width = std::max(width, f.symbol.size());
  os << title << '\n';
  for (const auto& f : fields) os << "  " << f.symbol << std::string(width - f.symbol.size() + 2, ' ') << f.value << '\n';
}

// ---------------------------------------------------------------------------
// Statistics

inline double mean(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean: empty input");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
inline double stddev(const std::vector<double>& xs) {
  const double m = mean(xs);
  if (xs.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

inline double median(std::vector<double> xs) {
  if (xs.empty()) throw std::invalid_argument("median: empty input");
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

/// Coefficient of variation std / mean.
inline double coefficient_of_variation(const std::vector<double>& xs) {
  const double m = mean(xs);
  if (m == 0.0) throw std::invalid_argument("coefficient_of_variation: zero mean");
  return stddev(xs) / m;
}

inline double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("pearson: length mismatch");
  if (xs.size() < 2) throw std::invalid_argument("pearson: need at least two points");
  const double mx = mean(xs), my = mean(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Ranks starting at 1, ties receiving their average rank.
inline std::vector<double> average_ranks(const std::vector<double>& xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

/// Spearman rank correlation (Pearson of average ranks).
inline double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  return pearson(average_ranks(xs), average_ranks(ys));
}

}  // namespace blowup_pinn
