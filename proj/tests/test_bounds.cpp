#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "blowup_pinn/bounds.hpp"
#include "test_support.hpp"

namespace bp = blowup_pinn;

namespace {

// Composite Simpson rule on [a, b] with n (even) panels.
template <class F>
double simpson(F&& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

// Midpoint Riemann sum on [a, b] with n cells.
template <class F>
double riemann(F&& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += f(a + (i + 0.5) * h);
  return s * h;
}

bp::NetworkParams zero_net(int in, int out) { return bp::NetworkParams::zeros(bp::mlp_layer_sizes(in, out, 4, 2)); }

}  // namespace

// ---------------------------------------------------------------------------
// sup_norm_estimate

TEST(SupNorm, ConstantFunction) {
  const bp::Box box{{0.0, -1.0}, {1.0, 2.0}};
  auto est = bp::sup_norm_estimate([](const bp::Matrix& p) { return Eigen::RowVectorXd::Constant(p.cols(), -2.5); },
                                   box, 7);
  EXPECT_EQ(est.value, 2.5);
}

TEST(SupNorm, MonotoneFunctionAttainsMaxAtCorner) {
  const bp::Box box{{-0.5}, {0.5}};
  auto est = bp::sup_norm_estimate(
      [](const bp::Matrix& p) { return Eigen::RowVectorXd((1.0 - p.row(0).array()).inverse()); }, box, 101);
  EXPECT_DOUBLE_EQ(est.value, 2.0);
  EXPECT_EQ(est.argmax[0], 0.5);
}

TEST(SupNorm, ExactSpatialDerivativeMatchesClosedForm) {
  for (double delta : {0.1, 0.5, 0.9, 0.95}) {
    const bp::Burgers1D prob(delta);
    auto est = bp::sup_norm_estimate(
        [&](const bp::Matrix& p) { return Eigen::RowVectorXd(prob.exact_jet(p).d[0].row(0)); }, prob.space_time_box(),
        64);
    EXPECT_EQ(est.value, 1.0 / (1.0 - delta)) << delta;
    EXPECT_EQ(est.argmax[1], delta);
  }
}

TEST(SupNorm, CornersAreIncludedWithChunking) {
  const bp::Box box{{0.0, 0.0, 0.0}, {1.0, 2.0, 3.0}};
  auto est = bp::sup_norm_estimate(
      [](const bp::Matrix& p) { return Eigen::RowVectorXd(p.colwise().sum()); }, box, 5, /*chunk=*/7);
  EXPECT_EQ(est.value, 6.0);
  EXPECT_EQ(est.argmax, (bp::Vector(3) << 1.0, 2.0, 3.0).finished());
}

TEST(SupNorm, NonFiniteValueNamesThePoint) {
  const bp::Box box{{0.0}, {1.0}};
  try {
    bp::sup_norm_estimate([](const bp::Matrix& p) { return Eigen::RowVectorXd((1.0 - p.row(0).array()).inverse()); },
                          box, 3);
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("(1)"), std::string::npos) << e.what();
  }
  EXPECT_THROW(bp::sup_norm_estimate([](const bp::Matrix& p) { return Eigen::RowVectorXd::Zero(p.cols()); }, box, 1),
               std::invalid_argument);
}

TEST(SupNorm, TwoDimensionalExactGradientAgreesWithEndpointExpression) {
  for (double delta : {0.05, 0.2, 0.307, 0.5, 0.6}) {
    const bp::Burgers2D prob(delta);
    // The row sums depend on t only and are largest at an end of the window.
    auto est = bp::sup_norm_estimate(
        [&](const bp::Matrix& p) { return bp::spatial_gradient_norm(prob.exact_jet(p)); }, prob.space_time_box(), 41);
    auto row_sums = [](double t) {
      const double q = 1.0 - 2.0 * t * t;
      return std::max(std::abs((1.0 - 2.0 * t) / q) + std::abs(1.0 / q), std::abs(1.0 / q) + std::abs((1.0 + 2.0 * t) / q));
    };
    const double endpoint_max = std::max(row_sums(prob.t0()), row_sums(prob.t1()));
    EXPECT_NEAR(prob.exact_gradient_sup(), endpoint_max, 1e-14 * endpoint_max) << delta;
    EXPECT_NEAR(est.value, endpoint_max, 1e-12 * endpoint_max) << delta;
  }
}

// ---------------------------------------------------------------------------
// T1

TEST(LogRiskBound, ExactSurrogateAnnihilatesResiduals) {
  const bp::Burgers2D prob(0.3);
  const auto grids = bp::gauss_legendre_grids(prob, 12, 9);
  const auto r = bp::theorem1_bound(prob, bp::ExactSurrogate{prob}, grids);
  EXPECT_LE(r.initial_residual, 1e-12);
  EXPECT_LE(r.pde_residual, 1e-12);
  EXPECT_EQ(r.lhs, -std::numeric_limits<double>::infinity());
  EXPECT_TRUE(std::isfinite(r.rhs));
  EXPECT_TRUE(r.dominates());
  EXPECT_GE(r.C1, 1.0);
  EXPECT_NEAR(r.sup_grad_surrogate, r.sup_grad_exact, 1e-12 * r.sup_grad_exact);
  std::ostringstream os;
  bp::write_report_csv(r, os);
  EXPECT_NE(os.str().find(",-inf,"), std::string::npos);
}

TEST(LogRiskBound, ConstantsResumBitwise) {
  const bp::Burgers2D prob(0.2);
  const auto net = bp::testing::random_net(bp::mlp_layer_sizes(3, 2, 6, 3), 5);
  const auto r = bp::theorem1_bound(prob, bp::NetworkSurrogate(net), bp::gauss_legendre_grids(prob, 8, 9));
  EXPECT_EQ(r.C1, r.c1_surrogate + 1.0 + r.c1_exact);
  EXPECT_EQ(r.C1, 4.0 * r.sup_grad_surrogate + 1.0 + 4.0 * r.sup_grad_exact);
  EXPECT_EQ(r.C2, r.initial_residual + r.pde_residual + r.surrogate_term + r.exact_term);
  EXPECT_EQ(r.rhs, std::log(r.C1 * r.C2 / 4.0) + r.C1 / std::sqrt(2.0));
  EXPECT_GE(r.C2, 0.0);
  EXPECT_TRUE(r.dominates());
}

TEST(LogRiskBound, RequiresTheFixedWindow) {
  const bp::Burgers1D prob(0.5);
  EXPECT_THROW(bp::theorem1_bound(prob, bp::ExactSurrogate{prob}, bp::gauss_legendre_grids(prob, 8, 9)),
               std::invalid_argument);
}

TEST(LogRiskBound, ClosedFormNormMatchesQuadrature) {
  // Two-term antiderivative of the spatial integral of |u|^2 in t.
  auto antiderivative = [](double t) {
    const double q = 1.0 - 2.0 * t * t;
    return (11.0 * t - 7.0) / (12.0 * q) + (5.0 * t + 1.0) / (12.0 * q);
  };
  for (double delta : {0.1, 0.3, 0.5}) {
    const bp::Burgers2D prob(delta);
    const double closed_form = antiderivative(prob.t1()) - antiderivative(prob.t0());
    // Simpson in x1, x2 is exact for the quadratic spatial integrand.
    auto slice = [](double t) {
      const double q = 1.0 - 2.0 * t * t;
      return simpson(
          [&](double x1) {
            return simpson(
                [&](double x2) {
                  const double u1 = (x1 + x2 - 2.0 * x1 * t) / q, u2 = (x1 - x2 - 2.0 * x2 * t) / q;
                  return u1 * u1 + u2 * u2;
                },
                0.0, 1.0, 2);
          },
          0.0, 1.0, 2);
    };
    const double numeric = simpson(slice, prob.t0(), prob.t1(), 20000);
    EXPECT_NEAR(closed_form, numeric, 1e-6 * numeric) << delta;
    EXPECT_NEAR(prob.exact_norm_sq_integral(), numeric, 1e-6 * numeric) << delta;
    const auto r = bp::theorem1_bound(prob, bp::ExactSurrogate{prob}, bp::gauss_legendre_grids(prob, 16, 5));
    EXPECT_NEAR(r.norm_sq_exact_numeric, numeric, 1e-6 * numeric) << delta;
  }
}

// ---------------------------------------------------------------------------
// T2

TEST(RiskBound1D, ConstantsAtHalf) {
  const bp::Burgers1D prob(0.5);
  const auto net = zero_net(2, 1);
  const auto r = bp::theorem2_bound(prob, bp::NetworkSurrogate(net), bp::gauss_legendre_grids(prob, 16, 33));
  EXPECT_EQ(r.C_ux, 2.0);
  EXPECT_EQ(r.C, 5.0);
  EXPECT_EQ(r.C_1b, 4.0);
  EXPECT_EQ(r.sup_boundary_surrogate, 0.0);
  EXPECT_EQ(r.C_2b, 3.0);
  EXPECT_EQ(r.prefactor, 1.0 + 5.0 * std::exp(5.0));
}

TEST(RiskBound1D, ConstantsAreClosedFormsOfDelta) {
  for (double delta : {0.1, 0.3, 0.7, 0.9, 0.95}) {
    const bp::Burgers1D prob(delta);
    const auto r = bp::theorem2_bound(prob, bp::ExactSurrogate{prob}, bp::gauss_legendre_grids(prob, 8, 17));
    EXPECT_EQ(r.C_ux, 1.0 / (1.0 - delta));
    EXPECT_EQ(r.C, 1.0 + 2.0 / (1.0 - delta));
    EXPECT_EQ(r.C_1b, 1.0 / ((1.0 - delta) * (1.0 - delta)));
    // Exact boundary trace |1/(t-1)| peaks at t = delta.
    EXPECT_DOUBLE_EQ(r.C_2b, 2.5 / (1.0 - delta));
  }
}

TEST(RiskBound1D, ExactSurrogateGivesZeroEverywhere) {
  const bp::Burgers1D prob(0.7);
  const auto r = bp::theorem2_bound(prob, bp::ExactSurrogate{prob}, bp::default_grids(prob));
  EXPECT_LE(r.initial_term, 1e-12);
  EXPECT_LE(r.sb_left_sq, 1e-12);
  EXPECT_LE(r.sb_right_sq, 1e-12);
  EXPECT_LE(r.interior_term, 1e-12);
  EXPECT_LE(r.C_T, 1e-12);
  EXPECT_LE(r.lhs, 1e-12);
  EXPECT_LE(r.rhs, 1e-12 * r.prefactor);
}

TEST(RiskBound1D, ZeroSurrogateMatchesBruteForceRiemannSums) {
  const double delta = 0.5;
  const bp::Burgers1D prob(delta);
  const auto net = zero_net(2, 1);
  const auto r = bp::theorem2_bound(prob, bp::NetworkSurrogate(net), bp::default_grids(prob));
  const double t0 = -1.0 + delta, t1 = delta;
  const int n = 2000;

  const double tb = riemann([&](double x) { return std::pow(x / (-2.0 + delta), 2); }, -1.0, 1.0, n);
  const double left = riemann([](double t) { return std::pow(1.0 / (1.0 - t), 2); }, t0, t1, n);
  const double right = riemann([](double t) { return std::pow(1.0 / (t - 1.0), 2); }, t0, t1, n);
  double risk = 0.0;
  const double hx = 2.0 / n, ht = (t1 - t0) / n;
  for (int i = 0; i < n; ++i) {
    const double x = -1.0 + (i + 0.5) * hx;
    for (int j = 0; j < n; ++j) {
      const double t = t0 + (j + 0.5) * ht;
      risk += std::pow(x / (t - 1.0), 2);
    }
  }
  risk *= hx * ht;

  EXPECT_NEAR(r.initial_term, tb, 1e-4 * tb);
  EXPECT_NEAR(r.sb_left_sq, left, 1e-4 * left);
  EXPECT_NEAR(r.sb_right_sq, right, 1e-4 * right);
  EXPECT_EQ(r.interior_term, 0.0);
  EXPECT_NEAR(r.lhs, risk, 1e-4 * risk);
  EXPECT_NEAR(r.lhs, 8.0 / 9.0, 1e-12);
  EXPECT_TRUE(r.dominates());
}

TEST(RiskBound1D, UnsquaredInitialVariant) {
  const bp::Burgers1D prob(0.5);
  const auto net = zero_net(2, 1);
  bp::Theorem2Options opt;
  opt.unsquared_initial = true;
  const auto r = bp::theorem2_bound(prob, bp::NetworkSurrogate(net), bp::gauss_legendre_grids(prob, 16, 9), opt);
  // R_tb = x/(2 - delta) is odd in x.
  EXPECT_NEAR(r.initial_term, 0.0, 1e-14);
  EXPECT_TRUE(r.unsquared_initial);
}

TEST(RiskBound1D, RandomNetworksAreDominated) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const bp::Burgers1D prob(0.1 + 0.2 * static_cast<double>(seed));
    const auto net = bp::testing::random_net(bp::mlp_layer_sizes(2, 1, 8, 3), seed);
    const auto r = bp::theorem2_bound(prob, bp::NetworkSurrogate(net), bp::gauss_legendre_grids(prob, 32, 128));
    EXPECT_TRUE(r.dominates()) << seed << " lhs " << r.lhs << " rhs " << r.rhs;
    EXPECT_GE(r.rhs, r.C_T);
  }
}

TEST(RiskBound1D, GridRefinementIsStableForSmoothSurrogates) {
  const bp::Burgers1D prob(0.9);
  const auto net = bp::testing::random_net(bp::mlp_layer_sizes(2, 1, 10, 4), 3);
  const bp::NetworkSurrogate s(net);
  const auto a = bp::theorem2_bound(prob, s, bp::gauss_legendre_grids(prob, 32, 512));
  const auto b = bp::theorem2_bound(prob, s, bp::gauss_legendre_grids(prob, 64, 1024));
  for (auto [x, y] : {std::pair{a.initial_term, b.initial_term}, {a.sb_left_sq, b.sb_left_sq},
                      {a.sb_right_sq, b.sb_right_sq}, {a.interior_term, b.interior_term}, {a.lhs, b.lhs}}) {
    EXPECT_LT(std::abs(x - y), 0.01 * std::abs(y));
  }
}

// ---------------------------------------------------------------------------
// B1

TEST(QuadratureBound, MatchesDiscreteTheorem2TermByTerm) {
  const bp::Burgers1D prob(0.5);
  const auto set = bp::sample_collocation(prob, {1024, 32, 32}, bp::Scheme::gauss_legendre, 0);
  const auto net = bp::testing::random_net(bp::mlp_layer_sizes(2, 1, 8, 3), 11);
  const bp::NetworkSurrogate s(net);
  const auto b1 = bp::theoremB1_bound(prob, s, set);
  const auto t2 = bp::theorem2_bound(prob, s, bp::grids_from_collocation(prob, set, 512));
  auto rel = [](double a, double b) { return bp::testing::relative_error(a, b); };
  EXPECT_LE(rel(b1.et_tb_sq, t2.initial_term), 1e-12);
  EXPECT_LE(rel(b1.et_int_sq, t2.interior_term), 1e-12);
  EXPECT_LE(rel(b1.et_sb_left_sq, t2.sb_left_sq), 1e-12);
  EXPECT_LE(rel(b1.et_sb_right_sq, t2.sb_right_sq), 1e-12);
  EXPECT_LE(rel(b1.C_2b, t2.C_2b), 1e-12);
  EXPECT_LE(rel(b1.residual_sum, t2.C_T), 1e-12);
  EXPECT_LE(rel(b1.rhs, t2.rhs), 1e-12);
  EXPECT_EQ(b1.corrections(), 0.0);
}

TEST(QuadratureBound, ExactSurrogateLeavesOnlyCorrections) {
  const bp::Burgers1D prob(0.3);
  const auto set = bp::sample_collocation(prob, {256, 16, 16}, bp::Scheme::gauss_legendre, 0);
  bp::AlphaConfig alpha;
  alpha.cquad_tb = 1.0;
  alpha.cquad_int = 2.0;
  alpha.cquad_sb_left = 0.5;
  alpha.cquad_sb_right = 0.25;
  const auto r = bp::theoremB1_bound(prob, bp::ExactSurrogate{prob}, set, alpha);
  EXPECT_LE(r.et_tb_sq, 1e-24);
  EXPECT_LE(r.et_int_sq, 1e-24);
  EXPECT_LE(r.et_sb_left_sq + r.et_sb_right_sq, 1e-24);
  EXPECT_NEAR(r.rhs, r.prefactor * r.corrections(), 1e-12 * r.rhs);
  EXPECT_DOUBLE_EQ(r.correction_tb, 1.0 / (16.0 * 16.0));
  EXPECT_DOUBLE_EQ(r.correction_int, 2.0 / (256.0 * 256.0));
  EXPECT_DOUBLE_EQ(r.correction_sb_sq, 2.0 * r.C_2b * 0.75 / (16.0 * 16.0));
  EXPECT_DOUBLE_EQ(r.correction_sb_root, 2.0 * r.C_1b * 0.75 / 16.0);
}

TEST(QuadratureBound, MoreBoundaryNodesShrinkTheCorrection) {
  const bp::Burgers1D prob(0.5);
  bp::AlphaConfig alpha;
  alpha.cquad_sb_left = 1.0;
  alpha.alpha_sb = 1.5;
  const auto net = zero_net(2, 1);
  const auto a = bp::theoremB1_bound(prob, bp::NetworkSurrogate(net),
                                     bp::sample_collocation(prob, {64, 8, 8}, bp::Scheme::gauss_legendre, 0), alpha);
  const auto b = bp::theoremB1_bound(prob, bp::NetworkSurrogate(net),
                                     bp::sample_collocation(prob, {64, 8, 16}, bp::Scheme::gauss_legendre, 0), alpha);
  EXPECT_LT(b.correction_sb_sq, a.correction_sb_sq);
  EXPECT_LT(b.correction_sb_root, a.correction_sb_root);
}

TEST(QuadratureBound, RequiresQuadratureWeights) {
  const bp::Burgers1D prob(0.5);
  const auto net = zero_net(2, 1);
  for (auto scheme : {bp::Scheme::random, bp::Scheme::grid}) {
    const auto set = bp::sample_collocation(prob, {64, 8, 8}, scheme, 0);
    EXPECT_THROW(bp::theoremB1_bound(prob, bp::NetworkSurrogate(net), set), std::invalid_argument);
    EXPECT_THROW(bp::grids_from_collocation(prob, set, 16), std::invalid_argument);
  }
}

// ---------------------------------------------------------------------------
// Statistics

TEST(Statistics, PearsonExamples) {
  const std::vector<double> xs{1.0, 2.0, 3.0, 5.0};
  EXPECT_NEAR(bp::pearson(xs, xs), 1.0, 1e-15);
  EXPECT_NEAR(bp::pearson(xs, {-1.0, -2.0, -3.0, -5.0}), -1.0, 1e-15);
  // sxy = 5, sxx = 2, syy = 38/3.
  EXPECT_NEAR(bp::pearson({1, 2, 3}, {2, 4, 7}), 5.0 / std::sqrt(2.0 * 38.0 / 3.0), 1e-15);
  EXPECT_NEAR(bp::pearson({1, 2}, {3, 10}), 1.0, 1e-15);
}

TEST(Statistics, PearsonRejectsDegenerateInput) {
  EXPECT_THROW(bp::pearson({1.0, 1.0, 1.0}, {1.0, 2.0, 3.0}), std::invalid_argument);
  EXPECT_THROW(bp::pearson({1.0}, {2.0}), std::invalid_argument);
  EXPECT_THROW(bp::pearson({1.0, 2.0}, {2.0}), std::invalid_argument);
}

TEST(Statistics, SpearmanUsesAverageRanks) {
  EXPECT_EQ(bp::average_ranks({10.0, 30.0, 20.0, 20.0}), (std::vector<double>{1.0, 4.0, 2.5, 2.5}));
  EXPECT_NEAR(bp::spearman({1, 2, 3, 4}, {10, 100, 1000, 1e6}), 1.0, 1e-15);
  EXPECT_NEAR(bp::spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0, 1e-15);
}

TEST(Statistics, MeanStdMedianCv) {
  EXPECT_EQ(bp::stddev({4.0}), 0.0);
  EXPECT_NEAR(bp::stddev({1.0, 2.0, 3.0, 4.0}), std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_EQ(bp::median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(bp::median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_EQ(bp::coefficient_of_variation({2.0, 2.0, 2.0}), 0.0);
  EXPECT_THROW(bp::mean({}), std::invalid_argument);
}
