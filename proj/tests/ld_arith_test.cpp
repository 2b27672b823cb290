#include "lserc/ld_arith.hpp"

#include <gtest/gtest.h>

#include "oracle_helpers.hpp"

namespace lserc {
namespace {

using testing::fsign_bruteforce;
using testing::slmax_bruteforce;
using testing::ternary_sequences;

Eigen::RowVectorXd row(std::initializer_list<double> vals) {
  Eigen::RowVectorXd r(static_cast<Eigen::Index>(vals.size()));
  Eigen::Index i = 0;
  for (double v : vals) r[i++] = v;
  return r;
}

LDScalar scalar(double v, std::initializer_list<double> deriv) { return {v, row(deriv)}; }

TEST(Fsign, Examples) {
  const std::vector<double> a{0.0, 2.0, -2.0};
  EXPECT_EQ(fsign(a), 1);
  const std::vector<double> b{0.0, 0.0, 0.0};
  EXPECT_EQ(fsign(b), 0);
  const std::vector<double> c{-3.0, 5.0};
  EXPECT_EQ(fsign(c), -1);
}

TEST(Fsign, DeadZone) {
  const std::vector<double> v{1e-13, -2.0};
  EXPECT_EQ(fsign(v), -1);  // first entry sits inside the default dead zone
  EXPECT_EQ(fsign(v, 1e-14), 1);
}

TEST(Fsign, RejectsNonFinite) {
  const std::vector<double> v{0.0, std::numeric_limits<double>::quiet_NaN()};
  EXPECT_THROW(fsign(v), std::invalid_argument);
  const std::vector<double> empty;
  EXPECT_THROW(fsign(empty), std::invalid_argument);
}

TEST(Fsign, MatchesLinearScanExhaustively) {
  for (int len = 1; len <= 5; ++len) {
    for (const auto& seq : ternary_sequences(len)) {
      EXPECT_EQ(fsign(seq), fsign_bruteforce(seq));
    }
  }
}

TEST(Slmax, Examples) {
  EXPECT_EQ(slmax(row({0, 0, 0, 0, 0}), row({0.4, 0.1, 0.2, 0.3, 0.5})),
            row({0.1, 0.2, 0.3, 0.5}));
  EXPECT_EQ(slmax(row({1, 7, 7}), row({1, 7, 7})), row({7, 7}));
  EXPECT_EQ(slmax(row({0, 0, 2}), row({0, 0, -1})), row({0, 2}));
}

TEST(Slmax, RejectsBadRows) {
  EXPECT_THROW(slmax(row({1, 2}), row({1, 2, 3})), std::invalid_argument);
  EXPECT_THROW(slmax(row({1}), row({2})), std::invalid_argument);
}

TEST(Slmax, MatchesBruteForceComparatorExhaustively) {
  for (int k = 1; k <= 4; ++k) {
    const auto rows = ternary_sequences(1 + k);
    for (const auto& ra : rows) {
      for (const auto& rb : rows) {
        Eigen::RowVectorXd a = Eigen::Map<const Eigen::RowVectorXd>(ra.data(), 1 + k);
        Eigen::RowVectorXd b = Eigen::Map<const Eigen::RowVectorXd>(rb.data(), 1 + k);
        ASSERT_EQ(slmax(a, b), slmax_bruteforce(a, b))
            << "k=" << k << " a=" << a << " b=" << b;
      }
    }
  }
}

TEST(Lshift, Examples) {
  Eigen::MatrixXd m(1, 3);
  m << 0, 0, 1;
  Eigen::MatrixXd expect(1, 2);
  expect << 0, 1;
  EXPECT_EQ(lshift(m), expect);

  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(3, 3);
  EXPECT_EQ(lshift(id), id.rightCols(2));

  Eigen::MatrixXd ab(2, 2);
  ab << 1.5, -2.0, 3.25, 4.0;
  Eigen::MatrixXd shifted = lshift(ab);
  ASSERT_EQ(shifted.cols(), 1);
  EXPECT_EQ(shifted(0, 0), -2.0);
  EXPECT_EQ(shifted(1, 0), 4.0);

  EXPECT_THROW(lshift(Eigen::MatrixXd::Ones(2, 1)), std::invalid_argument);
}

TEST(LdAbs, Examples) {
  const LDScalar pos = ld_abs(scalar(1, {5, 2}));
  EXPECT_EQ(pos.value, 1.0);
  EXPECT_EQ(pos.deriv, row({5, 2}));

  // value zero, first derivative entry zero: the next entry decides
  const LDScalar kink = ld_abs(scalar(0, {0, 3, -1}));
  EXPECT_EQ(kink.value, 0.0);
  EXPECT_EQ(kink.deriv, row({0, 3, -1}));

  const LDScalar neg = ld_abs(scalar(-2, {1, 1}));
  EXPECT_EQ(neg.value, 2.0);
  EXPECT_EQ(neg.deriv, row({-1, -1}));
}

TEST(LdMax, Examples) {
  const LDScalar zero4 = scalar(0, {0, 0, 0, 0});
  const LDScalar other = scalar(0.6, {0.1, 0.2, 0.3, 0.5});
  const LDScalar m = ld_max(zero4, other);
  EXPECT_EQ(m.value, 0.6);
  EXPECT_EQ(m.deriv, other.deriv);

  const LDScalar tie = ld_max(scalar(3, {1}), scalar(3, {1}));
  EXPECT_EQ(tie.value, 3.0);
  EXPECT_EQ(tie.deriv, row({1}));

  const LDScalar lex = ld_max(scalar(0, {0, 2}), scalar(0, {0, -1}));
  EXPECT_EQ(lex.value, 0.0);
  EXPECT_EQ(lex.deriv, row({0, 2}));

  EXPECT_THROW(ld_max(scalar(0, {1}), scalar(0, {1, 2})), std::invalid_argument);
}

TEST(LdMinMid, Examples) {
  const LDScalar mn = ld_min(scalar(2, {1}), scalar(5, {9}));
  EXPECT_EQ(mn.value, 2.0);
  EXPECT_EQ(mn.deriv, row({1}));

  const LDScalar mid = ld_mid(scalar(1, {7, 7}), scalar(2, {-3, 4}), scalar(3, {0, 0}));
  EXPECT_EQ(mid.value, 2.0);
  EXPECT_EQ(mid.deriv, row({-3, 4}));

  // lexicographic tie broken through the -max(-x,-y) identity
  const LDScalar kink = ld_min(scalar(0, {1, 0}), scalar(0, {0, 1}));
  EXPECT_EQ(kink.value, 0.0);
  EXPECT_EQ(kink.deriv, row({0, 1}));
}

TEST(LdArith, ProductRule) {
  const LDScalar p = scalar(2, {1, 0}) * scalar(3, {0, 1});
  EXPECT_EQ(p.value, 6.0);
  EXPECT_EQ(p.deriv, row({3, 2}));
}

TEST(LdArith, AdditiveIdentity) {
  const LDScalar a = scalar(-1.25, {0.5, -2});
  const LDScalar s = a + ld_constant(0.0, 2);
  EXPECT_EQ(s.value, a.value);
  EXPECT_EQ(s.deriv, a.deriv);
}

TEST(LdArith, QuotientRuleAgainstCentralDifferences) {
  const LDScalar q = scalar(1, {1}) / scalar(2, {0});
  EXPECT_EQ(q.value, 0.5);
  // smooth path t -> (1 + t) / 2 through the same point
  const double fd = testing::central_fd([](double t) { return (1.0 + t) / 2.0; }, 0.0);
  EXPECT_NEAR(q.deriv[0], fd, 1e-9);
  EXPECT_NEAR(q.deriv[0], 0.5, 1e-15);

  EXPECT_THROW(ld_div(scalar(1, {1}), scalar(0, {1})), std::domain_error);
  EXPECT_THROW(ld_div(scalar(1, {1}), scalar(5e-13, {1})), std::domain_error);
}

TEST(LdArith, VectorOpsAreComponentwise) {
  const LDVector x{row({2, -1}).transpose(), (Eigen::MatrixXd(2, 2) << 1, 0, 0, 1).finished()};
  const LDVector y{row({3, 4}).transpose(), (Eigen::MatrixXd(2, 2) << 0, 1, 1, 0).finished()};
  const LDVector sum = ld_arith(ArithOp::add, x, y);
  EXPECT_EQ(sum.value[0], 5.0);
  EXPECT_EQ(sum.value[1], 3.0);
  const LDVector prod = ld_arith(ArithOp::mul, x, y);
  EXPECT_EQ(prod.value[0], 6.0);
  EXPECT_EQ(prod.deriv.row(0), row({3, 2}));
  const LDVector negd = ld_arith(ArithOp::neg, x);
  EXPECT_EQ(negd.value[0], -2.0);
  EXPECT_THROW(ld_arith(ArithOp::neg, x, y), std::invalid_argument);
}

TEST(SmoothUnary, Examples) {
  const LDScalar e = ld_exp(scalar(0, {1, 2}));
  EXPECT_EQ(e.value, 1.0);
  EXPECT_EQ(e.deriv, row({1, 2}));

  const LDScalar s = ld_sin(scalar(0, {3}));
  EXPECT_EQ(s.value, 0.0);
  EXPECT_EQ(s.deriv, row({3}));

  const LDScalar l = ld_log(scalar(1, {2}));
  EXPECT_EQ(l.value, 0.0);
  EXPECT_EQ(l.deriv, row({2}));

  EXPECT_THROW(ld_log(scalar(0, {1})), std::domain_error);
  EXPECT_THROW(ld_sqrt(scalar(-4, {1})), std::domain_error);
  EXPECT_THROW(ld_pow_const(scalar(-1, {1}), 0.5), std::domain_error);

  const LDScalar cube = ld_pow_const(scalar(-2, {1}), 3.0);
  EXPECT_EQ(cube.value, -8.0);
  EXPECT_EQ(cube.deriv, row({12}));

  const LDScalar via_enum = ld_smooth_unary(UnaryKind::cos, scalar(0, {4}));
  EXPECT_EQ(via_enum.value, 1.0);
  EXPECT_EQ(via_enum.deriv, row({0}));
}

TEST(DirectionsMatrix, CanonicalFormAndRank) {
  Eigen::VectorXd d(2);
  d << 0.3, -0.7;
  const DirectionsMatrix m = DirectionsMatrix::canonical(d);
  EXPECT_TRUE(m.is_canonical());
  EXPECT_TRUE(m.full_row_rank());

  DirectionsMatrix deficient{Eigen::MatrixXd::Zero(2, 3)};
  deficient.entries << 1, 2, 3, 2, 4, 6;  // second row is twice the first
  EXPECT_FALSE(deficient.full_row_rank());

  DirectionsMatrix skinny{Eigen::MatrixXd::Ones(3, 2)};
  EXPECT_FALSE(skinny.full_row_rank());
}

TEST(ExtractLDerivative, CanonicalFastPath) {
  Eigen::VectorXd d(2);
  d << 0.3, -0.7;
  const DirectionsMatrix m = DirectionsMatrix::canonical(d);
  Eigen::MatrixXd ld(1, 3);
  ld << 0, 0, 1;
  Eigen::MatrixXd expect(1, 2);
  expect << 0, 1;
  EXPECT_EQ(extract_l_derivative(ld, m), expect);
}

TEST(ExtractLDerivative, LeastSquaresPathRecoversKnownMatrix) {
  Eigen::MatrixXd a(2, 2);
  a << 1, 2, 3, 4;
  const DirectionsMatrix identity{Eigen::MatrixXd::Identity(2, 2)};
  const Eigen::MatrixXd got = extract_l_derivative(a * identity.entries, identity);
  EXPECT_LT((got - a).norm(), 1e-12);
}

TEST(ExtractLDerivative, RiotSensitivityRow) {
  // LD-derivative row of the riot output along [-e1  I2] at time t; the
  // closed-form partials pin the answer to [1 - e^t, e^t].
  const double t = 0.7;
  Eigen::VectorXd d(2);
  d << -1, 0;
  const DirectionsMatrix m = DirectionsMatrix::canonical(d);
  Eigen::MatrixXd ld(1, 3);
  ld << std::exp(t) - 1.0, 1.0 - std::exp(t), std::exp(t);
  const Eigen::MatrixXd jl = extract_l_derivative(ld, m);
  EXPECT_NEAR(jl(0, 0), 1.0 - std::exp(t), 1e-12);
  EXPECT_NEAR(jl(0, 1), std::exp(t), 1e-12);
  // J_L must reproduce the LD-derivative through the directions matrix
  EXPECT_LT((jl * m.entries - ld).norm(), 1e-12);
}

TEST(ExtractLDerivative, RejectsRankDeficientDirections) {
  DirectionsMatrix bad{Eigen::MatrixXd::Zero(2, 3)};
  EXPECT_THROW(extract_l_derivative(Eigen::MatrixXd::Zero(1, 3), bad), std::invalid_argument);
}

TEST(Properties, PositiveHomogeneity) {
  // f'(x0; c M) = c f'(x0; M) for c > 0, across the elemental corpus.
  std::mt19937 rng(91);
  for (const auto& entry : testing::corpus()) {
    for (int rep = 0; rep < 20; ++rep) {
      const Eigen::VectorXd x0 = testing::random_in_box(rng, entry.n);
      Eigen::MatrixXd m(entry.n, 3);
      for (int c = 0; c < 3; ++c) m.col(c) = testing::random_in_box(rng, entry.n);
      for (double c : {0.5, 2.0, 10.0}) {
        const LDVector base = entry.fn(LDVector{x0, m});
        const LDVector scaled = entry.fn(LDVector{x0, c * m});
        ASSERT_LT((scaled.deriv - c * base.deriv).lpNorm<Eigen::Infinity>(),
                  1e-12 * (1.0 + base.deriv.lpNorm<Eigen::Infinity>()))
            << entry.name << " c=" << c;
      }
    }
  }
}

TEST(Properties, SmoothRecovery) {
  // Smooth-only compositions reproduce (analytic Jacobian) * M.
  std::mt19937 rng(17);
  // f(x) = [x0 cos(x1) + sqrt(5 + x0^2), log(1 + exp(x1))]
  const ExprFunction fn = ExprFunction::parse(
      {"(+ (* x0 (cos x1)) (sqrt (+ 5 (* x0 x0))))", "(log (+ 1 (exp x1)))"}, 2);
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::VectorXd x = testing::random_in_box(rng, 2);
    Eigen::MatrixXd jac(2, 2);
    jac(0, 0) = std::cos(x[1]) + x[0] / std::sqrt(5.0 + x[0] * x[0]);
    jac(0, 1) = -x[0] * std::sin(x[1]);
    jac(1, 0) = 0.0;
    jac(1, 1) = std::exp(x[1]) / (1.0 + std::exp(x[1]));
    Eigen::MatrixXd m(2, 4);
    for (int c = 0; c < 4; ++c) m.col(c) = testing::random_in_box(rng, 2);
    const LDVector got = fn(LDVector{x, m});
    ASSERT_LT((got.deriv - jac * m).lpNorm<Eigen::Infinity>(), 1e-10)
        << "x=" << x.transpose();
  }
}

TEST(Properties, ChainRuleConsistency) {
  // One-pass evaluation of g(f(x)) must equal feeding f's LD value into g,
  // bit for bit.
  const ExprFunction g = ExprFunction::parse({"(+ (abs (- x0 x1)) (exp (* 0.1 x1)))"}, 2);
  const Expr f0 = parse_expr("(* x0 x1)");
  const Expr f1 = parse_expr("(+ x0 (abs x1))");

  // substitute f into g's tree
  std::function<Expr(const Expr&)> subst = [&](const Expr& e) {
    if (e.kind == ExprKind::state) return e.index == 0 ? f0 : f1;
    Expr out = e;
    for (auto& c : out.children) c = subst(c);
    return out;
  };
  const ExprFunction composed({subst(g.components[0])}, 2);

  std::mt19937 rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::VectorXd x = testing::random_in_box(rng, 2);
    Eigen::MatrixXd m(2, 3);
    for (int c = 0; c < 3; ++c) m.col(c) = testing::random_in_box(rng, 2);
    const LDVector inner = ExprFunction({f0, f1}, 2)(LDVector{x, m});
    const LDVector two_pass = g(inner);
    const LDVector one_pass = composed(LDVector{x, m});
    ASSERT_EQ(two_pass.value[0], one_pass.value[0]);
    ASSERT_EQ(two_pass.deriv, one_pass.deriv);
  }
}

}  // namespace
}  // namespace lserc
