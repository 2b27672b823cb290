#ifndef LSERC_LD_ARITH_HPP
#define LSERC_LD_ARITH_HPP

#include <Eigen/Core>
#include <Eigen/SVD>

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Lexicographic directional (LD) derivative arithmetic.
//
// An LD value carries a point value together with a row (or matrix) of
// directional derivatives taken along the columns of a shared directions
// matrix M, ordered by decreasing importance.  Smooth elementals propagate
// the row with their exact Jacobian; the nonsmooth elementals (abs, max,
// min, mid) branch on the sign of the first non-dead entry, which is what
// makes the whole calculus sharp instead of set-valued.

namespace lserc {

/// Dead-zone for sign and branch decisions.  The rules are stated over
/// exact reals; floating point needs an absolute tolerance below which an
/// entry counts as zero.  Overridable per call.
inline constexpr double kEpsZero = 1e-12;

/// Relative singular-value cutoff when deciding full row rank of a
/// directions matrix.
inline constexpr double kDirectionsRankTol = 1e-10;

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

/// Sign of the first entry of `seq` with magnitude above `eps_zero`;
/// 0 if every entry is inside the dead zone.
inline int fsign(std::span<const double> seq, double eps_zero = kEpsZero) {
  require(!seq.empty(), "fsign: empty sequence");
  for (double v : seq) {
    if (!std::isfinite(v)) throw std::invalid_argument("fsign: non-finite entry");
    if (std::abs(v) > eps_zero) return v > 0.0 ? 1 : -1;
  }
  return 0;
}

inline int fsign(double value, const Eigen::RowVectorXd& deriv,
                 double eps_zero = kEpsZero) {
  std::vector<double> seq(static_cast<size_t>(deriv.size()) + 1);
  seq[0] = value;
  for (Eigen::Index i = 0; i < deriv.size(); ++i) seq[static_cast<size_t>(i) + 1] = deriv[i];
  return fsign(std::span<const double>(seq), eps_zero);
}

/// Lexicographic comparison of two equal-length rows with a per-entry dead
/// zone.  Returns 0 if `a` is lexicographically >= `b` (ties select `a`),
/// 1 otherwise.
inline int lex_choice(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b,
                      double eps_zero = kEpsZero) {
  require(a.size() == b.size(), "lex_choice: length mismatch");
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double da = a[i], db = b[i];
    if (!std::isfinite(da) || !std::isfinite(db))
      throw std::invalid_argument("lex_choice: non-finite entry");
    if (std::abs(da - db) > eps_zero) return da > db ? 0 : 1;
  }
  return 0;
}

/// Shifted lexicographic maximum: rows are [value, deriv...]; returns the
/// last k entries of the lexicographically larger row, ties toward `a`.
inline Eigen::RowVectorXd slmax(const Eigen::RowVectorXd& a,
                                const Eigen::RowVectorXd& b,
                                double eps_zero = kEpsZero) {
  require(a.size() == b.size(), "slmax: row length mismatch");
  require(a.size() >= 2, "slmax: rows need a value entry plus at least one derivative entry");
  const Eigen::RowVectorXd& winner = lex_choice(a, b, eps_zero) == 0 ? a : b;
  return winner.tail(winner.size() - 1);
}

/// Left shift: removes the first column.
inline Eigen::MatrixXd lshift(const Eigen::MatrixXd& m) {
  require(m.cols() >= 2, "lshift: need at least two columns");
  return m.rightCols(m.cols() - 1);
}

/// Probing directions, columns ordered by decreasing importance.
struct DirectionsMatrix {
  Eigen::MatrixXd entries;  // n x k

  Eigen::Index n() const { return entries.rows(); }
  Eigen::Index k() const { return entries.cols(); }

  /// Canonical choice [d  I_n] with primary probing direction d.
  static DirectionsMatrix canonical(const Eigen::VectorXd& d) {
    require(d.size() >= 1, "DirectionsMatrix: empty direction");
    Eigen::MatrixXd m(d.size(), d.size() + 1);
    m.col(0) = d;
    m.rightCols(d.size()) = Eigen::MatrixXd::Identity(d.size(), d.size());
    return DirectionsMatrix{std::move(m)};
  }

  /// True when the trailing n columns are exactly the identity, i.e. the
  /// matrix was built as [d  I_n].
  bool is_canonical() const {
    if (k() != n() + 1) return false;
    return entries.rightCols(n()) == Eigen::MatrixXd::Identity(n(), n());
  }

  bool full_row_rank(double tol = kDirectionsRankTol) const {
    if (k() < n()) return false;
    if (is_canonical()) return true;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(entries);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv[0] <= 0.0) return false;
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv[i] > tol * sv[0]) ++rank;
    return rank == n();
  }
};

/// Scalar LD value: point value plus one derivative row of width k.
struct LDScalar {
  double value = 0.0;
  Eigen::RowVectorXd deriv;

  Eigen::Index k() const { return deriv.size(); }
};

inline LDScalar ld_constant(double c, Eigen::Index k) {
  return {c, Eigen::RowVectorXd::Zero(k)};
}

/// Vector LD value: m point values plus an m x k matrix of derivative rows.
struct LDVector {
  Eigen::VectorXd value;  // m
  Eigen::MatrixXd deriv;  // m x k

  Eigen::Index size() const { return value.size(); }
  Eigen::Index k() const { return deriv.cols(); }

  LDScalar component(Eigen::Index i) const {
    return {value[i], deriv.row(i)};
  }

  static LDVector zero(Eigen::Index m, Eigen::Index k) {
    return {Eigen::VectorXd::Zero(m), Eigen::MatrixXd::Zero(m, k)};
  }

  static LDVector from_components(const std::vector<LDScalar>& comps) {
    require(!comps.empty(), "LDVector: no components");
    LDVector out;
    out.value.resize(static_cast<Eigen::Index>(comps.size()));
    out.deriv.resize(static_cast<Eigen::Index>(comps.size()), comps[0].k());
    for (size_t i = 0; i < comps.size(); ++i) {
      require(comps[i].k() == comps[0].k(), "LDVector: mixed derivative widths");
      out.value[static_cast<Eigen::Index>(i)] = comps[i].value;
      out.deriv.row(static_cast<Eigen::Index>(i)) = comps[i].deriv;
    }
    return out;
  }
};

namespace detail {
inline void check_shared_k(const LDScalar& x, const LDScalar& y, const char* op) {
  require(x.k() == y.k(), std::string(op) + ": operands carry different numbers of probing directions");
}
}  // namespace detail

// ---- smooth arithmetic on scalars ----

inline LDScalar operator+(const LDScalar& x, const LDScalar& y) {
  detail::check_shared_k(x, y, "add");
  return {x.value + y.value, x.deriv + y.deriv};
}

inline LDScalar operator-(const LDScalar& x, const LDScalar& y) {
  detail::check_shared_k(x, y, "sub");
  return {x.value - y.value, x.deriv - y.deriv};
}

inline LDScalar operator-(const LDScalar& x) { return {-x.value, -x.deriv}; }

inline LDScalar operator*(const LDScalar& x, const LDScalar& y) {
  detail::check_shared_k(x, y, "mul");
  return {x.value * y.value, x.value * y.deriv + y.value * x.deriv};
}

inline LDScalar ld_div(const LDScalar& x, const LDScalar& y,
                       double eps_zero = kEpsZero) {
  detail::check_shared_k(x, y, "div");
  if (std::abs(y.value) <= eps_zero)
    throw std::domain_error("div: divisor inside the zero dead-zone");
  const double q = x.value / y.value;
  return {q, (x.deriv - q * y.deriv) / y.value};
}

inline LDScalar operator/(const LDScalar& x, const LDScalar& y) {
  return ld_div(x, y);
}

// ---- nonsmooth elementals ----

/// Records elementary branch decisions (fsign results and lexicographic
/// choices) in evaluation order; used by the kink-crossing diagnostic.
struct BranchRecorder {
  std::vector<int8_t> decisions;
  void note(int v) { decisions.push_back(static_cast<int8_t>(v)); }
};

inline LDScalar ld_abs(const LDScalar& x, double eps_zero = kEpsZero,
                       BranchRecorder* rec = nullptr) {
  const int s = fsign(x.value, x.deriv, eps_zero);
  if (rec) rec->note(s);
  return {std::abs(x.value), static_cast<double>(s) * x.deriv};
}

inline LDScalar ld_max(const LDScalar& x, const LDScalar& y,
                       double eps_zero = kEpsZero, BranchRecorder* rec = nullptr) {
  detail::check_shared_k(x, y, "max");
  Eigen::RowVectorXd a(x.k() + 1), b(y.k() + 1);
  a[0] = x.value;
  a.tail(x.k()) = x.deriv;
  b[0] = y.value;
  b.tail(y.k()) = y.deriv;
  const int c = lex_choice(a, b, eps_zero);
  if (rec) rec->note(c);
  return {std::max(x.value, y.value), c == 0 ? x.deriv : y.deriv};
}

inline LDScalar ld_min(const LDScalar& x, const LDScalar& y,
                       double eps_zero = kEpsZero, BranchRecorder* rec = nullptr) {
  LDScalar m = ld_max(-x, -y, eps_zero, rec);
  return {std::min(x.value, y.value), -m.deriv};
}

/// Median of three, via the max/min identity so there is exactly one
/// lexicographic comparison code path.
inline LDScalar ld_mid(const LDScalar& x, const LDScalar& y, const LDScalar& z,
                       double eps_zero = kEpsZero, BranchRecorder* rec = nullptr) {
  LDScalar lo = ld_min(x, y, eps_zero, rec);
  LDScalar hi = ld_max(x, y, eps_zero, rec);
  return ld_max(lo, ld_min(hi, z, eps_zero, rec), eps_zero, rec);
}

// ---- smooth unary elementals ----

enum class UnaryKind { exp, log, sin, cos, sqrt, pow_const };

inline LDScalar ld_exp(const LDScalar& x) {
  const double v = std::exp(x.value);
  return {v, v * x.deriv};
}

inline LDScalar ld_log(const LDScalar& x, double eps_zero = kEpsZero) {
  if (x.value <= eps_zero) throw std::domain_error("log: argument not positive");
  return {std::log(x.value), x.deriv / x.value};
}

inline LDScalar ld_sin(const LDScalar& x) {
  return {std::sin(x.value), std::cos(x.value) * x.deriv};
}

inline LDScalar ld_cos(const LDScalar& x) {
  return {std::cos(x.value), -std::sin(x.value) * x.deriv};
}

inline LDScalar ld_sqrt(const LDScalar& x, double eps_zero = kEpsZero) {
  if (x.value <= eps_zero) throw std::domain_error("sqrt: argument not positive");
  const double v = std::sqrt(x.value);
  return {v, x.deriv / (2.0 * v)};
}

inline LDScalar ld_pow_const(const LDScalar& x, double exponent,
                             double eps_zero = kEpsZero) {
  const double r = std::round(exponent);
  const bool integral = std::abs(exponent - r) <= 1e-12;
  if (!integral && x.value <= eps_zero)
    throw std::domain_error("pow: non-integer exponent needs a positive base");
  if (integral && exponent < 0.0 && std::abs(x.value) <= eps_zero)
    throw std::domain_error("pow: negative exponent needs a nonzero base");
  const double v = std::pow(x.value, exponent);
  const double slope = exponent == 0.0 ? 0.0 : exponent * std::pow(x.value, exponent - 1.0);
  return {v, slope * x.deriv};
}

inline LDScalar ld_smooth_unary(UnaryKind kind, const LDScalar& x,
                                double exponent = 0.0, double eps_zero = kEpsZero) {
  switch (kind) {
    case UnaryKind::exp: return ld_exp(x);
    case UnaryKind::log: return ld_log(x, eps_zero);
    case UnaryKind::sin: return ld_sin(x);
    case UnaryKind::cos: return ld_cos(x);
    case UnaryKind::sqrt: return ld_sqrt(x, eps_zero);
    case UnaryKind::pow_const: return ld_pow_const(x, exponent, eps_zero);
  }
  throw std::invalid_argument("ld_smooth_unary: unknown kind");
}

// ---- vector arithmetic ----

enum class ArithOp { add, sub, mul, div, neg };

inline LDVector ld_arith(ArithOp op, const LDVector& x, const LDVector& y,
                         double eps_zero = kEpsZero) {
  require(op != ArithOp::neg, "ld_arith: neg is unary");
  require(x.size() == y.size() && x.k() == y.k(),
          "ld_arith: operands are not conformable");
  LDVector out;
  out.value.resize(x.size());
  out.deriv.resize(x.size(), x.k());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    LDScalar r;
    switch (op) {
      case ArithOp::add: r = x.component(i) + y.component(i); break;
      case ArithOp::sub: r = x.component(i) - y.component(i); break;
      case ArithOp::mul: r = x.component(i) * y.component(i); break;
      case ArithOp::div: r = ld_div(x.component(i), y.component(i), eps_zero); break;
      case ArithOp::neg: break;
    }
    out.value[i] = r.value;
    out.deriv.row(i) = r.deriv;
  }
  return out;
}

inline LDVector ld_arith(ArithOp op, const LDVector& x) {
  require(op == ArithOp::neg, "ld_arith: binary op needs two operands");
  return {-x.value, -x.deriv};
}

// ---- L-derivative extraction ----

/// Solves J_L * M = ld for the L-derivative J_L.  For the canonical
/// directions matrix [d  I_n] the solution is exactly the left shift of the
/// LD-derivative (J_L * [d I] = [J_L d, J_L]); any other full-row-rank M
/// goes through SVD least squares with a residual check.
inline Eigen::MatrixXd extract_l_derivative(const Eigen::MatrixXd& ld,
                                            const DirectionsMatrix& m,
                                            double residual_tol = 1e-10) {
  require(ld.cols() == m.k(), "extract_l_derivative: width mismatch with directions matrix");
  if (!m.full_row_rank())
    throw std::invalid_argument("extract_l_derivative: directions matrix is rank deficient");
  if (m.is_canonical()) return lshift(ld);

  // J M = ld  <=>  M^T J^T = ld^T, solved column-block wise.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m.entries.transpose(),
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::MatrixXd jl = svd.solve(ld.transpose()).transpose();
  const double residual = (jl * m.entries - ld).norm();
  if (residual > residual_tol * (1.0 + ld.norm()))
    throw std::runtime_error("extract_l_derivative: least-squares residual " +
                             std::to_string(residual) + " exceeds tolerance");
  return jl;
}

}  // namespace lserc

#endif  // LSERC_LD_ARITH_HPP
