#ifndef LSERC_TAYLOR_HPP
#define LSERC_TAYLOR_HPP

#include <span>
#include <utility>
#include <vector>

#include "lserc/ld_arith.hpp"

// First-order approximation of L-smooth functions built from LD-derivatives
// along the canonical directions matrix [d  I_n].  For C1 functions this
// collapses to the classical linearization f(x0) + Jf(x0) d.

namespace lserc {

/// A function is LD-evaluable if it maps an LDVector seed to an LDVector;
/// the value field must be the plain evaluation of the value seed.
template <class F>
concept LDEvaluable = requires(F f, const LDVector& x) {
  { f(x) } -> std::convertible_to<LDVector>;
};

template <LDEvaluable F>
Eigen::VectorXd taylor_approx(F&& f, const Eigen::VectorXd& x0,
                              const Eigen::VectorXd& d) {
  require(x0.size() == d.size(), "taylor_approx: point/direction size mismatch");
  const DirectionsMatrix m = DirectionsMatrix::canonical(d);
  const LDVector fx = f(LDVector{x0, m.entries});
  const Eigen::MatrixXd jl = extract_l_derivative(fx.deriv, m);
  return fx.value + jl * d;
}

/// Scaled residuals r(a) = ||f(x0 + a d) - approx(x0, a d)|| / a for each
/// scale a.  An L-smooth f drives r to zero as the scales shrink.
template <LDEvaluable F>
std::vector<double> taylor_residual_profile(F&& f, const Eigen::VectorXd& x0,
                                            const Eigen::VectorXd& d,
                                            std::span<const double> scales) {
  require(!scales.empty(), "taylor_residual_profile: no scales");
  for (size_t i = 0; i < scales.size(); ++i) {
    require(scales[i] > 0.0, "taylor_residual_profile: scales must be positive");
    if (i > 0) require(scales[i] < scales[i - 1],
                       "taylor_residual_profile: scales must be strictly decreasing");
  }
  std::vector<double> out;
  out.reserve(scales.size());
  for (double a : scales) {
    const Eigen::VectorXd step = a * d;
    const Eigen::VectorXd exact =
        f(LDVector{x0 + step, Eigen::MatrixXd::Zero(x0.size(), 1)}).value;
    const Eigen::VectorXd approx = taylor_approx(f, x0, step);
    out.push_back((exact - approx).norm() / a);
  }
  return out;
}

}  // namespace lserc

#endif  // LSERC_TAYLOR_HPP
