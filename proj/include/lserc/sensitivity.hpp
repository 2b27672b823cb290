#ifndef LSERC_SENSITIVITY_HPP
#define LSERC_SENSITIVITY_HPP

#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "lserc/model.hpp"

// Joint fixed-step RK4 integration of the reference system with the
// nonsmooth forward sensitivity system.  The sensitivity right-hand side is
// the model's f evaluated in LD arithmetic with the state block seeded by
// the current X, the input block zero, and the parameter block pinned to
// [d  I_{n_p}]; no symbolic derivation is involved.  The integrator steps
// through kinks deliberately: no event localization.

namespace lserc {

struct Grid {
  double t0 = 0.0, tf = 0.0;
  double step = 1e-3;
  std::vector<double> sample_times;  // snapped onto grid nodes

  int num_steps() const { return steps_; }
  double node(int i) const { return t0 + static_cast<double>(i) * step; }

  int snap_index(double t) const {
    const int idx = static_cast<int>(std::llround((t - t0) / step));
    if (idx < 0 || idx > steps_)
      throw std::invalid_argument("grid: time " + std::to_string(t) + " is outside [t0, tf]");
    if (std::abs(node(idx) - t) > step / 2.0 + 1e-15)
      throw std::invalid_argument("grid: time " + std::to_string(t) + " does not snap onto a node");
    return idx;
  }

  static Grid make(double t0, double tf, double step, std::span<const double> samples) {
    require(step > 0.0, "grid: step must be positive");
    require(tf >= t0, "grid: tf must not precede t0");
    Grid g;
    g.t0 = t0;
    g.tf = tf;
    g.step = step;
    const double n_real = (tf - t0) / step;
    g.steps_ = static_cast<int>(std::llround(n_real));
    if (std::abs(static_cast<double>(g.steps_) - n_real) > 1e-12 * std::max(1.0, n_real))
      throw std::invalid_argument("grid: step does not divide the horizon");
    double prev = t0 - 1.0;
    for (double s : samples) {
      const double snapped = g.node(g.snap_index(s));
      require(snapped > prev, "grid: sample times must be strictly ascending after snapping");
      g.sample_times.push_back(snapped);
      prev = snapped;
    }
    return g;
  }

 private:
  int steps_ = 0;
};

enum class SensMode { identifiability, observability };

inline const char* to_string(SensMode m) {
  return m == SensMode::identifiability ? "identifiability" : "observability";
}

/// Time-gridded joint solution: reference states x*, state sensitivities
/// X* (n_x x (1+n_p)), output values y*, and output sensitivities Y*
/// (n_y x (1+n_p)) at every node.
struct SensitivityTrajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> x_star;
  std::vector<Eigen::MatrixXd> x_sens;
  std::vector<Eigen::VectorXd> y_star;
  std::vector<Eigen::MatrixXd> y_sens;
  SensMode mode = SensMode::identifiability;
  Eigen::VectorXd d;
  double step = 0.0;
  std::vector<int> kink_nodes;  // nodes where a branch decision flipped; advisory only
};

namespace detail {

inline Eigen::VectorXd input_values(const ModelSpec& spec, double t) {
  Eigen::VectorXd u(spec.n_u);
  for (int j = 0; j < spec.n_u; ++j) u[j] = spec.u_star[static_cast<size_t>(j)](t);
  return u;
}

inline void check_finite(const Eigen::VectorXd& x, double t) {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]))
      throw std::runtime_error("integration diverged (non-finite state) at t=" + std::to_string(t));
}

inline void check_finite(const Eigen::MatrixXd& m, double t) {
  if (!m.allFinite())
    throw std::runtime_error("integration diverged (non-finite sensitivity) at t=" + std::to_string(t));
}

/// Re-throws evaluation domain errors decorated with the offending time.
template <class Fn>
auto at_time(double t, Fn&& fn) {
  try {
    return fn();
  } catch (const std::domain_error& e) {
    throw std::domain_error("t=" + format_double(t) + ": " + e.what());
  }
}

}  // namespace detail

/// Classical RK4 solution of the reference system at theta (defaults to
/// theta_star).  Deterministic for a fixed grid.
inline std::pair<std::vector<double>, std::vector<Eigen::VectorXd>>
integrate_reference(const ModelSpec& spec, const Grid& grid,
                    std::optional<Eigen::VectorXd> theta = std::nullopt,
                    double eps_zero = kEpsZero) {
  const Eigen::VectorXd th = theta.value_or(spec.theta_star);
  require(th.size() == spec.n_p, "integrate_reference: theta has wrong dimension");
  const Eigen::VectorXd empty_u(0);
  Eigen::VectorXd x =
      eval_real(spec, ModelFn::f0, Eigen::VectorXd(0), empty_u, th, grid.t0, eps_zero);

  const auto rhs = [&](double t, const Eigen::VectorXd& xs) {
    return detail::at_time(t, [&] {
      return eval_real(spec, ModelFn::f, xs, detail::input_values(spec, t), th, t, eps_zero);
    });
  };

  std::vector<double> times{grid.t0};
  std::vector<Eigen::VectorXd> xs{x};
  times.reserve(static_cast<size_t>(grid.num_steps()) + 1);
  xs.reserve(static_cast<size_t>(grid.num_steps()) + 1);
  const double h = grid.step;
  for (int i = 0; i < grid.num_steps(); ++i) {
    const double t = grid.node(i);
    const Eigen::VectorXd k1 = rhs(t, x);
    const Eigen::VectorXd k2 = rhs(t + h / 2.0, x + (h / 2.0) * k1);
    const Eigen::VectorXd k3 = rhs(t + h / 2.0, x + (h / 2.0) * k2);
    const Eigen::VectorXd k4 = rhs(t + h, x + h * k3);
    x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    detail::check_finite(x, grid.node(i + 1));
    times.push_back(grid.node(i + 1));
    xs.push_back(x);
  }
  return {std::move(times), std::move(xs)};
}

/// Advances x and the sensitivity matrix X with one shared RK4 stepper.
/// Identifiability seeds X(t0) with f0'(theta; [d I]); observability
/// requires f0 to be the identity, which makes that seed exactly [d I].
inline SensitivityTrajectory integrate_sensitivity(
    const ModelSpec& spec, const Grid& grid, const Eigen::VectorXd& d, SensMode mode,
    std::optional<Eigen::VectorXd> theta = std::nullopt, double eps_zero = kEpsZero) {
  require(d.size() == spec.n_p, "integrate_sensitivity: direction has wrong dimension");
  if (mode == SensMode::observability)
    require(spec.observability_ready(),
            "integrate_sensitivity: observability needs n_p == n_x and f0 equal to the parameters");
  const Eigen::VectorXd th = theta.value_or(spec.theta_star);
  require(th.size() == spec.n_p, "integrate_sensitivity: theta has wrong dimension");

  const Eigen::Index k = 1 + spec.n_p;
  const LDVector theta_ld{th, DirectionsMatrix::canonical(d).entries};
  const LDVector empty0 = LDVector::zero(0, k);

  // X(t0) = f0'(theta; [d I]).
  const LDVector x0_ld = eval_ld(spec, ModelFn::f0, empty0, empty0, theta_ld, grid.t0, eps_zero);

  struct Rates { Eigen::VectorXd v; Eigen::MatrixXd d; };
  const auto rhs = [&](double t, const Eigen::VectorXd& xv, const Eigen::MatrixXd& xd,
                       BranchRecorder* rec) {
    return detail::at_time(t, [&] {
      const LDVector x_ld{xv, xd};
      const LDVector u_ld{detail::input_values(spec, t), Eigen::MatrixXd::Zero(spec.n_u, k)};
      LDVector f_ld = eval_ld(spec, ModelFn::f, x_ld, u_ld, theta_ld, t, eps_zero, rec);
      return Rates{std::move(f_ld.value), std::move(f_ld.deriv)};
    });
  };
  const auto output = [&](double t, const Eigen::VectorXd& xv, const Eigen::MatrixXd& xd,
                          BranchRecorder* rec) {
    return detail::at_time(t, [&] {
      const LDVector x_ld{xv, xd};
      const LDVector u_ld{detail::input_values(spec, t), Eigen::MatrixXd::Zero(spec.n_u, k)};
      return eval_ld(spec, ModelFn::h, x_ld, u_ld, theta_ld, t, eps_zero, rec);
    });
  };

  SensitivityTrajectory traj;
  traj.mode = mode;
  traj.d = d;
  traj.step = grid.step;
  const size_t n_nodes = static_cast<size_t>(grid.num_steps()) + 1;
  traj.times.reserve(n_nodes);
  traj.x_star.reserve(n_nodes);
  traj.x_sens.reserve(n_nodes);
  traj.y_star.reserve(n_nodes);
  traj.y_sens.reserve(n_nodes);

  Eigen::VectorXd x = x0_ld.value;
  Eigen::MatrixXd X = x0_ld.deriv;
  const double h = grid.step;

  std::vector<int8_t> prev_signature;
  const auto record_node = [&](int idx, double t) {
    BranchRecorder rec;
    const LDVector y_ld = output(t, x, X, &rec);
    rhs(t, x, X, &rec);  // branch signature only; rates discarded
    traj.times.push_back(t);
    traj.x_star.push_back(x);
    traj.x_sens.push_back(X);
    traj.y_star.push_back(y_ld.value);
    traj.y_sens.push_back(y_ld.deriv);
    if (idx > 0 && rec.decisions != prev_signature) traj.kink_nodes.push_back(idx);
    prev_signature = std::move(rec.decisions);
  };

  record_node(0, grid.t0);
  for (int i = 0; i < grid.num_steps(); ++i) {
    const double t = grid.node(i);
    const Rates k1 = rhs(t, x, X, nullptr);
    const Rates k2 = rhs(t + h / 2.0, x + (h / 2.0) * k1.v, X + (h / 2.0) * k1.d, nullptr);
    const Rates k3 = rhs(t + h / 2.0, x + (h / 2.0) * k2.v, X + (h / 2.0) * k2.d, nullptr);
    const Rates k4 = rhs(t + h, x + h * k3.v, X + h * k3.d, nullptr);
    x = x + (h / 6.0) * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
    X = X + (h / 6.0) * (k1.d + 2.0 * k2.d + 2.0 * k3.d + k4.d);
    detail::check_finite(x, grid.node(i + 1));
    detail::check_finite(X, grid.node(i + 1));
    record_node(i + 1, grid.node(i + 1));
  }
  return traj;
}

/// Y* matrices at the requested (grid-snapped) times, in order.
inline std::vector<Eigen::MatrixXd> sample(const SensitivityTrajectory& traj,
                                           std::span<const double> sample_times) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(sample_times.size());
  require(!traj.times.empty(), "sample: empty trajectory");
  for (double t : sample_times) {
    const int idx = static_cast<int>(std::llround((t - traj.times.front()) / traj.step));
    if (idx < 0 || static_cast<size_t>(idx) >= traj.times.size() ||
        std::abs(traj.times[static_cast<size_t>(idx)] - t) > traj.step / 2.0 + 1e-15)
      throw std::invalid_argument("sample: time " + std::to_string(t) +
                                  " is not a snapped grid node of this trajectory");
    out.push_back(traj.y_sens[static_cast<size_t>(idx)]);
  }
  return out;
}

/// CSV export over the full grid: t, states, outputs, the full Y* entries
/// (so the lshifted L-sensitivity block is the Y[r][1..] columns) and a
/// kink flag from the branch-flip diagnostic.
inline void write_trajectory_csv(std::ostream& os, const SensitivityTrajectory& traj) {
  const int n_x = traj.x_star.empty() ? 0 : static_cast<int>(traj.x_star.front().size());
  const int n_y = traj.y_star.empty() ? 0 : static_cast<int>(traj.y_star.front().size());
  const int width = traj.y_sens.empty() ? 0 : static_cast<int>(traj.y_sens.front().cols());
  os << 't';
  for (int i = 0; i < n_x; ++i) os << ",x[" << i << "]";
  for (int i = 0; i < n_y; ++i) os << ",y[" << i << "]";
  for (int r = 0; r < n_y; ++r)
    for (int c = 0; c < width; ++c) os << ",Y[" << r << "][" << c << "]";
  os << ",kink\n";
  std::vector<bool> kink(traj.times.size(), false);
  for (int idx : traj.kink_nodes) kink[static_cast<size_t>(idx)] = true;
  for (size_t i = 0; i < traj.times.size(); ++i) {
    os << detail::format_double(traj.times[i]);
    for (int j = 0; j < n_x; ++j) os << ',' << detail::format_double(traj.x_star[i][j]);
    for (int j = 0; j < n_y; ++j) os << ',' << detail::format_double(traj.y_star[i][j]);
    for (int r = 0; r < n_y; ++r)
      for (int c = 0; c < width; ++c) os << ',' << detail::format_double(traj.y_sens[i](r, c));
    os << ',' << (kink[i] ? 1 : 0) << '\n';
  }
}

/// Header-only CSV for a degenerate horizon; mirrors write_trajectory_csv.
inline void write_trajectory_csv_header(std::ostream& os, const ModelSpec& spec) {
  os << 't';
  for (int i = 0; i < spec.n_x; ++i) os << ",x[" << i << "]";
  for (int i = 0; i < spec.n_y; ++i) os << ",y[" << i << "]";
  for (int r = 0; r < spec.n_y; ++r)
    for (int c = 0; c < 1 + spec.n_p; ++c) os << ",Y[" << r << "][" << c << "]";
  os << ",kink\n";
}

}  // namespace lserc

#endif  // LSERC_SENSITIVITY_HPP
