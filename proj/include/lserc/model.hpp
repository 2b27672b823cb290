#ifndef LSERC_MODEL_HPP
#define LSERC_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lserc/expr.hpp"
#include "lserc/ld_arith.hpp"

// Declarative input-output models
//
//   x'(t) = f(x(t), u(t), theta),   x(t0) = f0(theta),
//   y(t)  = h(x(t), u(t), theta),
//
// with L-smooth right-hand sides given as expression trees.  Domains are
// not represented explicitly; evaluation-time domain errors are the
// enforcement mechanism.

namespace lserc {

/// One input channel, evaluated as offset + amplitude * sin(frequency * t).
struct InputSignal {
  double offset = 0.0;
  double amplitude = 0.0;
  double frequency = 0.0;

  double operator()(double t) const { return offset + amplitude * std::sin(frequency * t); }
};

struct ModelSpec {
  std::string name;
  int n_x = 0, n_u = 0, n_p = 0, n_y = 0;
  std::vector<Expr> f;    // n_x expressions
  std::vector<Expr> h;    // n_y expressions
  std::vector<Expr> f0;   // n_x expressions over params/constants only
  std::vector<InputSignal> u_star;
  Eigen::VectorXd theta_star;
  double t0 = 0.0, tf = 0.0;

  /// Observability mode treats the parameters as the initial state:
  /// n_p == n_x and f0 is the identity on the parameters.
  bool observability_ready() const {
    if (n_p != n_x) return false;
    for (int i = 0; i < n_x; ++i)
      if (!(f0[static_cast<size_t>(i)].kind == ExprKind::param &&
            f0[static_cast<size_t>(i)].index == i))
        return false;
    return true;
  }
};

enum class ModelFn { f, h, f0 };

namespace detail {

inline std::string atom_label(const Expr& e) {
  switch (e.kind) {
    case ExprKind::state: return "x" + std::to_string(e.index);
    case ExprKind::input: return "u" + std::to_string(e.index);
    case ExprKind::param: return "p" + std::to_string(e.index);
    case ExprKind::time_var: return "t";
    case ExprKind::constant: return format_double(e.number);
    case ExprKind::add: return "add";
    case ExprKind::sub: return "sub";
    case ExprKind::mul: return "mul";
    case ExprKind::div: return "div";
    default: return op_name(e.kind);
  }
}

inline std::string join_path(const std::string& root, const std::vector<const Expr*>& trail) {
  std::string out = root;
  for (const Expr* e : trail) {
    out += '/';
    out += atom_label(*e);
  }
  return out;
}

inline void validate_expr(const Expr& e, const ModelSpec& spec, bool params_only,
                          const std::string& root, std::vector<const Expr*>& trail) {
  trail.push_back(&e);
  switch (e.kind) {
    case ExprKind::state:
      if (params_only)
        throw std::invalid_argument(join_path(root, trail) + ": f0 may reference parameters and constants only");
      if (e.index < 0 || e.index >= spec.n_x)
        throw std::invalid_argument(join_path(root, trail) + ": state index out of range (n_x=" +
                                    std::to_string(spec.n_x) + ")");
      break;
    case ExprKind::input:
      if (params_only)
        throw std::invalid_argument(join_path(root, trail) + ": f0 may reference parameters and constants only");
      if (e.index < 0 || e.index >= spec.n_u)
        throw std::invalid_argument(join_path(root, trail) + ": input index out of range (n_u=" +
                                    std::to_string(spec.n_u) + ")");
      break;
    case ExprKind::param:
      if (e.index < 0 || e.index >= spec.n_p)
        throw std::invalid_argument(join_path(root, trail) + ": parameter index out of range (n_p=" +
                                    std::to_string(spec.n_p) + ")");
      break;
    case ExprKind::time_var:
      if (params_only)
        throw std::invalid_argument(join_path(root, trail) + ": f0 may reference parameters and constants only");
      break;
    default:
      break;
  }
  for (const Expr& c : e.children) validate_expr(c, spec, params_only, root, trail);
  trail.pop_back();
}

}  // namespace detail

inline void validate_model(const ModelSpec& spec) {
  require(spec.n_x >= 1, "model: n_x must be positive");
  require(spec.n_u >= 0, "model: n_u must be nonnegative");
  require(spec.n_p >= 1, "model: n_p must be positive");
  require(spec.n_y >= 1, "model: n_y must be positive");
  require(spec.tf > spec.t0, "model: tf must exceed t0");
  require(spec.f.size() == static_cast<size_t>(spec.n_x), "model: f needs n_x expressions");
  require(spec.h.size() == static_cast<size_t>(spec.n_y), "model: h needs n_y expressions");
  require(spec.f0.size() == static_cast<size_t>(spec.n_x), "model: f0 needs n_x expressions");
  require(spec.u_star.size() == static_cast<size_t>(spec.n_u), "model: inputs need n_u signals");
  require(spec.theta_star.size() == spec.n_p, "model: theta_star needs n_p entries");
  std::vector<const Expr*> trail;
  for (int i = 0; i < spec.n_x; ++i)
    detail::validate_expr(spec.f[static_cast<size_t>(i)], spec, false, "f[" + std::to_string(i) + "]", trail);
  for (int i = 0; i < spec.n_y; ++i)
    detail::validate_expr(spec.h[static_cast<size_t>(i)], spec, false, "h[" + std::to_string(i) + "]", trail);
  for (int i = 0; i < spec.n_x; ++i)
    detail::validate_expr(spec.f0[static_cast<size_t>(i)], spec, true, "f0[" + std::to_string(i) + "]", trail);
}

// ---- evaluation ----

namespace detail {

/// Walks an expression once in real arithmetic.  The trail is pointer
/// pushes only, so the hot integration loop pays nothing for the node
/// paths that decorate domain errors.
class RealEval {
 public:
  RealEval(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
           const Eigen::VectorXd& theta, double t, double eps_zero,
           const std::string& root)
      : x_(x), u_(u), theta_(theta), t_(t), eps_(eps_zero), root_(root) {}

  double eval(const Expr& e) {
    trail_.push_back(&e);
    const double out = dispatch(e);
    trail_.pop_back();
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& what) {
    throw std::domain_error(join_path(root_, trail_) + ": " + what);
  }

  double dispatch(const Expr& e) {
    switch (e.kind) {
      case ExprKind::constant: return e.number;
      case ExprKind::state: return x_[e.index];
      case ExprKind::input: return u_[e.index];
      case ExprKind::param: return theta_[e.index];
      case ExprKind::time_var: return t_;
      case ExprKind::add: return eval(e.children[0]) + eval(e.children[1]);
      case ExprKind::sub: return eval(e.children[0]) - eval(e.children[1]);
      case ExprKind::mul: return eval(e.children[0]) * eval(e.children[1]);
      case ExprKind::div: {
        const double a = eval(e.children[0]);
        const double b = eval(e.children[1]);
        if (std::abs(b) <= eps_) fail("division by (tolerance-)zero");
        return a / b;
      }
      case ExprKind::neg: return -eval(e.children[0]);
      case ExprKind::exp_fn: return std::exp(eval(e.children[0]));
      case ExprKind::log_fn: {
        const double a = eval(e.children[0]);
        if (a <= eps_) fail("log of a non-positive argument");
        return std::log(a);
      }
      case ExprKind::sin_fn: return std::sin(eval(e.children[0]));
      case ExprKind::cos_fn: return std::cos(eval(e.children[0]));
      case ExprKind::sqrt_fn: {
        const double a = eval(e.children[0]);
        if (a <= eps_) fail("sqrt of a non-positive argument");
        return std::sqrt(a);
      }
      case ExprKind::pow_const: {
        const double a = eval(e.children[0]);
        const double r = std::round(e.number);
        const bool integral = std::abs(e.number - r) <= 1e-12;
        if (!integral && a <= eps_) fail("pow with non-integer exponent needs a positive base");
        if (integral && e.number < 0.0 && std::abs(a) <= eps_) fail("pow with negative exponent needs a nonzero base");
        return std::pow(a, e.number);
      }
      case ExprKind::abs_fn: return std::abs(eval(e.children[0]));
      case ExprKind::max_fn: return std::max(eval(e.children[0]), eval(e.children[1]));
      case ExprKind::min_fn: return std::min(eval(e.children[0]), eval(e.children[1]));
      case ExprKind::mid_fn: {
        const double a = eval(e.children[0]);
        const double b = eval(e.children[1]);
        const double c = eval(e.children[2]);
        return std::max(std::min(a, b), std::min(std::max(a, b), c));
      }
    }
    fail("unknown node kind");
  }

  const Eigen::VectorXd& x_;
  const Eigen::VectorXd& u_;
  const Eigen::VectorXd& theta_;
  double t_;
  double eps_;
  const std::string& root_;
  std::vector<const Expr*> trail_;
};

/// Same walk in LD arithmetic.  Value fields follow exactly the same
/// floating-point operations as RealEval.
class LDEval {
 public:
  LDEval(const LDVector& x, const LDVector& u, const LDVector& theta, double t,
         double eps_zero, BranchRecorder* rec, const std::string& root)
      : x_(x), u_(u), theta_(theta), t_(t), eps_(eps_zero), rec_(rec), root_(root) {
    k_ = theta_.k();
  }

  LDScalar eval(const Expr& e) {
    trail_.push_back(&e);
    LDScalar out = dispatch(e);
    trail_.pop_back();
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& what) {
    throw std::domain_error(join_path(root_, trail_) + ": " + what);
  }

  LDScalar dispatch(const Expr& e) {
    switch (e.kind) {
      case ExprKind::constant: return ld_constant(e.number, k_);
      case ExprKind::state: return x_.component(e.index);
      case ExprKind::input: return u_.component(e.index);
      case ExprKind::param: return theta_.component(e.index);
      case ExprKind::time_var: return ld_constant(t_, k_);
      case ExprKind::add: return eval(e.children[0]) + eval(e.children[1]);
      case ExprKind::sub: return eval(e.children[0]) - eval(e.children[1]);
      case ExprKind::mul: return eval(e.children[0]) * eval(e.children[1]);
      case ExprKind::div: {
        const LDScalar a = eval(e.children[0]);
        const LDScalar b = eval(e.children[1]);
        if (std::abs(b.value) <= eps_) fail("division by (tolerance-)zero");
        return ld_div(a, b, eps_);
      }
      case ExprKind::neg: return -eval(e.children[0]);
      case ExprKind::exp_fn: return ld_exp(eval(e.children[0]));
      case ExprKind::log_fn: {
        const LDScalar a = eval(e.children[0]);
        if (a.value <= eps_) fail("log of a non-positive argument");
        return ld_log(a, eps_);
      }
      case ExprKind::sin_fn: return ld_sin(eval(e.children[0]));
      case ExprKind::cos_fn: return ld_cos(eval(e.children[0]));
      case ExprKind::sqrt_fn: {
        const LDScalar a = eval(e.children[0]);
        if (a.value <= eps_) fail("sqrt of a non-positive argument");
        return ld_sqrt(a, eps_);
      }
      case ExprKind::pow_const: {
        const LDScalar a = eval(e.children[0]);
        const double r = std::round(e.number);
        const bool integral = std::abs(e.number - r) <= 1e-12;
        if (!integral && a.value <= eps_) fail("pow with non-integer exponent needs a positive base");
        if (integral && e.number < 0.0 && std::abs(a.value) <= eps_) fail("pow with negative exponent needs a nonzero base");
        return ld_pow_const(a, e.number, eps_);
      }
      case ExprKind::abs_fn: return ld_abs(eval(e.children[0]), eps_, rec_);
      case ExprKind::max_fn: return ld_max(eval(e.children[0]), eval(e.children[1]), eps_, rec_);
      case ExprKind::min_fn: return ld_min(eval(e.children[0]), eval(e.children[1]), eps_, rec_);
      case ExprKind::mid_fn:
        return ld_mid(eval(e.children[0]), eval(e.children[1]), eval(e.children[2]), eps_, rec_);
    }
    fail("unknown node kind");
  }

  const LDVector& x_;
  const LDVector& u_;
  const LDVector& theta_;
  double t_;
  double eps_;
  BranchRecorder* rec_;
  Eigen::Index k_ = 0;
  const std::string& root_;
  std::vector<const Expr*> trail_;
};

inline const std::vector<Expr>& pick(const ModelSpec& spec, ModelFn which) {
  switch (which) {
    case ModelFn::f: return spec.f;
    case ModelFn::h: return spec.h;
    case ModelFn::f0: return spec.f0;
  }
  throw std::invalid_argument("model: unknown function selector");
}

inline const char* fn_label(ModelFn which) {
  switch (which) {
    case ModelFn::f: return "f";
    case ModelFn::h: return "h";
    case ModelFn::f0: return "f0";
  }
  return "?";
}

}  // namespace detail

inline Eigen::VectorXd eval_real(const ModelSpec& spec, ModelFn which,
                                 const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                 const Eigen::VectorXd& theta, double t,
                                 double eps_zero = kEpsZero) {
  const auto& exprs = detail::pick(spec, which);
  Eigen::VectorXd out(static_cast<Eigen::Index>(exprs.size()));
  for (size_t i = 0; i < exprs.size(); ++i) {
    const std::string root = std::string(detail::fn_label(which)) + "[" + std::to_string(i) + "]";
    detail::RealEval ev(x, u, theta, t, eps_zero, root);
    out[static_cast<Eigen::Index>(i)] = ev.eval(exprs[i]);
  }
  return out;
}

inline LDVector eval_ld(const ModelSpec& spec, ModelFn which, const LDVector& x,
                        const LDVector& u, const LDVector& theta, double t,
                        double eps_zero = kEpsZero, BranchRecorder* rec = nullptr) {
  const auto& exprs = detail::pick(spec, which);
  LDVector out;
  out.value.resize(static_cast<Eigen::Index>(exprs.size()));
  out.deriv.resize(static_cast<Eigen::Index>(exprs.size()), theta.k());
  for (size_t i = 0; i < exprs.size(); ++i) {
    const std::string root = std::string(detail::fn_label(which)) + "[" + std::to_string(i) + "]";
    detail::LDEval ev(x, u, theta, t, eps_zero, rec, root);
    const LDScalar r = ev.eval(exprs[i]);
    out.value[static_cast<Eigen::Index>(i)] = r.value;
    out.deriv.row(static_cast<Eigen::Index>(i)) = r.deriv;
  }
  return out;
}

// ---- document parsing / serialization ----

inline ModelSpec parse_model(const nlohmann::json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("model document: top level must be an object");
  const auto need = [&](const char* key) -> const nlohmann::json& {
    auto it = doc.find(key);
    if (it == doc.end())
      throw std::invalid_argument(std::string("model document: missing key '") + key + "'");
    return *it;
  };
  ModelSpec spec;
  spec.name = need("name").get<std::string>();
  const auto& dims = need("dims");
  const auto dim = [&](const char* key) {
    auto it = dims.find(key);
    if (it == dims.end() || !it->is_number_integer())
      throw std::invalid_argument(std::string("model document: dims.") + key + " must be an integer");
    return it->get<int>();
  };
  spec.n_x = dim("n_x");
  spec.n_u = dim("n_u");
  spec.n_p = dim("n_p");
  spec.n_y = dim("n_y");

  const auto parse_exprs = [&](const char* key, int count) {
    const auto& arr = need(key);
    if (!arr.is_array() || arr.size() != static_cast<size_t>(count))
      throw std::invalid_argument(std::string("model document: ") + key + " must list " +
                                  std::to_string(count) + " expression strings");
    std::vector<Expr> out;
    out.reserve(arr.size());
    for (size_t i = 0; i < arr.size(); ++i) {
      try {
        out.push_back(parse_expr(arr[i].get<std::string>()));
      } catch (const std::exception& e) {
        throw std::invalid_argument(std::string(key) + "[" + std::to_string(i) + "]: " + e.what());
      }
    }
    return out;
  };
  spec.f = parse_exprs("f", spec.n_x);
  spec.h = parse_exprs("h", spec.n_y);
  spec.f0 = parse_exprs("f0", spec.n_x);

  const auto& inputs = need("inputs");
  if (!inputs.is_array() || inputs.size() != static_cast<size_t>(spec.n_u))
    throw std::invalid_argument("model document: inputs must list n_u signals");
  for (const auto& sig : inputs) {
    InputSignal s;
    s.offset = sig.at("offset").get<double>();
    s.amplitude = sig.at("amplitude").get<double>();
    s.frequency = sig.at("frequency").get<double>();
    spec.u_star.push_back(s);
  }

  const auto& th = need("theta_star");
  if (!th.is_array() || th.size() != static_cast<size_t>(spec.n_p))
    throw std::invalid_argument("model document: theta_star must list n_p reals");
  spec.theta_star.resize(spec.n_p);
  for (int i = 0; i < spec.n_p; ++i) spec.theta_star[i] = th[static_cast<size_t>(i)].get<double>();

  spec.t0 = need("t0").get<double>();
  spec.tf = need("tf").get<double>();
  validate_model(spec);
  return spec;
}

inline ModelSpec parse_model(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("model document: ") + e.what());
  }
  return parse_model(doc);
}

inline nlohmann::ordered_json serialize_model(const ModelSpec& spec) {
  nlohmann::ordered_json doc;
  doc["name"] = spec.name;
  doc["dims"] = {{"n_x", spec.n_x}, {"n_u", spec.n_u}, {"n_p", spec.n_p}, {"n_y", spec.n_y}};
  const auto exprs_to_json = [](const std::vector<Expr>& es) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const Expr& e : es) arr.push_back(to_string(e));
    return arr;
  };
  doc["f"] = exprs_to_json(spec.f);
  doc["h"] = exprs_to_json(spec.h);
  doc["f0"] = exprs_to_json(spec.f0);
  nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
  for (const InputSignal& s : spec.u_star)
    inputs.push_back({{"offset", s.offset}, {"amplitude", s.amplitude}, {"frequency", s.frequency}});
  doc["inputs"] = inputs;
  nlohmann::ordered_json th = nlohmann::ordered_json::array();
  for (int i = 0; i < spec.n_p; ++i) th.push_back(spec.theta_star[i]);
  doc["theta_star"] = th;
  doc["t0"] = spec.t0;
  doc["tf"] = spec.tf;
  return doc;
}

// ---- built-in models ----

inline std::vector<std::string> builtin_names() {
  return {"riot", "abs_toy", "maxpoly", "stommel", "stommel_obs", "linear2"};
}

inline ModelSpec builtin_model(const std::string& name) {
  static const char* riot = R"json({
    "name": "riot",
    "dims": {"n_x": 1, "n_u": 0, "n_p": 2, "n_y": 1},
    "f": ["(max 0 (- 1 (exp (neg (- x0 p0)))))"],
    "h": ["x0"],
    "f0": ["p1"],
    "inputs": [],
    "theta_star": [1.0, 1.0],
    "t0": 0.0, "tf": 1.0
  })json";
  static const char* abs_toy = R"json({
    "name": "abs_toy",
    "dims": {"n_x": 1, "n_u": 0, "n_p": 1, "n_y": 1},
    "f": ["0"],
    "h": ["(abs p0)"],
    "f0": ["0"],
    "inputs": [],
    "theta_star": [0.0],
    "t0": 0.0, "tf": 1.0
  })json";
  static const char* maxpoly = R"json({
    "name": "maxpoly",
    "dims": {"n_x": 1, "n_u": 0, "n_p": 1, "n_y": 1},
    "f": ["0"],
    "h": ["(max (pow p0 3) (pow p0 5))"],
    "f0": ["0"],
    "inputs": [],
    "theta_star": [0.0],
    "t0": 0.0, "tf": 1.0
  })json";
  static const char* stommel = R"json({
    "name": "stommel",
    "dims": {"n_x": 2, "n_u": 2, "n_p": 3, "n_y": 1},
    "f": ["(- (- (+ p0 u0) x0) (* x0 (abs (- x0 x1))))",
          "(- (- (+ p1 u1) (* x1 p2)) (* x1 (abs (- x0 x1))))"],
    "h": ["(max x0 0.5)"],
    "f0": ["1", "2"],
    "inputs": [{"offset": 0.0, "amplitude": 2.0, "frequency": 20.0},
               {"offset": 0.0, "amplitude": 1.0, "frequency": 20.0}],
    "theta_star": [3.0, 1.1, 0.3],
    "t0": 0.0, "tf": 1.0
  })json";
  static const char* stommel_obs = R"json({
    "name": "stommel_obs",
    "dims": {"n_x": 2, "n_u": 2, "n_p": 2, "n_y": 1},
    "f": ["(- (- (+ 3 u0) x0) (* x0 (abs (- x0 x1))))",
          "(- (- (+ 1.1 u1) (* x1 0.3)) (* x1 (abs (- x0 x1))))"],
    "h": ["(max x0 0.5)"],
    "f0": ["p0", "p1"],
    "inputs": [{"offset": 0.0, "amplitude": 2.0, "frequency": 20.0},
               {"offset": 0.0, "amplitude": 1.0, "frequency": 20.0}],
    "theta_star": [1.0, 2.0],
    "t0": 0.0, "tf": 1.0
  })json";
  static const char* linear2 = R"json({
    "name": "linear2",
    "dims": {"n_x": 1, "n_u": 0, "n_p": 2, "n_y": 1},
    "f": ["(neg (* p0 x0))"],
    "h": ["(* p1 x0)"],
    "f0": ["1"],
    "inputs": [],
    "theta_star": [1.0, 1.0],
    "t0": 0.0, "tf": 1.0
  })json";
  if (name == "riot") return parse_model(std::string(riot));
  if (name == "abs_toy") return parse_model(std::string(abs_toy));
  if (name == "maxpoly") return parse_model(std::string(maxpoly));
  if (name == "stommel") return parse_model(std::string(stommel));
  if (name == "stommel_obs") return parse_model(std::string(stommel_obs));
  if (name == "linear2") return parse_model(std::string(linear2));
  throw std::invalid_argument("builtin_model: unknown model '" + name + "'");
}

/// Sample times used when the caller does not pick any: the Stommel runs
/// keep their published sampling; everything else gets 10 uniform points.
inline std::vector<double> default_sample_times(const ModelSpec& spec) {
  if (spec.name == "stommel" || spec.name == "stommel_obs")
    return {0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0};
  std::vector<double> out;
  out.reserve(10);
  for (int i = 0; i < 10; ++i)
    out.push_back(spec.t0 + (spec.tf - spec.t0) * static_cast<double>(i) / 9.0);
  return out;
}

/// Closed-form solution of the riot system; the oracle behind its fixtures.
inline double riot_closed_form(const Eigen::Vector2d& theta, double t) {
  require(t >= 0.0, "riot_closed_form: t must be nonnegative");
  if (theta[0] > theta[1]) return theta[1];
  const double w = theta[0] - theta[1];
  const double arg = std::exp(t) + std::exp(w) - std::exp(t + w);
  if (arg <= 0.0) throw std::domain_error("riot_closed_form: solution escaped (log argument <= 0)");
  return std::log(arg) + theta[1];
}

/// A pure function of x given by expression trees; the carrier for the
/// Taylor machinery and the CLI taylor-check command.
struct ExprFunction {
  std::vector<Expr> components;
  int n = 0;

  ExprFunction(std::vector<Expr> comps, int n_vars)
      : components(std::move(comps)), n(n_vars) {
    ModelSpec shim;
    shim.n_x = n;
    shim.n_u = 0;
    shim.n_p = 1;
    shim.n_y = 1;
    std::vector<const Expr*> trail;
    for (size_t i = 0; i < components.size(); ++i) {
      const Expr& e = components[i];
      // reuse the model validator: states allowed, inputs/params/time not
      check_pure(e, "expr[" + std::to_string(i) + "]", trail, shim);
    }
  }

  static ExprFunction parse(const std::vector<std::string>& texts, int n_vars) {
    std::vector<Expr> comps;
    comps.reserve(texts.size());
    for (const auto& s : texts) comps.push_back(parse_expr(s));
    return ExprFunction(std::move(comps), n_vars);
  }

  LDVector operator()(const LDVector& x) const {
    require(x.size() == n, "ExprFunction: point has wrong dimension");
    LDVector out;
    out.value.resize(static_cast<Eigen::Index>(components.size()));
    out.deriv.resize(static_cast<Eigen::Index>(components.size()), x.k());
    const LDVector empty = LDVector::zero(0, x.k());
    const LDVector theta = LDVector::zero(1, x.k());
    for (size_t i = 0; i < components.size(); ++i) {
      const std::string root = "expr[" + std::to_string(i) + "]";
      detail::LDEval ev(x, empty, theta, 0.0, kEpsZero, nullptr, root);
      const LDScalar r = ev.eval(components[i]);
      out.value[static_cast<Eigen::Index>(i)] = r.value;
      out.deriv.row(static_cast<Eigen::Index>(i)) = r.deriv;
    }
    return out;
  }

  Eigen::VectorXd value(const Eigen::VectorXd& x) const {
    return (*this)(LDVector{x, Eigen::MatrixXd::Zero(x.size(), 1)}).value;
  }

 private:
  static void check_pure(const Expr& e, const std::string& root,
                         std::vector<const Expr*>& trail, const ModelSpec& shim) {
    trail.push_back(&e);
    if (e.kind == ExprKind::input || e.kind == ExprKind::param || e.kind == ExprKind::time_var)
      throw std::invalid_argument(detail::join_path(root, trail) +
                                  ": pure expressions may reference x atoms and constants only");
    if (e.kind == ExprKind::state && (e.index < 0 || e.index >= shim.n_x))
      throw std::invalid_argument(detail::join_path(root, trail) + ": state index out of range (n=" +
                                  std::to_string(shim.n_x) + ")");
    for (const Expr& c : e.children) check_pure(c, root, trail, shim);
    trail.pop_back();
  }
};

}  // namespace lserc

#endif  // LSERC_MODEL_HPP
