#ifndef LSERC_EXPR_HPP
#define LSERC_EXPR_HPP

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lserc/ld_arith.hpp"

// Expression trees over the L-smooth elemental vocabulary, written as
// prefix s-expressions: (max 0 (- 1 (exp (neg (- x0 p0))))).
// Atoms are x<i>, u<j>, p<l>, t and numerals.

namespace lserc {

enum class ExprKind {
  constant, state, input, param, time_var,
  add, sub, mul, div, neg,
  exp_fn, log_fn, sin_fn, cos_fn, sqrt_fn, pow_const,
  abs_fn, max_fn, min_fn, mid_fn,
};

struct Expr {
  ExprKind kind = ExprKind::constant;
  double number = 0.0;  // constant value, or the exponent for pow_const
  int index = -1;       // state/input/param index
  std::vector<Expr> children;

  bool operator==(const Expr& other) const {
    if (kind != other.kind || index != other.index || children.size() != other.children.size())
      return false;
    if ((kind == ExprKind::constant || kind == ExprKind::pow_const) && number != other.number)
      return false;
    for (size_t i = 0; i < children.size(); ++i)
      if (!(children[i] == other.children[i])) return false;
    return true;
  }

  static Expr constant(double v) { return {ExprKind::constant, v, -1, {}}; }
  static Expr state(int i) { return {ExprKind::state, 0.0, i, {}}; }
  static Expr input(int j) { return {ExprKind::input, 0.0, j, {}}; }
  static Expr param(int l) { return {ExprKind::param, 0.0, l, {}}; }
  static Expr time_var() { return {ExprKind::time_var, 0.0, -1, {}}; }
};

namespace detail {

/// Shortest decimal string that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  return buf;
}

inline size_t arity_of(ExprKind k) {
  switch (k) {
    case ExprKind::constant: case ExprKind::state: case ExprKind::input:
    case ExprKind::param: case ExprKind::time_var: return 0;
    case ExprKind::neg: case ExprKind::exp_fn: case ExprKind::log_fn:
    case ExprKind::sin_fn: case ExprKind::cos_fn: case ExprKind::sqrt_fn:
    case ExprKind::abs_fn: case ExprKind::pow_const: return 1;
    case ExprKind::add: case ExprKind::sub: case ExprKind::mul:
    case ExprKind::div: case ExprKind::max_fn: case ExprKind::min_fn: return 2;
    case ExprKind::mid_fn: return 3;
  }
  return 0;
}

inline const char* op_name(ExprKind k) {
  switch (k) {
    case ExprKind::add: return "+";
    case ExprKind::sub: return "-";
    case ExprKind::mul: return "*";
    case ExprKind::div: return "/";
    case ExprKind::neg: return "neg";
    case ExprKind::exp_fn: return "exp";
    case ExprKind::log_fn: return "log";
    case ExprKind::sin_fn: return "sin";
    case ExprKind::cos_fn: return "cos";
    case ExprKind::sqrt_fn: return "sqrt";
    case ExprKind::pow_const: return "pow";
    case ExprKind::abs_fn: return "abs";
    case ExprKind::max_fn: return "max";
    case ExprKind::min_fn: return "min";
    case ExprKind::mid_fn: return "mid";
    default: return "?";
  }
}

struct Tokenizer {
  std::string_view text;
  size_t pos = 0;

  void skip_ws() { while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos; }

  bool done() { skip_ws(); return pos >= text.size(); }

  std::string next() {
    skip_ws();
    if (pos >= text.size()) throw std::invalid_argument("expr parse: unexpected end of input");
    const char c = text[pos];
    if (c == '(' || c == ')') { ++pos; return std::string(1, c); }
    size_t start = pos;
    while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) &&
           text[pos] != '(' && text[pos] != ')')
      ++pos;
    return std::string(text.substr(start, pos - start));
  }
};

inline bool parse_index_atom(const std::string& tok, char prefix, int& index) {
  if (tok.size() < 2 || tok[0] != prefix) return false;
  for (size_t i = 1; i < tok.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(tok[i]))) return false;
  index = std::atoi(tok.c_str() + 1);
  return true;
}

inline bool parse_numeral(const std::string& tok, double& out) {
  char* end = nullptr;
  out = std::strtod(tok.c_str(), &end);
  return end == tok.c_str() + tok.size() && !tok.empty();
}

inline ExprKind op_from_name(const std::string& name) {
  static const std::pair<const char*, ExprKind> table[] = {
      {"+", ExprKind::add},       {"-", ExprKind::sub},
      {"*", ExprKind::mul},       {"/", ExprKind::div},
      {"neg", ExprKind::neg},     {"exp", ExprKind::exp_fn},
      {"log", ExprKind::log_fn},  {"sin", ExprKind::sin_fn},
      {"cos", ExprKind::cos_fn},  {"sqrt", ExprKind::sqrt_fn},
      {"pow", ExprKind::pow_const}, {"abs", ExprKind::abs_fn},
      {"max", ExprKind::max_fn},  {"min", ExprKind::min_fn},
      {"mid", ExprKind::mid_fn},
  };
  for (const auto& [n, k] : table)
    if (name == n) return k;
  throw std::invalid_argument("expr parse: unknown elemental '" + name + "'");
}

inline Expr parse_form(Tokenizer& tz);

inline Expr parse_atom_or_form(Tokenizer& tz, const std::string& tok) {
  if (tok == "(") return parse_form(tz);
  if (tok == ")") throw std::invalid_argument("expr parse: unexpected ')'");
  if (tok == "t") return Expr::time_var();
  int idx;
  if (parse_index_atom(tok, 'x', idx)) return Expr::state(idx);
  if (parse_index_atom(tok, 'u', idx)) return Expr::input(idx);
  if (parse_index_atom(tok, 'p', idx)) return Expr::param(idx);
  double num;
  if (parse_numeral(tok, num)) return Expr::constant(num);
  throw std::invalid_argument("expr parse: unrecognized atom '" + tok + "'");
}

inline Expr parse_form(Tokenizer& tz) {
  const std::string head = tz.next();
  if (head == "(" || head == ")")
    throw std::invalid_argument("expr parse: operator name expected after '('");
  Expr node;
  node.kind = op_from_name(head);
  const size_t arity = arity_of(node.kind);
  if (node.kind == ExprKind::pow_const) {
    node.children.push_back(parse_atom_or_form(tz, tz.next()));
    const std::string exp_tok = tz.next();
    double e;
    if (!parse_numeral(exp_tok, e))
      throw std::invalid_argument("expr parse: pow exponent must be a numeral, got '" + exp_tok + "'");
    node.number = e;
  } else {
    for (size_t i = 0; i < arity; ++i) node.children.push_back(parse_atom_or_form(tz, tz.next()));
  }
  const std::string close = tz.next();
  if (close != ")")
    throw std::invalid_argument("expr parse: expected ')' after (" + head + " ...), got '" + close + "'");
  return node;
}

}  // namespace detail

inline Expr parse_expr(std::string_view text) {
  detail::Tokenizer tz{text};
  Expr e = detail::parse_atom_or_form(tz, tz.next());
  if (!tz.done()) throw std::invalid_argument("expr parse: trailing input after expression");
  return e;
}

inline std::string to_string(const Expr& e) {
  switch (e.kind) {
    case ExprKind::constant: return detail::format_double(e.number);
    case ExprKind::state: return "x" + std::to_string(e.index);
    case ExprKind::input: return "u" + std::to_string(e.index);
    case ExprKind::param: return "p" + std::to_string(e.index);
    case ExprKind::time_var: return "t";
    default: break;
  }
  std::string out = "(";
  out += detail::op_name(e.kind);
  for (const Expr& c : e.children) {
    out += ' ';
    out += to_string(c);
  }
  if (e.kind == ExprKind::pow_const) {
    out += ' ';
    out += detail::format_double(e.number);
  }
  out += ')';
  return out;
}

}  // namespace lserc

#endif  // LSERC_EXPR_HPP
