// Command-line front end: model ingestion, L-SERC analysis runs, trajectory
// and report emission.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lserc/lserc.hpp"

namespace {

constexpr int kExitNatural = 0;
constexpr int kExitError = 1;
constexpr int kExitPartial = 2;
constexpr int kExitNoFullRank = 3;
constexpr int kExitUsage = 64;
constexpr int kExitModel = 65;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_csv_reals(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || end != item.c_str() + item.size())
      throw UsageError("not a real number: '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("empty list of reals");
  return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& vals) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
  for (size_t i = 0; i < vals.size(); ++i) v[static_cast<Eigen::Index>(i)] = vals[i];
  return v;
}

std::string fmt_vector(const Eigen::VectorXd& v) {
  std::string out = "[";
  for (int i = 0; i < v.size(); ++i)
    out += (i ? "," : "") + lserc::detail::format_double(v[i]);
  return out + "]";
}

lserc::ModelSpec load_model(const std::string& source) {
  for (const std::string& name : lserc::builtin_names())
    if (name == source) return lserc::builtin_model(name);
  std::ifstream in(source);
  if (!in) throw std::invalid_argument("cannot open model document '" + source + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return lserc::parse_model(buffer.str());
}

lserc::SensMode parse_mode(const std::string& mode) {
  if (mode == "identifiability") return lserc::SensMode::identifiability;
  if (mode == "observability") return lserc::SensMode::observability;
  throw UsageError("mode must be identifiability or observability");
}

void print_probe_line(std::ostream& os, const lserc::ProbeResult& p) {
  os << (p.stage == lserc::Stage::twin ? "S2: d~=" : "S1: d =") << fmt_vector(p.d);
  if (!p.ok()) {
    os << "  error: " << p.error << "\n";
    return;
  }
  os << "  rank(Y_d)=" << p.rank << (p.rank == p.n_p ? " = " : " < ") << "n_p=" << p.n_p
     << "  [" << (p.verdict == lserc::Verdict::full_rank ? "full_rank" : "deficient") << "]\n";
}

void print_report(std::ostream& os, const lserc::AlgoReport& rep, int depth = 0) {
  if (depth > 0)
    os << "--- theta*=" << fmt_vector(rep.theta_star) << " (depth " << depth << ") ---\n";
  for (const auto& p : rep.probes) print_probe_line(os, p);
  for (const auto& s : rep.zero_space) {
    os << "S3: SVD(Y_d), d=" << fmt_vector(s.d) << "  zero sigma indices {";
    for (size_t i = 0; i < s.zero_indices.size(); ++i)
      os << (i ? "," : "") << s.zero_indices[i];
    os << "}  delta=" << fmt_vector(s.delta_theta);
    if (s.theta_plus.size() > 0)
      os << "  -> theta* in {" << fmt_vector(s.theta_plus) << ", "
         << fmt_vector(s.theta_minus) << "}";
    os << "\n";
  }
  os << "summary: " << lserc::summary_name(rep.summary, rep.mode) << "\n";
  if (rep.summary == lserc::SummaryVerdict::natural)
    os << "caveat: natural full-rank probes do not imply structural identifiability\n";
  for (const auto& child : rep.children) print_report(os, child, depth + 1);
}

int run_analyze(const std::string& model_source, const std::string& mode_text,
                const std::vector<std::string>& direction_texts, double twin, double sing,
                int q, const std::string& samples_text, double step, double rank_tol,
                const std::string& report_path, bool emit_json) {
  lserc::ModelSpec spec;
  try {
    spec = load_model(model_source);
  } catch (const std::exception& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return kExitModel;
  }

  lserc::AlgoConfig cfg;
  cfg.mode = parse_mode(mode_text);
  if (cfg.mode == lserc::SensMode::observability && !spec.observability_ready()) {
    std::cerr << "model error: observability mode needs n_p == n_x and f0 equal to the parameters\n";
    return kExitModel;
  }
  cfg.eps_twin = twin;
  cfg.eps_sing = sing;
  cfg.q = q;
  cfg.step = step;
  cfg.rank.rank_tol = rank_tol;
  if (!samples_text.empty()) cfg.sample_times = parse_csv_reals(samples_text);
  for (const std::string& text : direction_texts) {
    const Eigen::VectorXd d = to_vector(parse_csv_reals(text));
    if (d.size() != spec.n_p)
      throw UsageError("direction " + text + " has " + std::to_string(d.size()) +
                       " entries; the model has n_p=" + std::to_string(spec.n_p));
    cfg.directions.push_back(d);
  }

  lserc::AlgoReport report;
  try {
    report = lserc::algorithm1(spec, cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }

  print_report(std::cout, report);
  const auto json = lserc::report_to_json(report);
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    if (!out) {
      std::cerr << "error: cannot write report to '" << report_path << "'\n";
      return kExitError;
    }
    out << json.dump(2) << "\n";
  }
  if (emit_json) std::cout << json.dump(2) << "\n";

  bool all_failed = !report.probes.empty();
  for (const auto& p : report.probes) all_failed = all_failed && !p.ok();
  if (all_failed) {
    std::cerr << "error: every probe failed; see the report for diagnostics\n";
    return kExitError;
  }
  switch (report.summary) {
    case lserc::SummaryVerdict::natural: return kExitNatural;
    case lserc::SummaryVerdict::partial: return kExitPartial;
    case lserc::SummaryVerdict::none: return kExitNoFullRank;
  }
  return kExitError;
}

int run_trajectories(const std::string& model_source, const std::string& mode_text,
                     const std::string& direction_text, double step,
                     const std::string& csv_path, std::optional<double> t0_override,
                     std::optional<double> tf_override) {
  lserc::ModelSpec spec;
  try {
    spec = load_model(model_source);
  } catch (const std::exception& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return kExitModel;
  }
  const lserc::SensMode mode = parse_mode(mode_text);
  if (mode == lserc::SensMode::observability && !spec.observability_ready()) {
    std::cerr << "model error: observability mode needs n_p == n_x and f0 equal to the parameters\n";
    return kExitModel;
  }
  if (t0_override) spec.t0 = *t0_override;
  if (tf_override) spec.tf = *tf_override;
  if (spec.tf < spec.t0) throw UsageError("tf must not precede t0");

  Eigen::VectorXd d;
  if (direction_text.empty()) {
    d = Eigen::VectorXd::Zero(spec.n_p);
    d[0] = 1.0;
  } else {
    d = to_vector(parse_csv_reals(direction_text));
    if (d.size() != spec.n_p)
      throw UsageError("direction has " + std::to_string(d.size()) +
                       " entries; the model has n_p=" + std::to_string(spec.n_p));
  }

  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!csv_path.empty()) {
    file.open(csv_path);
    if (!file) {
      std::cerr << "error: cannot write CSV to '" << csv_path << "'\n";
      return kExitError;
    }
    os = &file;
  }

  if (spec.tf == spec.t0) {
    lserc::write_trajectory_csv_header(*os, spec);
    return 0;
  }
  try {
    const lserc::Grid grid = lserc::Grid::make(spec.t0, spec.tf, step, std::vector<double>{});
    const auto traj = lserc::integrate_sensitivity(spec, grid, d, mode);
    lserc::write_trajectory_csv(*os, traj);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return 0;
}

int run_taylor_check(const std::string& expr_text, const std::string& at_text,
                     const std::string& direction_text, const std::string& scales_text,
                     double factor) {
  const Eigen::VectorXd x0 = to_vector(parse_csv_reals(at_text));
  const int n = static_cast<int>(x0.size());

  Eigen::VectorXd d;
  if (direction_text.empty()) {
    d = Eigen::VectorXd::Zero(n);
    d[0] = 1.0;
  } else {
    d = to_vector(parse_csv_reals(direction_text));
    if (d.size() != n) throw UsageError("direction and point have different dimensions");
  }

  std::vector<double> scales{1e-1, 1e-2, 1e-3, 1e-4, 1e-5};
  if (!scales_text.empty()) scales = parse_csv_reals(scales_text);
  if (scales.size() < 3) throw UsageError("need at least 3 scales for a decay profile");

  std::vector<double> profile;
  try {
    const lserc::ExprFunction fn = lserc::ExprFunction::parse({expr_text}, n);
    profile = lserc::taylor_residual_profile(fn, x0, d, scales);
  } catch (const std::invalid_argument& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return kExitModel;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }

  std::printf("%-12s %-22s\n", "alpha", "residual/alpha");
  for (size_t i = 0; i < scales.size(); ++i)
    std::printf("%-12g %-22.16g\n", scales[i], profile[i]);

  bool pass = true;
  for (size_t i = 1; i < profile.size(); ++i) {
    const bool decayed = profile[i] <= factor * profile[i - 1] || profile[i] <= 1e-12;
    pass = pass && decayed;
  }
  std::printf("%s\n", pass ? "PASS" : "FAIL");
  return pass ? 0 : kExitError;
}

int run_list_models(bool emit_json) {
  if (emit_json) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const std::string& name : lserc::builtin_names())
      arr.push_back(lserc::serialize_model(lserc::builtin_model(name)));
    std::cout << arr.dump(2) << "\n";
    return 0;
  }
  std::printf("%-12s %-4s %-4s %-4s %-4s %s\n", "name", "n_x", "n_u", "n_p", "n_y", "theta*");
  for (const std::string& name : lserc::builtin_names()) {
    const lserc::ModelSpec spec = lserc::builtin_model(name);
    std::printf("%-12s %-4d %-4d %-4d %-4d %s\n", spec.name.c_str(), spec.n_x, spec.n_u,
                spec.n_p, spec.n_y, fmt_vector(spec.theta_star).c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"L-SERC identifiability and observability tests for nonsmooth input-output models"};
  app.require_subcommand(1);

  auto* analyze = app.add_subcommand("analyze", "Run the three-stage L-SERC analysis");
  std::string model, mode = "identifiability", samples, report_path;
  std::vector<std::string> directions;
  double twin = 0.0, sing = 0.0, step = 1e-3, rank_tol = 1e-6;
  int q = 0;
  bool emit_json = false;
  analyze->add_option("--model", model, "builtin name or model document path")->required();
  analyze->add_option("--mode", mode, "identifiability|observability");
  analyze->add_option("--direction", directions,
                      "primary probing direction as csv reals (repeatable; default +-e_i)");
  analyze->add_option("--twin", twin, "twin stage perturbation (0 disables)");
  analyze->add_option("--sing", sing, "singularity stage perturbation (0 disables)");
  analyze->add_option("--q", q, "singularity recursion depth");
  analyze->add_option("--samples", samples, "sample times as csv reals");
  analyze->add_option("--step", step, "RK4 step size");
  analyze->add_option("--rank-tol", rank_tol, "relative singular value cutoff");
  analyze->add_option("--report", report_path, "write the JSON report here");
  analyze->add_flag("--json", emit_json, "print the JSON report to stdout");

  auto* traj = app.add_subcommand("trajectories", "Integrate and export one trajectory as CSV");
  std::string t_model, t_mode = "identifiability", t_direction, t_csv;
  double t_step = 1e-3;
  std::optional<double> t_t0, t_tf;
  traj->add_option("--model", t_model, "builtin name or model document path")->required();
  traj->add_option("--mode", t_mode, "identifiability|observability");
  traj->add_option("--direction", t_direction, "probing direction as csv reals (default e_1)");
  traj->add_option("--step", t_step, "RK4 step size");
  traj->add_option("--csv", t_csv, "output path (default stdout)");
  traj->add_option("--t0", t_t0, "override the horizon start");
  traj->add_option("--tf", t_tf, "override the horizon end");

  auto* taylor =
      app.add_subcommand("taylor-check", "Residual decay profile of the first-order approximant");
  std::string expr, at, c_direction, scales_text;
  double factor = 0.2;
  taylor->add_option("--expr", expr, "expression over x<i> atoms")->required();
  taylor->add_option("--at", at, "expansion point as csv reals")->required();
  taylor->add_option("--direction", c_direction, "ray direction as csv reals (default e_1)");
  taylor->add_option("--scales", scales_text,
                     "decreasing positive scales (default decades 1e-1..1e-5)");
  taylor->add_option("--factor", factor, "required per-step decay factor");

  auto* list = app.add_subcommand("list-models", "Print the built-in model catalog");
  bool list_json = false;
  list->add_flag("--json", list_json, "machine-readable listing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (analyze->parsed())
      return run_analyze(model, mode, directions, twin, sing, q, samples, step, rank_tol,
                         report_path, emit_json);
    if (traj->parsed())
      return run_trajectories(t_model, t_mode, t_direction, t_step, t_csv, t_t0, t_tf);
    if (taylor->parsed()) return run_taylor_check(expr, at, c_direction, scales_text, factor);
    if (list->parsed()) return run_list_models(list_json);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitUsage;
}
