#include "nsoc/experiment.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "nsoc/adjoint_optimizer.hpp"
#include "nsoc/errors.hpp"
#include "nsoc/sensitivity.hpp"
#include "nsoc/state_solver.hpp"
#include "nsoc/study.hpp"
#include "nsoc/verify.hpp"

namespace nsoc {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw ConfigError("empty value for '" + key + "'");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE || std::isnan(v)) {
    throw ConfigError("'" + key + "' expects a number, got '" + t + "'");
  }
  return v;
}

long parse_integer(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(t.c_str(), &end, 10);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE) {
    throw ConfigError("'" + key + "' expects an integer, got '" + t + "'");
  }
  return static_cast<long>(v);
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + t + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

// ---------------------------------------------------------------------------

void set_config_value(ExperimentConfig& cfg, const std::string& key_in, const std::string& value_in) {
  const std::string key = trim(key_in);
  const std::string value = trim(value_in);
  if (key == "command") {
    cfg.command = value;
  } else if (key == "study") {
    cfg.study = value;
  } else if (key == "dim") {
    cfg.dim = static_cast<int>(parse_integer(key, value));
  } else if (key == "n") {
    cfg.n = static_cast<int>(parse_integer(key, value));
  } else if (key == "alpha") {
    cfg.alpha = parse_real(key, value);
  } else if (key == "nu") {
    cfg.nu = parse_real(key, value);
  } else if (key == "tol") {
    cfg.tol = parse_real(key, value);
  } else if (key == "max_iter") {
    cfg.max_iter = parse_integer(key, value);
  } else if (key == "seed") {
    const long s = parse_integer(key, value);
    if (s < 0) throw ConfigError("'seed' must be nonnegative");
    cfg.seed = static_cast<std::uint64_t>(s);
  } else if (key == "method") {
    cfg.method = value;
  } else if (key == "eps_dead") {
    cfg.eps_dead = parse_real(key, value);
  } else if (key == "control") {
    cfg.control = value;
  } else if (key == "target") {
    cfg.target = value;
  } else if (key == "direction") {
    cfg.direction = value;
  } else if (key == "u0") {
    cfg.u0 = value;
  } else if (key == "lower") {
    cfg.lower = value;
  } else if (key == "upper") {
    cfg.upper = value;
  } else if (key == "taus") {
    cfg.taus.clear();
    for (const auto& item : split_list(value)) cfg.taus.push_back(parse_real(key, item));
  } else if (key == "ns") {
    cfg.ns.clear();
    for (const auto& item : split_list(value)) cfg.ns.push_back(static_cast<int>(parse_integer(key, item)));
  } else if (key == "samples") {
    cfg.samples = static_cast<int>(parse_integer(key, value));
  } else if (key == "zone") {
    cfg.zone = value;
  } else if (key == "quick") {
    cfg.quick = parse_bool(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

ExperimentConfig parse_config(std::istream& in, ExperimentConfig cfg) {
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      set_config_value(cfg, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path.string() + "'");
  return parse_config(in, std::move(base));
}

void validate_config(const ExperimentConfig& cfg) {
  const auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  static const std::vector<std::string> commands{"solve", "differentiate", "optimize", "verify", "study"};
  if (std::find(commands.begin(), commands.end(), cfg.command) == commands.end()) {
    fail("unknown command '" + cfg.command + "'");
  }
  if (cfg.command == "study" && cfg.study != "frechet" && cfg.study != "deadzone" && cfg.study != "convergence") {
    fail("study kind must be frechet, deadzone or convergence");
  }
  if (cfg.dim != 1 && cfg.dim != 2) fail("dim must be 1 or 2");
  if (cfg.n < 2) fail("n must be at least 2");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) fail("alpha must lie in (0, 1)");
  if (!(cfg.nu > 0.0) || !std::isfinite(cfg.nu)) fail("nu must be positive");
  if (!(cfg.tol > 0.0) || !std::isfinite(cfg.tol)) fail("tol must be positive");
  if (cfg.max_iter < 0) fail("max_iter must be nonnegative");
  if (cfg.samples < 0) fail("samples must be nonnegative");
  if (cfg.zone != "auto" && cfg.zone != "exact") fail("zone must be auto or exact");
  try {
    (void)parse_solve_method(cfg.method);
  } catch (const std::invalid_argument&) {
    fail("method must be accel_prox or coord_descent");
  }
  if (cfg.taus.empty()) fail("taus must not be empty");
  for (std::size_t i = 0; i < cfg.taus.size(); ++i) {
    if (!(cfg.taus[i] > 0.0)) fail("taus must be positive");
    if (i > 0 && !(cfg.taus[i] < cfg.taus[i - 1])) fail("taus must be strictly decreasing");
  }
  if (cfg.ns.size() < 2) fail("ns needs at least two resolutions");
  for (int n : cfg.ns) {
    if (n < 2) fail("ns entries must be at least 2");
  }
}

Field field_from_source(const std::string& source_in, const Grid& grid, double alpha, bool as_target) {
  const std::string source = trim(source_in);
  if (source == "sine") {
    return Field::from_function(grid, [&](double x, double y) {
      const double s = std::sin(std::numbers::pi * x);
      return grid.dim() == 2 ? s * std::sin(std::numbers::pi * y) : s;
    });
  }
  if (starts_with(source, "instance:")) {
    if (grid.dim() != 1) throw ConfigError("manufactured instances are one-dimensional");
    const std::string name = source.substr(9);
    if (name != "sine" && name != "plateau") throw ConfigError("unknown instance '" + name + "'");
    auto inst = manufactured_instance(name, grid, Exponent(alpha));
    return as_target ? inst.y_exact : inst.u;
  }
  if (starts_with(source, "file:")) {
    try {
      return read_field(source.substr(5), grid);
    } catch (const GridMismatch& e) {
      throw ConfigError(std::string("field file does not match the grid: ") + e.what());
    }
  }
  const std::string number = starts_with(source, "constant:") ? source.substr(9) : source;
  const double v = parse_real("field source", number);
  if (!std::isfinite(v)) throw ConfigError("field values must be finite");
  return Field::constant(grid, v);
}

// ---------------------------------------------------------------------------

void Report::add(const std::string& key, const std::string& value) { lines_.emplace_back(key, value); }
void Report::add(const std::string& key, double value) { add(key, format_real(value)); }
void Report::add(const std::string& key, long value) { add(key, std::to_string(value)); }
void Report::add(const std::string& key, bool pass) { add(key, std::string(pass ? "pass" : "fail")); }

std::optional<std::string> Report::find(const std::string& key) const {
  for (const auto& [k, v] : lines_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

void Report::write(std::ostream& out) const {
  for (const auto& [k, v] : lines_) out << k << ": " << v << '\n';
}

// ---------------------------------------------------------------------------

namespace {

struct Context {
  const ExperimentConfig& cfg;
  fs::path out;
  std::shared_ptr<const Discretization> disc;
  Exponent alpha;
  Report& report;

  [[nodiscard]] Field field(const std::string& source, bool as_target = false) const {
    return field_from_source(source, disc->grid(), alpha.value(), as_target);
  }
  void dump(const std::string& name, const Field& f) const { write_field((out / name).string(), f); }
  void table(const std::string& name, const StudyTable& t) const { t.write((out / name).string()); }
};

SolveOptions state_options(const ExperimentConfig& cfg) {
  SolveOptions o;
  o.method = parse_solve_method(cfg.method);
  o.tol = cfg.tol;
  return o;
}

std::vector<double> bound_values(const std::string& source, const Context& ctx) {
  const std::string s = trim(source);
  if (s == "inf" || s == "+inf" || s == "-inf") {
    const double v = s == "-inf" ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    return std::vector<double>(ctx.disc->grid().size(), v);
  }
  return ctx.field(s).vector();
}

void add_header(const Context& ctx) {
  const auto& c = ctx.cfg;
  ctx.report.add("command", c.command == "study" ? "study " + c.study : c.command);
  ctx.report.add("dim", static_cast<long>(c.dim));
  ctx.report.add("n", static_cast<long>(c.n));
  ctx.report.add("alpha", c.alpha);
  ctx.report.add("seed", static_cast<long>(c.seed));
}

ExitCode run_solve(const Context& ctx) {
  const Field u = ctx.field(ctx.cfg.control);
  const StateProblem problem(ctx.disc, ctx.alpha, u);
  const auto sol = solve_state(problem, state_options(ctx.cfg));
  const double eps = ctx.cfg.eps_dead < 0.0 ? default_dead_zone_eps(sol.y) : ctx.cfg.eps_dead;
  const auto zone = dead_zone(sol.y, *ctx.disc, eps);
  auto& r = ctx.report;
  r.add("method", std::string(to_string(sol.report.method)));
  r.add("tol", ctx.cfg.tol);
  r.add("iterations", sol.report.iterations);
  r.add("restarts", sol.report.restarts);
  r.add("energy", sol.report.energy);
  r.add("pde_residual", sol.report.residual);
  r.add("dead_zone_eps", eps);
  r.add("dead_zone_fraction", zone.fraction);
  r.add("dead_zone_count", static_cast<long>(zone.count));
  r.add("state_max_abs", sol.y.max_abs());
  r.add("state_h01_norm", ctx.disc->h01_norm(sol.y));
  r.add("control_hminus1_norm", ctx.disc->hminus1_norm(u));
  r.add("stability_bound", ctx.disc->h01_norm(sol.y) <= (1 + 1e-8) * ctx.disc->hminus1_norm(u));
  if (starts_with(trim(ctx.cfg.control), "instance:")) {
    const Field exact = ctx.field(ctx.cfg.control, true);
    r.add("error_linf", (sol.y - exact).max_abs());
  }
  ctx.dump("control.csv", u);
  ctx.dump("state.csv", sol.y);
  return ExitCode::ok;
}

ExitCode run_differentiate(const Context& ctx) {
  const Field u = ctx.field(ctx.cfg.control);
  const Field h = ctx.field(ctx.cfg.direction);
  const StateProblem problem(ctx.disc, ctx.alpha, u);
  SolveOptions o = state_options(ctx.cfg);
  o.tol = std::min(o.tol, kQuotientStateTol);
  const auto sol = solve_state(problem, o);
  const auto sys = build_sensitivity(ctx.disc, sol.y, ctx.alpha, ctx.cfg.eps_dead);
  const auto mh = ctx.disc->mass_times(h);
  const Field delta = sys.solve(mh);
  bool vanishes = true;
  for (std::size_t i = 0; i < delta.size(); ++i) vanishes = vanishes && (!sys.mask()[i] || delta[i] == 0.0);

  const double tau = ctx.cfg.taus.back();
  const Field quotient = difference_quotient(problem, sol.y, h, tau);
  const double dnorm = ctx.disc->h01_norm(delta);

  auto& r = ctx.report;
  r.add("pde_residual", sol.report.residual);
  r.add("dead_zone_eps", sys.eps_dead());
  r.add("dead_zone_fraction", sys.dead_zone().fraction);
  r.add("dead_zone_count", static_cast<long>(sys.dead_zone().count));
  r.add("sensitivity_relative_residual", sys.relative_residual(delta, mh));
  r.add("derivative_h01_norm", dnorm);
  r.add("direction_hminus1_norm", ctx.disc->hminus1_norm(h));
  r.add("derivative_bounded_by_direction", dnorm <= (1 + 1e-8) * ctx.disc->hminus1_norm(h));
  r.add("derivative_vanishes_on_dead_zone", vanishes);
  r.add("quotient_tau", tau);
  r.add("quotient_remainder_h01", ctx.disc->h01_norm(quotient - delta));
  ctx.dump("state.csv", sol.y);
  ctx.dump("derivative.csv", delta);
  ctx.dump("quotient.csv", quotient);
  return ExitCode::ok;
}

ExitCode run_optimize(const Context& ctx) {
  const auto& c = ctx.cfg;
  ControlProblem cp(ctx.disc, ctx.alpha, ctx.field(c.target, true), c.nu, bound_values(c.lower, ctx),
                    bound_values(c.upper, ctx));
  cp.eps_dead = c.eps_dead;
  const auto result = projected_gradient_solve(cp, ctx.field(c.u0), c.tol, c.max_iter);
  const auto rg = reduced_gradient(result.u, cp);
  const auto kkt = kkt_residual(result.u, cp, rg);
  const double gap = bouligand_gap(result.u, cp, c.samples, c.seed);

  const Field dJ = rg.y - cp.target;
  const double pmax = rg.p.max_abs();
  const std::vector<double> ks{0.0, 0.25 * pmax, 0.5 * pmax, pmax};
  const auto chain = stampacchia_truncation_check(rg.p, dJ, rg.sys, ks);

  long at_lower = 0, at_upper = 0;
  for (std::size_t i = 0; i < result.u.size(); ++i) {
    if (result.u[i] == cp.lower[i]) ++at_lower;
    if (result.u[i] == cp.upper[i]) ++at_upper;
  }

  auto& r = ctx.report;
  r.add("nu", c.nu);
  r.add("tol", c.tol);
  r.add("converged", std::string(result.converged ? "true" : "false"));
  r.add("iterations", result.history.iterations);
  r.add("objective", rg.objective);
  r.add("kkt_residual", kkt.residual);
  r.add("state_residual", kkt.state_residual);
  r.add("adjoint_residual", kkt.adjoint_residual);
  r.add("projection_residual", kkt.projection_residual);
  r.add("bouligand_samples", static_cast<long>(c.samples));
  r.add("bouligand_gap", gap);
  r.add("active_lower", at_lower);
  r.add("active_upper", at_upper);
  r.add("dead_zone_fraction", rg.sys.dead_zone().fraction);
  bool monotone = true;
  for (std::size_t i = 1; i < result.history.objective.size(); ++i) {
    monotone = monotone && result.history.objective[i] <= result.history.objective[i - 1];
  }
  r.add("objective_monotone", monotone);
  r.add("kkt_tolerance", kkt.residual <= c.tol);
  r.add("bouligand_condition", gap >= -10.0 * c.tol);
  r.add("truncation_chain", truncation_chain_holds(chain, 1e-10));

  ctx.dump("control.csv", result.u);
  ctx.dump("state.csv", rg.y);
  ctx.dump("adjoint.csv", rg.p);
  result.history.write((ctx.out / "history.csv").string());
  ctx.table("truncation.csv", chain);
  return result.converged ? ExitCode::ok : ExitCode::nonconvergence;
}

ExitCode run_verify(const Context& ctx) {
  SuiteOptions opts;
  opts.seed = ctx.cfg.seed;
  opts.quick = ctx.cfg.quick;
  bool all = true;
  long passed = 0;
  const auto results = run_property_suite(opts);
  for (const auto& res : results) {
    ctx.report.add(res.name, res.passed);
    all = all && res.passed;
    passed += res.passed ? 1 : 0;
  }
  for (const auto& res : results) ctx.report.add(res.name + "_detail", res.detail);
  ctx.report.add("passed", passed);
  ctx.report.add("total", static_cast<long>(results.size()));
  return all ? ExitCode::ok : ExitCode::verification;
}

ExitCode run_study_frechet(const Context& ctx) {
  const StateProblem problem(ctx.disc, ctx.alpha, ctx.field(ctx.cfg.control));
  auto table = frechet_remainder_study(problem, ctx.field(ctx.cfg.direction), ctx.cfg.taus, ctx.cfg.eps_dead);
  table.columns = {"tau", "remainder_h01"};
  const auto rcol = table.column(1);
  bool decreasing = true;
  for (std::size_t i = 1; i < rcol.size(); ++i) decreasing = decreasing && rcol[i] < rcol[i - 1];
  auto& r = ctx.report;
  r.add("remainder_first", rcol.front());
  r.add("remainder_last", rcol.back());
  r.add("remainder_ratio", rcol.front() > 0.0 ? rcol.back() / rcol.front() : 0.0);
  r.add("remainder_strictly_decreasing", decreasing);
  try {
    r.add("remainder_slope", loglog_slope(table));
  } catch (const std::invalid_argument&) {
    r.add("remainder_slope", std::string("undefined"));
  }
  ctx.table("frechet.csv", table);
  return ExitCode::ok;
}

ExitCode run_study_deadzone(const Context& ctx) {
  const auto& c = ctx.cfg;
  const StateProblem problem(ctx.disc, ctx.alpha, ctx.field(c.control));
  std::optional<std::vector<bool>> zone;
  if (c.zone == "exact") {
    if (trim(c.control) != "instance:plateau") throw ConfigError("zone = exact needs control = instance:plateau");
    std::vector<bool> z(ctx.disc->grid().size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = ctx.disc->grid().coord(i)[0] <= 0.5;
    zone = std::move(z);
  }
  auto study = dead_zone_decay_study(problem, ctx.field(c.direction), c.taus, zone);
  study.table.columns = {"tau", "quotient_norm_on_zone"};
  const double bound = 0.5 * (1.0 - c.alpha) / (1.0 + c.alpha);
  auto& r = ctx.report;
  r.add("zone", c.zone);
  r.add("empty_dead_zone", std::string(study.empty_dead_zone ? "true" : "false"));
  r.add("decay_slope", study.slope);
  r.add("required_slope", bound);
  r.add("decay_bound", !study.empty_dead_zone && study.slope >= bound);
  ctx.table("deadzone.csv", study.table);
  return ExitCode::ok;
}

ExitCode run_study_convergence(const Context& ctx) {
  const auto& c = ctx.cfg;
  const std::string source = trim(c.control);
  if (!starts_with(source, "instance:")) throw ConfigError("convergence study needs control = instance:<name>");
  if (c.dim != 1) throw ConfigError("convergence study is one-dimensional");
  StudyTable table;
  table.columns = {"h", "error_linf"};
  for (int n : c.ns) {
    const auto disc = Discretization::make(1, n);
    const auto inst = manufactured_instance(source.substr(9), disc->grid(), ctx.alpha);
    const auto sol = solve_state(StateProblem(disc, ctx.alpha, inst.u), state_options(c));
    table.add_row({disc->grid().spacing(), (sol.y - inst.y_exact).max_abs()});
  }
  ctx.report.add("instance", source.substr(9));
  ctx.report.add("fitted_order", loglog_slope(table));
  ctx.table("convergence.csv", table);
  return ExitCode::ok;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const fs::path& out_dir) {
  RunResult result;
  const auto write_report = [&] {
    std::ofstream f(out_dir / "report.txt");
    if (!f) throw IoError("cannot write report to '" + out_dir.string() + "'");
    result.report.write(f);
  };
  try {
    validate_config(cfg);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) throw IoError("cannot create output directory '" + out_dir.string() + "'");

    const Context ctx{cfg, out_dir, Discretization::make(cfg.dim, cfg.n), Exponent(cfg.alpha), result.report};
    add_header(ctx);
    if (cfg.command == "solve") {
      result.code = run_solve(ctx);
    } else if (cfg.command == "differentiate") {
      result.code = run_differentiate(ctx);
    } else if (cfg.command == "optimize") {
      result.code = run_optimize(ctx);
    } else if (cfg.command == "verify") {
      result.code = run_verify(ctx);
    } else if (cfg.study == "frechet") {
      result.code = run_study_frechet(ctx);
    } else if (cfg.study == "deadzone") {
      result.code = run_study_deadzone(ctx);
    } else {
      result.code = run_study_convergence(ctx);
    }
    result.report.add("status", std::string(result.code == ExitCode::ok ? "ok" : "failed"));
    write_report();
    if (result.code == ExitCode::nonconvergence) result.message = "optimizer stopped before reaching tol";
    if (result.code == ExitCode::verification) result.message = "one or more properties failed";
  } catch (const ConfigError& e) {
    result.code = ExitCode::config;
    result.message = std::string("config error: ") + e.what();
  } catch (const IoError& e) {
    result.code = ExitCode::io;
    result.message = std::string("i/o error: ") + e.what();
  } catch (const ConvergenceError& e) {
    result.code = ExitCode::nonconvergence;
    result.message = std::string("no convergence: ") + e.what() + " (iterations " + std::to_string(e.iterations()) +
                     ", residual " + format_real(e.residual()) + ")";
  } catch (const std::exception& e) {
    result.code = ExitCode::failure;
    result.message = std::string("error: ") + e.what();
  }
  return result;
}

}  // namespace nsoc
