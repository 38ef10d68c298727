#include "sgns/cli.hpp"

#include "sgns/error.hpp"
#include "sgns/euclidean.hpp"
#include "sgns/flow.hpp"
#include "sgns/optimize.hpp"
#include "sgns/parallel.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace sgns::cli {

using ojson = nlohmann::ordered_json;

std::string to_string(Command c) {
  switch (c) {
    case Command::Branch: return "branch";
    case Command::Flow: return "flow";
    case Command::Threshold: return "threshold";
    case Command::Euclidean: return "euclidean";
    case Command::Verify: return "verify";
  }
  return "?";
}

Command parse_command(std::string_view s) {
  for (Command c : {Command::Branch, Command::Flow, Command::Threshold, Command::Euclidean, Command::Verify})
    if (s == to_string(c)) return c;
  throw ParameterError("unknown command '" + std::string(s) + "'");
}

namespace {

struct HelpRequest {
  std::string text;
};

std::string spacing_name(Spacing s) { return s == Spacing::Log ? "log" : "linear"; }

Spacing parse_spacing(std::string_view s) {
  if (s == "linear") return Spacing::Linear;
  if (s == "log") return Spacing::Log;
  throw ParameterError("spacing must be 'linear' or 'log', got '" + std::string(s) + "'");
}

std::string format_name(Format f) { return f == Format::Json ? "json" : "csv"; }

Format parse_format(std::string_view s) {
  if (s == "csv") return Format::Csv;
  if (s == "json") return Format::Json;
  throw ParameterError("format must be 'csv' or 'json', got '" + std::string(s) + "'");
}

double parse_number(std::string_view s, const char* what) {
  const std::string str(s);
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(str, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != str.size()) throw ParameterError(std::string("cannot parse ") + what + " '" + str + "'");
  return v;
}

const std::vector<std::string> kSuites = {"carre-du-champ", "flow", "symmetry", "euclidean", "all"};

}  // namespace

std::vector<double> LambdaGrid::values() const {
  std::vector<double> v(count);
  for (int i = 0; i < count; ++i) {
    const double s = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    v[i] = spacing == Spacing::Log ? std::exp(std::log(start) + s * (std::log(stop) - std::log(start)))
                                   : start + s * (stop - start);
  }
  if (count > 1) v.back() = stop;
  return v;
}

LambdaGrid parse_lambda_grid(std::string_view s, Spacing spacing) {
  LambdaGrid g;
  g.spacing = spacing;
  const auto c1 = s.find(':');
  if (c1 == std::string_view::npos) {
    g.start = g.stop = parse_number(s, "lambda");
    g.count = 1;
    return g;
  }
  const auto c2 = s.find(':', c1 + 1);
  if (c2 == std::string_view::npos || s.find(':', c2 + 1) != std::string_view::npos)
    throw ParameterError("lambda grid must be 'value' or 'start:stop:count', got '" + std::string(s) + "'");
  g.start = parse_number(s.substr(0, c1), "lambda start");
  g.stop = parse_number(s.substr(c1 + 1, c2 - c1 - 1), "lambda stop");
  const double n = parse_number(s.substr(c2 + 1), "lambda count");
  if (n != std::floor(n) || n < 1 || n > 1e6) throw ParameterError("lambda count must be a positive integer");
  g.count = static_cast<int>(n);
  return g;
}

void validate(const RunConfig& cfg) {
  if (cfg.grid_N < 8) throw ParameterError("invariant violated: grid N >= 8");
  if (cfg.threads < 0) throw ParameterError("invariant violated: threads >= 0");
  const auto& lg = cfg.lambda;
  if (lg.count < 1) throw ParameterError("invariant violated: lambda count >= 1");
  if (lg.count > 1 && !(lg.stop > lg.start)) throw ParameterError("invariant violated: lambda stop > start");
  if (lg.spacing == Spacing::Log && !(lg.start > 0)) throw ParameterError("invariant violated: log spacing needs lambda > 0");
  auto check_family = [&](double lambda) { InequalityParams{cfg.family, cfg.d, cfg.p, cfg.theta, lambda}.validate(); };

  switch (cfg.command) {
    case Command::Branch:
    case Command::Threshold:
      if (cfg.command == Command::Threshold && !(cfg.tol > 0)) throw ParameterError("invariant violated: tol > 0");
      if (cfg.command == Command::Branch || cfg.lambda_given) {
        for (double l : lg.values()) check_family(l);
      } else {
        check_family(1.0);
      }
      if (cfg.command == Command::Threshold && cfg.lambda_given && lg.count < 2)
        throw ParameterError("invariant violated: threshold needs a lambda grid with at least 2 points");
      break;
    case Command::Flow: {
      flow_params(cfg.d, cfg.p, cfg.flow.m);
      if (!(cfg.flow.dt > 0) || !(cfg.flow.t_end >= cfg.flow.dt))
        throw ParameterError("invariant violated: 0 < dt <= t_end");
      if (!(std::abs(cfg.flow.amplitude) < 1)) throw ParameterError("invariant violated: |amplitude| < 1 keeps w0 positive");
      if (cfg.lambda_given) {
        if (lg.count != 1) throw ParameterError("flow takes a single lambda for the entropy deficit");
        check_family(lg.start);
      }
      break;
    }
    case Command::Euclidean:
      if (cfg.d < 1) throw ParameterError("invariant violated: d >= 1");
      if (!(cfg.p > 2) || !(cfg.p < critical_exponent(cfg.d)))
        throw ParameterError("invariant violated: 2 < p < 2d/(d-2)");
      if (!(cfg.theta >= 0 && cfg.theta <= 1)) throw ParameterError("invariant violated: theta in [0, 1]");
      break;
    case Command::Verify:
      if (std::find(kSuites.begin(), kSuites.end(), cfg.suite) == kSuites.end())
        throw ParameterError("unknown suite '" + cfg.suite + "'");
      check_family(1.0);
      flow_params(cfg.d, cfg.p, cfg.flow.m);
      break;
  }
}

ojson to_json(const RunConfig& cfg) {
  ojson j;
  j["command"] = to_string(cfg.command);
  j["family"] = to_string(cfg.family);
  j["d"] = cfg.d;
  j["p"] = cfg.p;
  j["theta"] = cfg.theta;
  if (cfg.lambda_given || cfg.command == Command::Branch)
    j["lambda"] = {{"start", cfg.lambda.start},
                   {"stop", cfg.lambda.stop},
                   {"count", cfg.lambda.count},
                   {"spacing", spacing_name(cfg.lambda.spacing)}};
  j["N"] = cfg.grid_N;
  j["flow"] = {{"m", cfg.flow.m}, {"t_end", cfg.flow.t_end}, {"dt", cfg.flow.dt}, {"amplitude", cfg.flow.amplitude}};
  j["output"] = cfg.output;
  j["format"] = format_name(cfg.format);
  j["seed"] = cfg.seed;
  j["tol"] = cfg.tol;
  j["suite"] = cfg.suite;
  j["threads"] = cfg.threads;
  return j;
}

RunConfig config_from_json(const nlohmann::json& j, RunConfig c) {
  if (!j.is_object()) throw ParameterError("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "command") c.command = parse_command(v.get<std::string>());
      else if (key == "family") c.family = parse_family(v.get<std::string>());
      else if (key == "d") c.d = v.get<int>();
      else if (key == "p") c.p = v.get<double>();
      else if (key == "theta") c.theta = v.get<double>();
      else if (key == "lambda") {
        if (v.is_string()) {
          c.lambda = parse_lambda_grid(v.get<std::string>(), c.lambda.spacing);
        } else if (v.is_number()) {
          c.lambda = parse_lambda_grid(std::to_string(v.get<double>()), c.lambda.spacing);
        } else {
          c.lambda.start = v.at("start").get<double>();
          c.lambda.stop = v.value("stop", c.lambda.start);
          c.lambda.count = v.value("count", 1);
          if (v.contains("spacing")) c.lambda.spacing = parse_spacing(v.at("spacing").get<std::string>());
        }
        c.lambda_given = true;
      } else if (key == "spacing") c.lambda.spacing = parse_spacing(v.get<std::string>());
      else if (key == "N") c.grid_N = v.get<int>();
      else if (key == "flow") {
        c.flow.m = v.value("m", c.flow.m);
        c.flow.t_end = v.value("t_end", c.flow.t_end);
        c.flow.dt = v.value("dt", c.flow.dt);
        c.flow.amplitude = v.value("amplitude", c.flow.amplitude);
      } else if (key == "output") c.output = v.get<std::string>();
      else if (key == "format") c.format = parse_format(v.get<std::string>());
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "tol") c.tol = v.get<double>();
      else if (key == "suite") c.suite = v.get<std::string>();
      else if (key == "threads") c.threads = v.get<int>();
      else throw ParameterError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("bad config value: ") + e.what());
  }
  return c;
}

RunConfig parse_args(const std::vector<std::string>& args) {
  RunConfig cfg;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    if (path.empty()) continue;
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ParameterError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    cfg = config_from_json(j, cfg);
  }

  CLI::App app{"Optimal constants, branches and entropy checks for interpolation inequalities on the sphere", "sphere-gns"};
  app.set_version_flag("--version", std::string(SGNS_VERSION));
  app.require_subcommand(1, 1);
  std::string family = to_string(cfg.family), lambda, spacing = spacing_name(cfg.lambda.spacing),
              format = format_name(cfg.format), config_path;
  std::optional<double> theta;

  const std::pair<Command, const char*> commands[] = {
      {Command::Branch, "minimise the family quotient along a lambda grid"},
      {Command::Flow, "evolve the nonlinear flow and record its monotone quantities"},
      {Command::Threshold, "locate the symmetry-breaking lambda by bisection"},
      {Command::Euclidean, "Euclidean ground state, optimal constants and large-lambda limit"},
      {Command::Verify, "run built-in consistency checks"}};
  std::vector<CLI::App*> subs;
  for (auto [c, help] : commands) {
    auto* sc = app.add_subcommand(to_string(c), help);
    sc->add_option("--config", config_path, "JSON file with default settings");
    sc->add_option("--family", family, "gns0, gns1 or gns2");
    sc->add_option("--d", cfg.d, "sphere dimension");
    sc->add_option("--p", cfg.p, "exponent p");
    sc->add_option("--theta", theta, "interpolation exponent");
    sc->add_option("--lambda", lambda, "value or start:stop:count");
    sc->add_option("--spacing", spacing, "lambda spacing: linear or log");
    sc->add_option("--N", cfg.grid_N, "quadrature nodes");
    sc->add_option("--m", cfg.flow.m, "diffusion exponent");
    sc->add_option("--t-end", cfg.flow.t_end, "final time");
    sc->add_option("--dt", cfg.flow.dt, "sampling interval");
    sc->add_option("--amplitude", cfg.flow.amplitude, "initial datum (1 + a z)^{1/beta}");
    sc->add_option("-o,--output", cfg.output, "output path (stdout if omitted)");
    sc->add_option("--format", format, "csv or json");
    sc->add_option("--seed", cfg.seed, "random seed");
    sc->add_option("--tol", cfg.tol, "threshold bracket width");
    sc->add_option("--suite", cfg.suite, "verify suite");
    sc->add_option("--threads", cfg.threads, "worker threads (0: SPHERE_GNS_THREADS or hardware)");
    subs.push_back(sc);
  }

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);  // CLI11 consumes a reversed vector
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() != 0) throw ParameterError(e.what());
    std::ostringstream os;
    app.exit(e, os, os);
    throw HelpRequest{os.str()};
  }

  for (auto* sc : subs)
    if (sc->parsed()) cfg.command = parse_command(sc->get_name());
  cfg.family = parse_family(family);
  cfg.format = parse_format(format);
  cfg.lambda.spacing = parse_spacing(spacing);
  if (!lambda.empty()) {
    cfg.lambda = parse_lambda_grid(lambda, cfg.lambda.spacing);
    cfg.lambda_given = true;
  }
  if (theta) cfg.theta = *theta;
  return cfg;
}

namespace {

struct Artifact {
  ojson meta;
  std::vector<std::string> columns;
  std::vector<ojson> rows;
};

std::string csv_cell(const ojson& v) {
  if (v.is_null()) return "nan";
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_float()) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
    return buf;
  }
  if (v.is_number()) return v.dump();
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"\n") != std::string::npos) {
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  }
  return s;
}

void write_artifact(const RunConfig& cfg, const Artifact& a, std::ostream& out) {
  std::ostringstream os;
  if (cfg.format == Format::Csv) {
    os << "# " << a.meta.dump() << "\n";
    for (std::size_t i = 0; i < a.columns.size(); ++i) os << (i ? "," : "") << a.columns[i];
    os << "\n";
    for (const auto& r : a.rows) {
      for (std::size_t i = 0; i < a.columns.size(); ++i) os << (i ? "," : "") << csv_cell(r.value(a.columns[i], ojson()));
      os << "\n";
    }
  } else {
    ojson j;
    j["meta"] = a.meta;
    j["rows"] = a.rows;
    os << j.dump(2) << "\n";
  }
  if (cfg.output.empty() || cfg.output == "-") {
    out << os.str() << std::flush;
    return;
  }
  std::ofstream f(cfg.output, std::ios::binary);
  if (!f) throw ParameterError("cannot write output file '" + cfg.output + "'");
  f << os.str();
  if (!f) throw NumericalError("failed writing '" + cfg.output + "'");
}

ojson base_meta(const RunConfig& cfg) {
  ojson m;
  m["program"] = "sphere-gns";
  m["version"] = SGNS_VERSION;
  m["seed"] = cfg.seed;
  m["config"] = to_json(cfg);
  return m;
}

MinOptions min_options(const RunConfig& cfg) {
  MinOptions o;
  o.seed = cfg.seed;
  o.threads = cfg.threads;
  return o;
}

int run_branch(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const auto g = make_grid(cfg.d, cfg.grid_N);
  const auto lambdas = cfg.lambda.values();
  const auto br = branch_sweep(cfg.family, cfg.d, cfg.p, cfg.theta, lambdas, g, min_options(cfg));
  Artifact a;
  a.meta = base_meta(cfg);
  a.columns = {"lambda", "mu", "symmetric", "mass", "kinetic", "el_residual", "ambiguous", "error"};
  int failed = 0;
  for (const auto& pt : br.points) {
    a.rows.push_back({{"lambda", pt.lambda}, {"mu", pt.mu}, {"symmetric", pt.symmetric}, {"mass", pt.mass},
                      {"kinetic", pt.kinetic}, {"el_residual", pt.el_residual}, {"ambiguous", pt.ambiguous},
                      {"error", pt.error}});
    if (!pt.error.empty()) {
      ++failed;
      log << "lambda=" << pt.lambda << ": " << pt.error << "\n";
    }
  }
  const auto violations = branch_violations(br);
  a.meta["violations"] = violations;
  for (const auto& v : violations) log << "branch invariant: " << v << "\n";
  write_artifact(cfg, a, out);
  return failed ? 2 : 0;
}

int run_threshold(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const auto g = make_grid(cfg.d, cfg.grid_N);
  const double bif = bifurcation_lambda(cfg.family, cfg.d, cfg.theta);
  if (!std::isfinite(bif)) throw ParameterError("no finite bifurcation point for theta = 0");
  LambdaGrid lg = cfg.lambda;
  if (!cfg.lambda_given) lg = {0.5 * bif, 2.0 * bif, 7, Spacing::Linear};
  const auto lambdas = lg.values();
  const auto opts = min_options(cfg);
  const auto br = branch_sweep(cfg.family, cfg.d, cfg.p, cfg.theta, lambdas, g, opts);
  const auto t = detect_threshold(br, g, cfg.tol, opts);
  Artifact a;
  a.meta = base_meta(cfg);
  a.meta["coarse_lambda"] = lambdas;
  a.columns = {"estimate", "lower", "upper", "evaluations", "bifurcation_lambda"};
  a.rows.push_back({{"estimate", t.estimate},
                    {"lower", t.lower},
                    {"upper", t.upper},
                    {"evaluations", t.evaluations},
                    {"bifurcation_lambda", bif}});
  write_artifact(cfg, a, out);
  return 0;
}

int run_flow(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const auto g = make_grid(cfg.d, cfg.grid_N);
  const auto fp = flow_params(cfg.d, cfg.p, cfg.flow.m);
  const double a0 = cfg.flow.amplitude;
  const auto w0 = ZonalFunction::sample(g, [&](double z) { return std::pow(1 + a0 * z, 1 / fp.beta); });
  std::optional<InequalityParams> ip;
  if (cfg.lambda_given) ip = InequalityParams{cfg.family, cfg.d, cfg.p, cfg.theta, cfg.lambda.start};
  const auto tr = evolve(g, fp, w0, cfg.flow.t_end, cfg.flow.dt, ip);

  Artifact a;
  a.meta = base_meta(cfg);
  a.meta["beta"] = fp.beta;
  a.meta["kappa"] = fp.kappa;
  a.columns = {"time", "mass", "dirichlet", "l2beta", "production"};
  std::optional<EntropyReport> rep;
  if (ip) {
    a.columns.insert(a.columns.end(), {"entropy", "entropy_rate", "entropy_bound"});
    if (tr.times.size() >= 5) rep = entropy_report(tr, *ip);
  }
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    ojson r{{"time", tr.times[i]},
            {"mass", tr.mass[i]},
            {"dirichlet", tr.dirichlet[i]},
            {"l2beta", tr.l2beta[i]},
            {"production", tr.production[i]}};
    if (ip) {
      r["entropy"] = tr.entropy[i];
      r["entropy_rate"] = rep ? rep->steps[i].rate : std::nan("");
      r["entropy_bound"] = rep ? rep->steps[i].bound : std::nan("");
    }
    a.rows.push_back(std::move(r));
  }
  if (rep) {
    a.meta["entropy"] = {{"bounds_hold", rep->bounds_hold},
                         {"monotone", rep->monotone},
                         {"terminal_deficit", rep->terminal_deficit}};
    if (!rep->bounds_hold) log << "entropy dissipation bound violated (max excess " << rep->max_excess << ")\n";
  }
  write_artifact(cfg, a, out);
  return 0;
}

int run_euclidean(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const auto v = ground_state(cfg.d, cfg.p);
  const auto c = gns_constants(cfg.d, cfg.p);
  Artifact a;
  a.meta = base_meta(cfg);
  a.columns = {"d", "p", "K_pd", "C_GNS", "theta_star", "u0", "el_residual", "theta", "gamma", "mu_infinity"};
  a.rows.push_back({{"d", cfg.d},
                    {"p", cfg.p},
                    {"K_pd", c.K_pd},
                    {"C_GNS", c.C_GNS},
                    {"theta_star", c.theta_star},
                    {"u0", v.values().front()},
                    {"el_residual", v.el_residual()},
                    {"theta", cfg.theta},
                    {"gamma", gamma_exponent(cfg.d, cfg.p, cfg.theta)},
                    {"mu_infinity", mu_infinity(cfg.d, cfg.p, cfg.theta)}});
  write_artifact(cfg, a, out);
  return 0;
}

// ---- verify suites ----

struct Check {
  std::string suite, name, status, detail;
  double value;
};

Check check(std::string suite, std::string name, bool ok, double value, std::string detail) {
  return {std::move(suite), std::move(name), ok ? "pass" : "fail", std::move(detail), value};
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

void suite_carre_du_champ(const RunConfig& cfg, std::vector<Check>& out) {
  const std::string s = "carre-du-champ";
  const int d = cfg.d;
  const double p = cfg.p;
  const auto win = m_range(d, p);
  out.push_back(check(s, "m-interval", win.lower > 0 && win.lower <= win.upper, win.upper - win.lower,
                      "m in [" + fmt(win.lower) + ", " + fmt(win.upper) + "]"));
  const double pole = 1 - 2 / p;
  double worst_disc = -INFINITY;
  for (int k = 0; k <= 40; ++k) {
    const double m = win.lower + (win.upper - win.lower) * k / 40.0;
    if (std::abs(m - pole) < 1e-9) continue;
    worst_disc = std::max(worst_disc, be_coeffs(flow_params(d, p, m)).discriminant);
  }
  out.push_back(check(s, "discriminant-negative", worst_disc < 0, worst_disc, "max b^2-ac over 41 points of the window"));

  const auto g = make_grid(d, std::max(cfg.grid_N, 64));
  std::mt19937_64 rng(cfg.seed);
  double worst_gap = INFINITY;
  for (double m : {win.lower, 0.5 * (win.lower + win.upper), win.upper}) {
    if (std::abs(m - pole) < 1e-9) continue;
    const auto fp = flow_params(d, p, m);
    for (int i = 0; i < 100; ++i) {
      const auto u = random_positive_zonal(g, rng);
      const double kin = grad_seminorm_sq(*g, u);
      worst_gap = std::min(worst_gap, (k_functional(*g, u, fp) - d * kin) / std::max(1.0, kin));
    }
  }
  out.push_back(check(s, "k-inequality", worst_gap >= -1e-9, worst_gap, "min (k[u] - d|grad u|^2) over 300 random u"));

  try {
    const auto roots = be_discriminant_roots(d, p);
    out.push_back({s, "discriminant-roots", "info",
                   "b^2-ac = 0 at m = " + fmt(roots.lower) + ", " + fmt(roots.upper), roots.upper - roots.lower});
    const auto v = find_be_violator(g, flow_params(d, p, roots.upper + 0.1));
    out.push_back({s, "violator-beyond-roots", "info",
                   std::string(v.found ? "found" : "not found") + " at m = " + fmt(roots.upper + 0.1), v.gap});
  } catch (const ParameterError& e) {
    out.push_back({s, "discriminant-roots", "info", e.what(), NAN});
  }
}

void suite_flow(const RunConfig& cfg, std::vector<Check>& out) {
  const std::string s = "flow";
  const auto g = make_grid(cfg.d, std::min(std::max(cfg.grid_N, 32), 96));
  const auto fp = flow_params(cfg.d, cfg.p, cfg.flow.m);
  const auto w0 = ZonalFunction::sample(g, [&](double z) { return std::pow(1 + 0.5 * z, 1 / fp.beta); });
  const double t_end = 0.5, dt = 2.5e-4;
  const auto tr = evolve(g, fp, w0, t_end, dt);
  const double drift = std::abs(tr.mass.back() - tr.mass.front()) / tr.mass.front() / t_end;
  out.push_back(check(s, "mass-conservation", drift < 1e-8, drift, "relative drift per unit time"));
  const auto rate = time_derivative(tr.times, tr.l2beta);
  double worst = 0;
  for (std::size_t i = 2; i + 2 < tr.times.size(); ++i) {
    const double expected = 2 * fp.beta * fp.beta * (fp.p - 2) * tr.production[i];
    worst = std::max(worst, std::abs(rate[i] - expected) / std::abs(expected));
  }
  out.push_back(check(s, "l2beta-identity", worst < 1e-5, worst, "max relative error of d/dt int w^{2beta}"));
  bool decreasing = true;
  for (std::size_t i = 1; i < tr.times.size(); ++i) decreasing = decreasing && tr.dirichlet[i] < tr.dirichlet[i - 1];
  out.push_back(check(s, "dirichlet-decreasing", decreasing, tr.dirichlet.back(), "int |grad w^beta|^2 at t_end"));

  const auto tr1 = evolve(g, fp, w0, fp.m, fp.m / 10);
  const auto rho = evolve_density(g, fp.m, ZonalFunction(g, w0.values().array().pow(fp.beta * fp.p)), 1.0);
  const double gap = (rho.values() - tr1.states.back().values().array().pow(fp.beta * fp.p).matrix()).cwiseAbs().maxCoeff();
  out.push_back(check(s, "density-consistency", gap < 1e-6, gap, "sup |rho(1) - w(m)^{beta p}|"));
}

void suite_symmetry(const RunConfig& cfg, std::vector<Check>& out) {
  const std::string s = "symmetry";
  const auto g = make_grid(cfg.d, cfg.grid_N);
  const double bif = bifurcation_lambda(cfg.family, cfg.d, cfg.theta);
  const auto opts = min_options(cfg);
  double lo = std::isfinite(bif) ? bif : 10.0;
  if (cfg.family == Family::GNS2) lo = cfg.d * (1 - (1 - cfg.theta) * cfg.p / 2);  // proven symmetric range
  if (lo > 0) {
    for (double f : {0.5, 0.9}) {
      const double lambda = f * lo;
      const auto r = minimize({cfg.family, cfg.d, cfg.p, cfg.theta, lambda}, g, Preset::Constant, opts);
      const double err = std::abs(r.mu - lambda) / lambda;
      out.push_back(check(s, "symmetric at lambda=" + fmt(lambda), r.symmetric && err < 1e-7, err, "|mu - lambda|/lambda"));
    }
  }
  if (std::isfinite(bif) && cfg.family != Family::GNS2) {
    const double lambda = 2 * bif;
    const auto r = minimize({cfg.family, cfg.d, cfg.p, cfg.theta, lambda}, g, Preset::Constant, opts);
    out.push_back(check(s, "broken at lambda=" + fmt(lambda), !r.symmetric && r.mu < lambda - 1e-6, lambda - r.mu,
                        "lambda - mu"));
  }
}

void suite_euclidean(const RunConfig& cfg, std::vector<Check>& out) {
  const std::string s = "euclidean";
  if (!(cfg.p < critical_exponent(cfg.d))) return;
  const auto v = ground_state(cfg.d, cfg.p);
  out.push_back(check(s, "ground-state-residual", v.el_residual() < 1e-7, v.el_residual(), "sup EL residual / u(0)"));
  const auto c = gns_constants(cfg.d, cfg.p);
  const double ts = c.theta_star;
  const double rel = std::abs(std::pow(ts, ts) * std::pow(1 - ts, 1 - ts) * c.K_pd / c.C_GNS - 1);
  out.push_back(check(s, "theta-star-relation", rel < 1e-10, rel, "relative error"));
  if (cfg.d >= 3) {
    const auto st = stereographic_check(cfg.d, v, cfg.p);
    const double worst = std::max(st.residual_dirichlet, st.residual_lq);
    out.push_back(check(s, "stereographic", worst < 1e-6, worst, "max relative residual"));
  }
}

int run_verify(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  std::vector<Check> checks;
  const bool all = cfg.suite == "all";
  if (all || cfg.suite == "carre-du-champ") suite_carre_du_champ(cfg, checks);
  if (all || cfg.suite == "flow") suite_flow(cfg, checks);
  if (all || cfg.suite == "symmetry") suite_symmetry(cfg, checks);
  if (all || cfg.suite == "euclidean") suite_euclidean(cfg, checks);
  Artifact a;
  a.meta = base_meta(cfg);
  a.columns = {"suite", "check", "status", "value", "detail"};
  int failed = 0;
  for (const auto& c : checks) {
    a.rows.push_back({{"suite", c.suite}, {"check", c.name}, {"status", c.status}, {"value", c.value}, {"detail", c.detail}});
    if (c.status == "fail") {
      ++failed;
      log << "FAIL " << c.suite << "/" << c.name << ": " << c.detail << " = " << c.value << "\n";
    }
  }
  a.meta["failed"] = failed;
  write_artifact(cfg, a, out);
  return failed ? 2 : 0;
}

}  // namespace

int run(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  validate(cfg);
  switch (cfg.command) {
    case Command::Branch: return run_branch(cfg, out, log);
    case Command::Flow: return run_flow(cfg, out, log);
    case Command::Threshold: return run_threshold(cfg, out, log);
    case Command::Euclidean: return run_euclidean(cfg, out, log);
    case Command::Verify: return run_verify(cfg, out, log);
  }
  return 1;
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return run(parse_args(args), out, err);
  } catch (const HelpRequest& h) {
    out << h.text;
    return 0;
  } catch (const ParameterError& e) {
    err << "parameter error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace sgns::cli
