#include "invpricing/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "invpricing/config.hpp"
#include "invpricing/errors.hpp"

namespace invpricing {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

// Every double in a summary goes through here: 12 significant digits, and
// non-finite values become null.
Json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::strtod(buf, nullptr);
}

Json nums(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

struct Summary {
  double gamma = NAN, s = NAN, S = NAN, z_star = NAN, residual_max = NAN, z_max_used = NAN;
  std::vector<double> breakpoints;
  Json checks = Json::object();

  Json to_json() const {
    return Json{{"gamma", num(gamma)},       {"s", num(s)},
                {"S", num(S)},               {"z_star", num(z_star)},
                {"residual_max", num(residual_max)}, {"z_max_used", num(z_max_used)},
                {"breakpoints", nums(breakpoints)},  {"checks", checks}};
  }
};

Summary from_solution(const ModelParams& params, const WSolution& sol) {
  Summary sm;
  sm.gamma = sol.gamma;
  sm.s = sol.s;
  sm.S = sol.S;
  sm.z_star = sol.z_star;
  sm.residual_max = sol.residual_max;
  sm.z_max_used = sol.z_max_used;
  sm.breakpoints = price_profile(params, sol).breakpoints;
  return sm;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path.string() + "'");
  f << text;
}

void write_summary(const fs::path& path, const Summary& sm) { write_text(path, sm.to_json().dump(2) + "\n"); }

struct Context {
  RunConfig cfg;
  fs::path out_dir;
  std::ostream& out;
  std::ostream& err;
  std::optional<WSolution> solution;

  const WSolution& solve() {
    if (!solution) solution = solve_optimal(cfg.model, cfg.solver);
    return *solution;
  }
};

int cmd_solve(Context& cx) {
  const WSolution& sol = cx.solve();
  const ModelParams& p = cx.cfg.model;
  Summary sm = from_solution(p, sol);
  const WFragment& f = sol.fragment;
  sm.checks["w_s_minus_k"] = num(f.value(sol.s) - p.k);
  sm.checks["w_S_minus_k"] = num(f.value(sol.S) - p.k);
  sm.checks["area_minus_K"] = num(band_area(f, sol.s, sol.S, p.k) - p.K);
  sm.checks["residual_ok"] = sol.residual_max <= cx.cfg.solver.residual_tol;
  sm.checks["z_star_nonpositive"] = sol.z_star <= 0.0;
  sm.checks["residual_nodes_skipped"] = sol.diagnostics.residual_nodes_skipped;
  sm.checks["area_evaluations"] = sol.diagnostics.area_evaluations;
  sm.checks["area_monotone"] = sol.diagnostics.area_monotone;
  sm.checks["z_max_history"] = nums(sol.diagnostics.z_max_history);
  sm.checks["gamma_history"] = nums(sol.diagnostics.gamma_history);
  sm.checks["warnings"] = p.warnings();
  write_summary(cx.out_dir / "summary.json", sm);

  std::ostringstream curves;
  write_curves(curves, p, build_value_function(sol));
  write_text(cx.out_dir / "curves.csv", curves.str());
  cx.out << sm.to_json().dump(2) << '\n';
  return kExitOk;
}

int cmd_evaluate(Context& cx, double s, double S) {
  const ModelParams& p = cx.cfg.model;
  const GivenBandResult g = solve_given_band(p, s, S, cx.cfg.solver);
  WSolution ws;
  ws.fragment = g.fragment;
  ws.gamma = g.gamma;
  ws.s = s;
  ws.S = S;
  ws.unit_cost = p.k;
  ws.z_max_used = g.z_max_used;
  double best = -INFINITY;
  for (std::size_t i = 0; i < g.fragment.size(); ++i) {
    const double z = g.fragment.z(i);
    if (z >= s && z <= S && g.fragment.w[i] > best) best = g.fragment.w[i], ws.z_star = z;
  }
  for (double r : ode_residuals(p, g.fragment))
    if (!std::isnan(r)) ws.residual_max = std::max(ws.residual_max, std::abs(r));
  Summary sm = from_solution(p, ws);
  sm.checks["area_minus_K"] = num(band_area(g.fragment, s, S, p.k) - p.K);
  sm.checks["z_max_history"] = nums(g.diagnostics.z_max_history);
  sm.checks["gamma_history"] = nums(g.diagnostics.gamma_history);
  write_summary(cx.out_dir / "evaluate.json", sm);
  cx.out << sm.to_json().dump(2) << '\n';
  return kExitOk;
}

struct ResolvedPolicy {
  std::optional<Policy> policy;
  Summary base;  // solution values the policy came from, if any
};

ResolvedPolicy resolve_policy(Context& cx, const std::string& spec, std::optional<double> s, std::optional<double> S) {
  const ModelParams& p = cx.cfg.model;
  ResolvedPolicy out;
  const auto band = [&](double s0, double S0) { return std::pair{s ? *s : s0, S ? *S : S0}; };
  if (spec == "optimal") {
    const WSolution& sol = cx.solve();
    out.base = from_solution(p, sol);
    const auto [bs, bS] = band(sol.s, sol.S);
    out.policy = Policy::from_solution(p, sol).with_band(bs, bS);
  } else if (spec.rfind("constant:", 0) == 0) {
    double price;
    try {
      std::size_t used = 0;
      price = std::stod(spec.substr(9), &used);
      if (used != spec.size() - 9) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigInvalid("--policy constant:<price> needs a number, got '" + spec + "'");
    }
    double s0, S0;
    if (s && S) {
      s0 = *s, S0 = *S;
    } else {
      const WSolution& sol = cx.solve();
      out.base = from_solution(p, sol);
      s0 = sol.s, S0 = sol.S;
    }
    const auto [bs, bS] = band(s0, S0);
    out.policy = Policy::constant_price(p.demand, bs, bS, price);
  } else {
    const fs::path summary_path(spec);
    std::ifstream in(summary_path);
    if (!in) throw ConfigInvalid("--policy: cannot open '" + spec + "'");
    Json j;
    try {
      j = Json::parse(in);
    } catch (const std::exception& e) {
      throw ConfigInvalid("--policy: '" + spec + "' is not JSON: " + e.what());
    }
    if (!j.contains("s") || !j.contains("S") || !j["s"].is_number() || !j["S"].is_number())
      throw ConfigInvalid("--policy: summary lacks numeric s and S");
    const fs::path curves_path = summary_path.parent_path() / "curves.csv";
    std::ifstream cin(curves_path);
    if (!cin) throw ConfigInvalid("--policy: missing '" + curves_path.string() + "'");
    CurveTable t = read_curves(cin);
    const auto [bs, bS] = band(j["s"].get<double>(), j["S"].get<double>());
    out.base.gamma = j.value("gamma", Json(nullptr)).is_number() ? j["gamma"].get<double>() : NAN;
    out.policy = Policy::from_table(p.demand, bs, bS, std::move(t.z), std::move(t.w));
  }
  return out;
}

int cmd_simulate(Context& cx, const std::string& policy_spec, std::optional<double> s, std::optional<double> S,
                 bool dump) {
  ResolvedPolicy rp = resolve_policy(cx, policy_spec, s, S);
  const Policy& pol = *rp.policy;
  SimConfig sc = cx.cfg.sim;
  std::ofstream traj;
  if (dump) {
    traj.open(cx.out_dir / "trajectory.csv", std::ios::binary);
    if (!traj) throw Error("cannot write trajectory.csv");
    sc.trajectory = &traj;
  }
  const SimResult r = simulate(cx.cfg.model, pol, sc);
  Summary sm = rp.base;
  const double gamma_star = rp.base.gamma;
  sm.gamma = r.avg_profit;
  sm.s = pol.s();
  sm.S = pol.S();
  sm.checks["policy"] = policy_spec;
  sm.checks["gamma_star"] = num(gamma_star);
  sm.checks["stderr"] = num(r.stderr_);
  sm.checks["ci95_lo"] = num(r.avg_profit - 1.96 * r.stderr_);
  sm.checks["ci95_hi"] = num(r.avg_profit + 1.96 * r.stderr_);
  sm.checks["revenue_rate"] = num(r.revenue_rate);
  sm.checks["holding_rate"] = num(r.holding_rate);
  sm.checks["ordering_rate"] = num(r.ordering_rate);
  sm.checks["order_count_rate"] = num(r.order_count_rate);
  sm.checks["min_level_observed"] = num(r.min_level_observed);
  sm.checks["price_clamps"] = r.price_clamps;
  sm.checks["replications"] = sc.replications;
  sm.checks["seed"] = sc.seed;
  sm.checks["T"] = num(sc.T);
  sm.checks["dt"] = num(sc.dt);
  sm.checks["burn_in"] = num(sc.burn_in);
  if (std::isfinite(gamma_star)) {
    const bool in_ci = std::abs(r.avg_profit - gamma_star) <= 1.96 * r.stderr_;
    sm.checks["ci95_contains_gamma_star"] = in_ci;
    sm.checks["not_above_gamma_star"] = r.avg_profit <= gamma_star + 3.0 * r.stderr_;
  }
  write_summary(cx.out_dir / "simulate.json", sm);
  cx.out << sm.to_json().dump(2) << '\n';
  return kExitOk;
}

Json oracle_checks(const OracleSolution& o, const ComparisonReport& c, const WSolution& sol) {
  return Json{{"gamma_star", num(sol.gamma)},
              {"s_star", num(sol.s)},
              {"S_star", num(sol.S)},
              {"z_star_solver", num(sol.z_star)},
              {"delta", num(c.delta)},
              {"gamma_lo", num(o.gamma_lo)},
              {"gamma_hi", num(o.gamma_hi)},
              {"iterations", o.iterations},
              {"gamma_rel", num(c.gamma_rel)},
              {"s_abs", num(c.s_abs)},
              {"S_abs", num(c.S_abs)},
              {"z_star_abs", num(c.z_star_abs)},
              {"price_sup", num(c.price_sup)},
              {"boundary_mass", num(c.boundary_mass)},
              {"order_downset", o.order_downset},
              {"common_target", o.common_target},
              {"gamma_ok", c.gamma_ok},
              {"levels_ok", c.levels_ok},
              {"z_star_ok", c.z_star_ok},
              {"boundary_ok", c.boundary_ok}};
}

int cmd_oracle(Context& cx) {
  const WSolution& sol = cx.solve();
  const OracleSolution o = solve_average_reward(build_chain(cx.cfg.model, cx.cfg.chain), cx.cfg.oracle);
  const ComparisonReport c = compare(cx.cfg.model, sol, o, cx.cfg.chain.delta);
  Summary sm;
  sm.gamma = o.gamma;
  sm.s = o.s_hat;
  sm.S = o.S_hat;
  sm.z_star = o.z_price_max;
  sm.z_max_used = cx.cfg.chain.z_hi;
  sm.checks = oracle_checks(o, c, sol);
  write_summary(cx.out_dir / "oracle.json", sm);
  cx.out << sm.to_json().dump(2) << '\n';
  if (!c.ok()) {
    cx.err << "oracle disagrees with the solver beyond tolerance\n";
    return kExitVerification;
  }
  return kExitOk;
}

Json verification_checks(const VerificationReport& r) {
  return Json{{"generator_max", num(r.generator_max)},
              {"generator_arg_z", num(r.generator_arg_z)},
              {"generator_arg_p", num(r.generator_arg_p)},
              {"below_band_max", num(r.below_band_max)},
              {"band_interior_max_abs", num(r.band_interior_max_abs)},
              {"generator_nodes", r.generator_nodes},
              {"generator_nodes_skipped", r.generator_nodes_skipped},
              {"slope_excess_max", num(r.slope_excess_max)},
              {"slope_excess_arg_z", num(r.slope_excess_arg_z)},
              {"growth_exponent_fit", num(r.growth_exponent_fit)},
              {"growth_exponent_limit", num(r.growth_exponent_limit)},
              {"pair_checks", r.pair_checks},
              {"pair_failures", r.pair_failures},
              {"pair_worst_margin", num(r.pair_worst_margin)},
              {"generator_ok", r.generator_ok},
              {"slope_ok", r.slope_ok},
              {"growth_ok", r.growth_ok},
              {"pairs_ok", r.pairs_ok},
              {"passed", r.passed()}};
}

int cmd_verify(Context& cx) {
  const WSolution& sol = cx.solve();
  const VerificationReport r = check_upper_bound(cx.cfg.model, build_value_function(sol), sol.gamma, cx.cfg.verify);
  Summary sm = from_solution(cx.cfg.model, sol);
  sm.checks = verification_checks(r);
  write_summary(cx.out_dir / "verify.json", sm);
  cx.out << r.summary();
  if (!r.passed()) {
    cx.err << "verification failed\n" << r.summary();
    return kExitVerification;
  }
  return kExitOk;
}

int cmd_report(Context& cx) {
  const ModelParams& p = cx.cfg.model;
  std::ostringstream sink;
  std::ostream& saved = cx.out;
  Context quiet{cx.cfg, cx.out_dir, sink, cx.err, cx.solution};
  cmd_solve(quiet);
  const WSolution& sol = quiet.solve();
  Summary sm = from_solution(p, sol);

  const GivenBandResult g = solve_given_band(p, sol.s, sol.S, cx.cfg.solver);
  const bool eval_ok = std::abs(g.gamma - sol.gamma) <= 1e-6;
  sm.checks["evaluate_gamma"] = num(g.gamma);
  sm.checks["evaluate_consistent"] = eval_ok;

  const VerificationReport vr = check_upper_bound(p, build_value_function(sol), sol.gamma, cx.cfg.verify);
  sm.checks["verify"] = verification_checks(vr);

  const OracleSolution o = solve_average_reward(build_chain(p, cx.cfg.chain), cx.cfg.oracle);
  const ComparisonReport c = compare(p, sol, o, cx.cfg.chain.delta);
  Json oc = oracle_checks(o, c, sol);
  oc["gamma_o"] = num(o.gamma);
  oc["s_hat"] = num(o.s_hat);
  oc["S_hat"] = num(o.S_hat);
  oc["z_price_max"] = num(o.z_price_max);
  sm.checks["oracle"] = oc;

  const SimResult r = simulate(p, Policy::from_solution(p, sol), cx.cfg.sim);
  const bool sim_ok = std::abs(r.avg_profit - sol.gamma) <= 1.96 * r.stderr_;
  sm.checks["sim"] = Json{{"mean", num(r.avg_profit)},
                          {"stderr", num(r.stderr_)},
                          {"ci95_contains_gamma_star", sim_ok},
                          {"replications", cx.cfg.sim.replications},
                          {"seed", cx.cfg.sim.seed}};
  const bool all_ok = eval_ok && vr.passed() && c.ok() && sim_ok;
  sm.checks["all_ok"] = all_ok;
  write_summary(cx.out_dir / "report.json", sm);
  saved << sm.to_json().dump(2) << '\n';
  if (!all_ok) {
    cx.err << "report: at least one cross-check failed\n";
    return kExitVerification;
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint pricing and (s,S) inventory control: solve, verify, simulate"};
  app.require_subcommand(1);
  std::string config_path, out_dir, policy_spec = "optimal";
  std::optional<std::uint64_t> seed;
  std::optional<double> s_opt, S_opt;
  bool dump = false;
  app.add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (overrides [output] dir)");
  app.add_option("--seed", seed, "simulation seed (overrides [sim] seed)");

  auto* solve = app.add_subcommand("solve", "solve the free-boundary problem, write summary.json and curves.csv");
  auto* evaluate = app.add_subcommand("evaluate", "profit rate of the best pricing under a fixed (s, S)");
  evaluate->add_option("--s", s_opt, "reorder level")->required();
  evaluate->add_option("--S", S_opt, "order-up-to level")->required();
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo long-run average profit of a policy");
  sim->add_option("--policy", policy_spec, "optimal | constant:<price> | path to a summary.json");
  sim->add_option("--s", s_opt, "override the reorder level");
  sim->add_option("--S", S_opt, "override the order-up-to level");
  sim->add_flag("--dump-trajectory", dump, "write replication 0 to trajectory.csv");
  auto* oracle = app.add_subcommand("oracle", "Markov-chain oracle and comparison with the solver");
  auto* verify = app.add_subcommand("verify", "upper-bound checks on the solved value function");
  auto* report = app.add_subcommand("report", "run everything and cross-compare");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    std::istringstream empty;
    RunConfig cfg = config_path.empty() ? parse_config(empty) : load_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed) cfg.sim.seed = *seed;
    Context cx{std::move(cfg), fs::path{}, out, err, std::nullopt};
    cx.out_dir = cx.cfg.out_dir;
    fs::create_directories(cx.out_dir);

    if (*solve) return cmd_solve(cx);
    if (*evaluate) return cmd_evaluate(cx, *s_opt, *S_opt);
    if (*sim) return cmd_simulate(cx, policy_spec, s_opt, S_opt, dump);
    if (*oracle) return cmd_oracle(cx);
    if (*verify) return cmd_verify(cx);
    if (*report) return cmd_report(cx);
    return kExitInvalid;
  } catch (const NoSolution& e) {
    err << "no solution: " << e.what() << '\n';
    return kExitNoSolution;
  } catch (const VerificationFailed& e) {
    err << "verification failed: " << e.what() << '\n';
    return kExitVerification;
  } catch (const ConfigInvalid& e) {
    err << "invalid: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const ModelInvalid& e) {
    err << "invalid: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const SpecInvalid& e) {
    err << "invalid: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const PriceOutOfBounds& e) {
    err << "invalid: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const OutOfRange& e) {
    err << "invalid: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitOther;
  }
}

}  // namespace invpricing
