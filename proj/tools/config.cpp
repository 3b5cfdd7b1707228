#include "invpricing/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "invpricing/errors.hpp"

namespace invpricing {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"demand", {"family", "A", "lambda0", "lambda1", "p_min", "p_max"}},
      {"cost", {"family", "c_plus", "c_minus", "a_plus", "a_minus"}},
      {"model", {"sigma", "K", "k"}},
      {"solver",
       {"grid_step", "ode_atol", "ode_rtol", "min_step", "blowup_limit", "level_tol", "gamma_rel_tol", "z_max",
        "z_max_certify_tol", "max_z_max_doublings", "left_stop_margin", "residual_tol"}},
      {"sim", {"x0", "T", "dt", "burn_in", "seed", "replications", "revenue_noise", "threads", "trajectory_stride"}},
      {"oracle", {"z_lo", "z_hi", "delta", "price_points", "tol", "max_iterations"}},
      {"verify", {"generator_tol", "slope_tol", "pair_tol", "price_points", "pair_checks", "seed"}},
      {"output", {"dir"}},
  };
  return keys;
}

class Reader {
public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  template <class T>
  T get(const std::string& section, const std::string& key, T fallback) const {
    const auto node = tree_.get_child_optional(pt::ptree::path_type(section + "." + key, '.'));
    if (!node) return fallback;
    const std::string raw = node->get_value<std::string>();
    if constexpr (std::is_same_v<T, std::string>) {
      return raw;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (raw == "true" || raw == "1" || raw == "yes") return true;
      if (raw == "false" || raw == "0" || raw == "no") return false;
      fail(section, key, raw);
    } else {
      std::istringstream is(raw);
      T v{};
      if (!(is >> v) || !(is >> std::ws).eof()) fail(section, key, raw);
      return v;
    }
  }

  bool has(const std::string& section, const std::string& key) const {
    return static_cast<bool>(tree_.get_child_optional(pt::ptree::path_type(section + "." + key, '.')));
  }

private:
  [[noreturn]] static void fail(const std::string& section, const std::string& key, const std::string& raw) {
    throw ConfigInvalid("config: [" + section + "] " + key + " = '" + raw + "' is not a valid value");
  }
  const pt::ptree& tree_;
};

DemandModel read_demand(const Reader& r) {
  const auto family = r.get<std::string>("demand", "family", "linear");
  const double p_min = r.get("demand", "p_min", 2.0), p_max = r.get("demand", "p_max", 6.0);
  if (family == "linear") return DemandModel::linear(r.get("demand", "A", 10.0), p_min, p_max);
  if (family == "hyperbolic")
    return DemandModel::hyperbolic(r.get("demand", "lambda0", 1.0), r.get("demand", "lambda1", 2.0), p_min, p_max);
  throw ConfigInvalid("config: [demand] family must be linear or hyperbolic, got '" + family + "'");
}

CostModel read_cost(const Reader& r) {
  const auto family = r.get<std::string>("cost", "family", "quadratic");
  const double cp = r.get("cost", "c_plus", 1.0), cm = r.get("cost", "c_minus", 1.0);
  if (family == "quadratic") return CostModel::quadratic(cp, cm);
  if (family == "power") return CostModel::power(cp, cm, r.get("cost", "a_plus", 2.0), r.get("cost", "a_minus", 2.0));
  throw ConfigInvalid("config: [cost] family must be quadratic or power, got '" + family + "'");
}

}  // namespace

RunConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigInvalid(std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) throw ConfigInvalid("config: key '" + section + "' outside any section");
    const auto it = known_keys().find(section);
    if (it == known_keys().end()) throw ConfigInvalid("config: unknown section [" + section + "]");
    for (const auto& [key, value] : body)
      if (!it->second.count(key)) throw ConfigInvalid("config: unknown key '" + key + "' in [" + section + "]");
  }

  const Reader r(tree);
  ModelParams model{read_demand(r), read_cost(r), r.get("model", "sigma", 1.0), r.get("model", "K", 1.0),
                    r.get("model", "k", 1.0)};
  model.validate();

  RunConfig c{std::move(model), {}, {}, {}, {}, {}, "out"};
  SolverOptions& so = c.solver;
  so.grid_step = r.get("solver", "grid_step", so.grid_step);
  so.ode_atol = r.get("solver", "ode_atol", so.ode_atol);
  so.ode_rtol = r.get("solver", "ode_rtol", so.ode_rtol);
  so.min_step = r.get("solver", "min_step", so.min_step);
  so.blowup_limit = r.get("solver", "blowup_limit", so.blowup_limit);
  so.level_tol = r.get("solver", "level_tol", so.level_tol);
  so.gamma_rel_tol = r.get("solver", "gamma_rel_tol", so.gamma_rel_tol);
  if (r.has("solver", "z_max")) so.z_max = r.get("solver", "z_max", 0.0);
  so.z_max_certify_tol = r.get("solver", "z_max_certify_tol", so.z_max_certify_tol);
  so.max_z_max_doublings = r.get("solver", "max_z_max_doublings", so.max_z_max_doublings);
  so.left_stop_margin = r.get("solver", "left_stop_margin", so.left_stop_margin);
  so.residual_tol = r.get("solver", "residual_tol", so.residual_tol);
  for (double v : {so.grid_step, so.ode_atol, so.ode_rtol, so.min_step, so.blowup_limit, so.level_tol,
                   so.gamma_rel_tol, so.z_max_certify_tol, so.left_stop_margin, so.residual_tol})
    if (!(v > 0.0)) throw ConfigInvalid("config: [solver] tolerances and steps must be > 0");
  if (so.z_max && !(*so.z_max > 0.0)) throw ConfigInvalid("config: [solver] z_max must be > 0");
  if (so.max_z_max_doublings < 1) throw ConfigInvalid("config: [solver] max_z_max_doublings must be >= 1");

  SimConfig& sc = c.sim;
  sc.x0 = r.get("sim", "x0", sc.x0);
  sc.T = r.get("sim", "T", sc.T);
  sc.dt = r.get("sim", "dt", sc.dt);
  sc.burn_in = r.get("sim", "burn_in", sc.burn_in);
  sc.seed = r.get<std::uint64_t>("sim", "seed", sc.seed);
  sc.replications = r.get("sim", "replications", sc.replications);
  sc.revenue_noise = r.get("sim", "revenue_noise", sc.revenue_noise);
  sc.threads = r.get("sim", "threads", sc.threads);
  sc.trajectory_stride = r.get<std::size_t>("sim", "trajectory_stride", 100);
  sc.validate();

  ChainSpec& ch = c.chain;
  ch.z_lo = r.get("oracle", "z_lo", ch.z_lo);
  ch.z_hi = r.get("oracle", "z_hi", ch.z_hi);
  ch.delta = r.get("oracle", "delta", ch.delta);
  ch.price_points = r.get("oracle", "price_points", ch.price_points);
  ch.validate(c.model.demand);
  c.oracle.tol = r.get("oracle", "tol", c.oracle.tol);
  c.oracle.max_iterations = r.get("oracle", "max_iterations", c.oracle.max_iterations);
  if (!(c.oracle.tol > 0.0) || c.oracle.max_iterations < 1)
    throw ConfigInvalid("config: [oracle] tol must be > 0 and max_iterations >= 1");

  VerificationOptions& vo = c.verify;
  vo.generator_tol = r.get("verify", "generator_tol", vo.generator_tol);
  vo.slope_tol = r.get("verify", "slope_tol", vo.slope_tol);
  vo.pair_tol = r.get("verify", "pair_tol", vo.pair_tol);
  vo.price_points = r.get("verify", "price_points", vo.price_points);
  vo.pair_checks = r.get("verify", "pair_checks", vo.pair_checks);
  vo.seed = r.get<std::uint64_t>("verify", "seed", vo.seed);
  if (vo.price_points < 2 || vo.pair_checks < 0) throw ConfigInvalid("config: [verify] price_points >= 2, pair_checks >= 0");

  c.out_dir = r.get<std::string>("output", "dir", c.out_dir);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("config: cannot open '" + path + "'");
  return parse_config(in);
}

}  // namespace invpricing
