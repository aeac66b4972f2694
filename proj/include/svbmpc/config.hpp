// Experiment configuration: every tunable of the pipeline with its default,
// overridable from a flat key=value file with dotted namespaces
// (e.g. "plant.m_st = 2.0"). Unknown keys are errors.

#ifndef SVBMPC_CONFIG_HPP
#define SVBMPC_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>

#include "svbmpc/dictionary.hpp"
#include "svbmpc/nsvb.hpp"
#include "svbmpc/plant.hpp"

namespace svbmpc {

/// Errors that should surface as usage problems (exit code 1).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  PlantParams plant;
  NarxConfig narx;           // per-output MISO config (n_u = 2 inputs)
  bool standardize = true;
  Hyperpriors hyper;
  FitOptions fit;

  // Controller.
  int mpc_Np = 10;
  int mpc_Nc = 10;
  double mpc_Q = 50.0;
  double mpc_R = 1.0;
  double mpc_eta = 100.0;
  double mpc_rho = 1.0;
  double mpc_lambda = 1.0;
  double mpc_y_lo = 325.0;
  double mpc_y_hi = 355.0;
  double mpc_u1_min = kFlowFloor;  // pump floor; the model is singular at 0
  double mpc_u1_max = 60.0;
  double mpc_u2_min = 0.0;
  double mpc_u2_max = 2.0;
  int solver_max_iter = 200;
  double solver_fd_step = 1e-4;
  double solver_grad_tol = 1e-6;
  double solver_j_rel_tol = 1e-9;
  double solver_init_step = 1.0;
  double lin_delta = kDefaultFdDelta;
  double lqr_lag_weight = 1e-6;

  // Run protocol.
  std::uint64_t seed = 42;
  double dt = 0.1;
  double y1_ref = 336.15;
  double y2_ref = 343.15;
  int train_len = 250;
  int valid_len = 750;
  int gen_len = 1003;  // train + validation + lag margin
  double noise_mult = 1.0;
  int steps = 400;            // closed-loop length
  double init_offset = -10.0;  // cold-start offset from the reference (K)
  int excite_dwell = 10;
  double excite_u1_lo = 0.25;
  double excite_u1_hi = 3.0;
  double excite_u2_lo = 0.3;
  double excite_u2_hi = 1.7;
  int sweep_count = 10;

  ExperimentConfig()
  {
    narx.n_a = 2;
    narx.n_b = 0;
    narx.n_u = 2;
    narx.n_y = 1;
    narx.degree = 2;
    narx.include_bias = true;
  }

  void validate() const
  {
    plant.validate();
    narx.validate();
    hyper.validate();
    if (train_len < 4 || valid_len < 0 || gen_len < train_len)
      throw UsageError("config: malformed split sizes");
    if (!(dt > 0.0))
      throw UsageError("config: dt must be positive");
    if (noise_mult < 0.0)
      throw UsageError("config: noise multiplier must be >= 0");
    if (steps < 0)
      throw UsageError("config: steps must be >= 0");
    if (excite_dwell < 1)
      throw UsageError("config: excitation dwell must be >= 1");
  }
};

namespace detail {

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

inline double parse_double(const std::string& key, const std::string& v)
{
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw UsageError("config: bad numeric value for " + key + ": " + v);
  }
  if (pos != v.size())
    throw UsageError("config: bad numeric value for " + key + ": " + v);
  return out;
}

inline long parse_int(const std::string& key, const std::string& v)
{
  const double d = parse_double(key, v);
  const long i = static_cast<long>(d);
  if (static_cast<double>(i) != d)
    throw UsageError("config: expected integer for " + key + ": " + v);
  return i;
}

inline bool parse_bool(const std::string& key, const std::string& v)
{
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw UsageError("config: expected boolean for " + key + ": " + v);
}

inline const std::map<std::string, Setter>& setters()
{
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto num = [&t](const std::string& key, double ExperimentConfig::*field) {
      t[key] = [key, field](ExperimentConfig& c, const std::string& v) {
        c.*field = parse_double(key, v);
      };
    };
    t["plant.m_st"] = [](ExperimentConfig& c, const std::string& v) {
      c.plant.m_st = parse_double("plant.m_st", v);
    };
    t["plant.m_tank"] = [](ExperimentConfig& c, const std::string& v) {
      c.plant.m_tank = parse_double("plant.m_tank", v);
    };
    t["plant.m_rad"] = [](ExperimentConfig& c, const std::string& v) {
      c.plant.m_rad = parse_double("plant.m_rad", v);
    };
    t["plant.A_rad"] = [](ExperimentConfig& c, const std::string& v) {
      c.plant.A_rad = parse_double("plant.A_rad", v);
    };
    t["plant.c_w"] = [](ExperimentConfig& c, const std::string& v) {
      c.plant.c_w = parse_double("plant.c_w", v);
    };
    t["plant.T_amb"] = [](ExperimentConfig& c, const std::string& v) {
      c.plant.T_amb = parse_double("plant.T_amb", v);
    };
    t["plant.Q_gen"] = [](ExperimentConfig& c, const std::string& v) {
      c.plant.Q_gen = parse_double("plant.Q_gen", v);
    };
    t["plant.noise_param"] = [](ExperimentConfig& c, const std::string& v) {
      c.plant.noise_param = parse_double("plant.noise_param", v);
    };
    t["plant.noise_is_std"] = [](ExperimentConfig& c, const std::string& v) {
      c.plant.noise_is_std = parse_bool("plant.noise_is_std", v);
    };
    t["narx.n_a"] = [](ExperimentConfig& c, const std::string& v) {
      c.narx.n_a = static_cast<int>(parse_int("narx.n_a", v));
    };
    t["narx.n_b"] = [](ExperimentConfig& c, const std::string& v) {
      c.narx.n_b = static_cast<int>(parse_int("narx.n_b", v));
    };
    t["narx.degree"] = [](ExperimentConfig& c, const std::string& v) {
      c.narx.degree = static_cast<int>(parse_int("narx.degree", v));
    };
    t["narx.include_bias"] = [](ExperimentConfig& c, const std::string& v) {
      c.narx.include_bias = parse_bool("narx.include_bias", v);
    };
    t["narx.max_terms"] = [](ExperimentConfig& c, const std::string& v) {
      c.narx.max_terms = static_cast<int>(parse_int("narx.max_terms", v));
    };
    t["narx.standardize"] = [](ExperimentConfig& c, const std::string& v) {
      c.standardize = parse_bool("narx.standardize", v);
    };
    t["hyper.a0"] = [](ExperimentConfig& c, const std::string& v) {
      c.hyper.a0 = parse_double("hyper.a0", v);
    };
    t["hyper.b0"] = [](ExperimentConfig& c, const std::string& v) {
      c.hyper.b0 = parse_double("hyper.b0", v);
    };
    t["hyper.c0"] = [](ExperimentConfig& c, const std::string& v) {
      c.hyper.c0 = parse_double("hyper.c0", v);
    };
    t["hyper.d0"] = [](ExperimentConfig& c, const std::string& v) {
      c.hyper.d0 = parse_double("hyper.d0", v);
    };
    t["fit.max_iter"] = [](ExperimentConfig& c, const std::string& v) {
      c.fit.max_iter = static_cast<int>(parse_int("fit.max_iter", v));
    };
    t["fit.elbo_rel_tol"] = [](ExperimentConfig& c, const std::string& v) {
      c.fit.elbo_rel_tol = parse_double("fit.elbo_rel_tol", v);
    };
    t["fit.prune_threshold"] = [](ExperimentConfig& c, const std::string& v) {
      c.fit.prune_threshold = parse_double("fit.prune_threshold", v);
    };
    t["fit.prune"] = [](ExperimentConfig& c, const std::string& v) {
      c.fit.prune = parse_bool("fit.prune", v);
    };
    t["mpc.Np"] = [](ExperimentConfig& c, const std::string& v) {
      c.mpc_Np = static_cast<int>(parse_int("mpc.Np", v));
    };
    t["mpc.Nc"] = [](ExperimentConfig& c, const std::string& v) {
      c.mpc_Nc = static_cast<int>(parse_int("mpc.Nc", v));
    };
    num("mpc.Q", &ExperimentConfig::mpc_Q);
    num("mpc.R", &ExperimentConfig::mpc_R);
    num("mpc.eta", &ExperimentConfig::mpc_eta);
    num("mpc.rho", &ExperimentConfig::mpc_rho);
    num("mpc.lambda", &ExperimentConfig::mpc_lambda);
    num("mpc.y_lo", &ExperimentConfig::mpc_y_lo);
    num("mpc.y_hi", &ExperimentConfig::mpc_y_hi);
    num("mpc.u1_min", &ExperimentConfig::mpc_u1_min);
    num("mpc.u1_max", &ExperimentConfig::mpc_u1_max);
    num("mpc.u2_min", &ExperimentConfig::mpc_u2_min);
    num("mpc.u2_max", &ExperimentConfig::mpc_u2_max);
    t["mpc.solver_max_iter"] = [](ExperimentConfig& c, const std::string& v) {
      c.solver_max_iter = static_cast<int>(parse_int("mpc.solver_max_iter", v));
    };
    num("mpc.solver_fd_step", &ExperimentConfig::solver_fd_step);
    num("mpc.solver_grad_tol", &ExperimentConfig::solver_grad_tol);
    num("mpc.solver_j_rel_tol", &ExperimentConfig::solver_j_rel_tol);
    num("mpc.solver_init_step", &ExperimentConfig::solver_init_step);
    num("mpc.lin_delta", &ExperimentConfig::lin_delta);
    num("mpc.lqr_lag_weight", &ExperimentConfig::lqr_lag_weight);
    t["run.seed"] = [](ExperimentConfig& c, const std::string& v) {
      c.seed = static_cast<std::uint64_t>(parse_int("run.seed", v));
    };
    num("run.dt", &ExperimentConfig::dt);
    num("run.y1_ref", &ExperimentConfig::y1_ref);
    num("run.y2_ref", &ExperimentConfig::y2_ref);
    t["run.train_len"] = [](ExperimentConfig& c, const std::string& v) {
      c.train_len = static_cast<int>(parse_int("run.train_len", v));
    };
    t["run.valid_len"] = [](ExperimentConfig& c, const std::string& v) {
      c.valid_len = static_cast<int>(parse_int("run.valid_len", v));
    };
    t["run.gen_len"] = [](ExperimentConfig& c, const std::string& v) {
      c.gen_len = static_cast<int>(parse_int("run.gen_len", v));
    };
    num("run.noise_mult", &ExperimentConfig::noise_mult);
    t["run.steps"] = [](ExperimentConfig& c, const std::string& v) {
      c.steps = static_cast<int>(parse_int("run.steps", v));
    };
    num("run.init_offset", &ExperimentConfig::init_offset);
    t["run.excite_dwell"] = [](ExperimentConfig& c, const std::string& v) {
      c.excite_dwell = static_cast<int>(parse_int("run.excite_dwell", v));
    };
    num("run.excite_u1_lo", &ExperimentConfig::excite_u1_lo);
    num("run.excite_u1_hi", &ExperimentConfig::excite_u1_hi);
    num("run.excite_u2_lo", &ExperimentConfig::excite_u2_lo);
    num("run.excite_u2_hi", &ExperimentConfig::excite_u2_hi);
    t["sweep.count"] = [](ExperimentConfig& c, const std::string& v) {
      c.sweep_count = static_cast<int>(parse_int("sweep.count", v));
    };
    return t;
  }();
  return table;
}

inline std::string trim(const std::string& s)
{
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace detail

inline void apply_config_line(ExperimentConfig& cfg, const std::string& raw,
                              const std::string& where = "")
{
  const std::string line = detail::trim(raw);
  if (line.empty() || line[0] == '#') return;
  const auto eq = line.find('=');
  if (eq == std::string::npos)
    throw UsageError("config: expected key = value" +
                     (where.empty() ? "" : " at " + where) + ": " + line);
  const std::string key = detail::trim(line.substr(0, eq));
  const std::string value = detail::trim(line.substr(eq + 1));
  const auto& table = detail::setters();
  const auto it = table.find(key);
  if (it == table.end())
    throw UsageError("config: unknown key " + key);
  it->second(cfg, value);
}

inline ExperimentConfig load_config(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw UsageError("config: cannot open " + path);
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    apply_config_line(cfg, line, path + ":" + std::to_string(lineno));
  }
  cfg.validate();
  return cfg;
}

}  // namespace svbmpc

#endif  // SVBMPC_CONFIG_HPP
