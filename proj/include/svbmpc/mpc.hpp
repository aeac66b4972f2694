// Receding-horizon controller on the learned mean model.
//
// Each step solves the finite-horizon problem
//   min  sum_{i<Nc} l(x_i, u_i) + sum_{Nc<=i<Np} l(x_i, kf(x_i))
//        + lambda Vf(x_Np - x_r)
//   s.t. certainty-equivalent NARX rollout, u_i in the input box,
// with the barrier-augmented stage cost
//   l = ||y - y_r||_Q^2 + ||u - u_r||_R^2 + eta (1 - exp(-dist(y, Y)/rho)),
// a terminal pair (P, K) from an LQR design on the companion-form
// linearization of the learned models, and kf(x) = clamp(u_r + K (x_r - x)).
//
// The decision vector is the stacked control plan over Nc steps, optimized by
// projected gradient descent in box-scaled coordinates with central
// finite-difference gradients and an Armijo backtracking line search. The
// returned plan never has a worse objective than the warm start.

#ifndef SVBMPC_MPC_HPP
#define SVBMPC_MPC_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "svbmpc/numerics.hpp"
#include "svbmpc/predict.hpp"

namespace svbmpc {

struct StageCostParams {
  Vector q;     // per-output tracking weights
  Vector r;     // per-input tracking weights
  double eta = 100.0;  // barrier height
  double rho = 1.0;    // barrier sharpness
  Vector y_lo;  // output comfort band (barrier is zero inside)
  Vector y_hi;

  void validate() const
  {
    if ((q.array() <= 0.0).any() || (r.array() <= 0.0).any())
      throw std::invalid_argument("StageCostParams: Q, R must be positive");
    if (eta < 0.0 || !(rho > 0.0))
      throw std::invalid_argument("StageCostParams: need eta >= 0, rho > 0");
    if (y_lo.size() != q.size() || y_hi.size() != q.size())
      throw std::invalid_argument("StageCostParams: band size mismatch");
  }
};

/// Euclidean distance from y to the box [lo, hi]; 0 inside.
inline double box_distance(const Vector& y, const Vector& lo, const Vector& hi)
{
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double d = std::max({0.0, lo(i) - y(i), y(i) - hi(i)});
    s += d * d;
  }
  return std::sqrt(s);
}

inline double stage_cost(const Vector& y, const Vector& u,
                         const StageCostParams& params, const Vector& y_ref,
                         const Vector& u_ref)
{
  double c = (params.q.array() * (y - y_ref).array().square()).sum() +
             (params.r.array() * (u - u_ref).array().square()).sum();
  if (params.eta > 0.0) {
    const double dist = box_distance(y, params.y_lo, params.y_hi);
    c += params.eta * (1.0 - std::exp(-dist / params.rho));
  }
  return c;
}

/// Terminal ingredients from the LQR design on the stacked companion
/// linearization: Vf(x) = lambda (x - x_r)' P (x - x_r) and the clamped
/// terminal law kf(x) = u_r + K (x_r - x).
struct TerminalDesign {
  Matrix P;
  Matrix K;
  double lambda = 1.0;
  Vector x_r;
  Vector u_r;
  Vector u_lo, u_hi;

  double terminal_cost(const Vector& x) const
  {
    const Vector e = x - x_r;
    return lambda * e.dot(P * e);
  }

  Vector kappa_f(const Vector& x) const
  {
    Vector u = u_r + K * (x_r - x);
    return u.cwiseMax(u_lo).cwiseMin(u_hi);
  }
};

/**
 * Companion-form linearization of one fitted MISO model around the reference:
 * the top row of A holds central-difference derivatives of the predictive
 * mean w.r.t. each output lag, rows below shift the lag chain; B's top row
 * holds the input derivatives. Requires n_b = 0 (no lagged-input state).
 */
inline std::pair<Matrix, Matrix> linearize(const FittedModel& model,
                                           double y_ref, const Vector& u_ref,
                                           double delta = kDefaultFdDelta)
{
  if (model.cfg.n_b != 0)
    throw std::invalid_argument(
        "linearize: companion form requires n_b == 0");
  if (!(delta > 0.0))
    throw std::invalid_argument("linearize: delta must be positive");
  const int n_lag = model.cfg.n_a + 1;
  const int n_u = model.cfg.n_u;

  const auto mean_at = [&](const Vector& lags, const Vector& u) {
    Vector z(model.cfg.regressor_len());
    z.head(n_lag) = lags;
    z.tail(n_u) = u;
    return predictive(model, z).mean;
  };

  Matrix a = Matrix::Zero(n_lag, n_lag);
  Matrix b = Matrix::Zero(n_lag, n_u);
  const Vector lags0 = Vector::Constant(n_lag, y_ref);

  for (int j = 0; j < n_lag; ++j) {
    Vector lp = lags0, lm = lags0;
    lp(j) += delta;
    lm(j) -= delta;
    a(0, j) = (mean_at(lp, u_ref) - mean_at(lm, u_ref)) / (2.0 * delta);
  }
  for (int j = 0; j < n_u; ++j) {
    Vector up = u_ref, um = u_ref;
    up(j) += delta;
    um(j) -= delta;
    b(0, j) = (mean_at(lags0, up) - mean_at(lags0, um)) / (2.0 * delta);
  }
  for (int i = 1; i < n_lag; ++i) a(i, i - 1) = 1.0;

  if (!a.allFinite() || !b.allFinite())
    throw std::runtime_error("linearize: non-finite differences");
  return {std::move(a), std::move(b)};
}

/// Stack per-model companion forms block-diagonally; B rows align per model.
inline std::pair<Matrix, Matrix> stack_companions(
    const std::vector<std::pair<Matrix, Matrix>>& blocks)
{
  Eigen::Index n = 0, m = 0;
  for (const auto& [a, b] : blocks) {
    n += a.rows();
    m = b.cols();
  }
  Matrix a = Matrix::Zero(n, n);
  Matrix b = Matrix::Zero(n, m);
  Eigen::Index off = 0;
  for (const auto& [ai, bi] : blocks) {
    a.block(off, off, ai.rows(), ai.cols()) = ai;
    b.block(off, 0, bi.rows(), bi.cols()) = bi;
    off += ai.rows();
  }
  return {std::move(a), std::move(b)};
}

inline TerminalDesign terminal_design(const Matrix& a, const Matrix& b,
                                      const Matrix& q_lqr, const Matrix& r_lqr,
                                      double lambda, Vector x_r, Vector u_r,
                                      Vector u_lo, Vector u_hi)
{
  if (lambda < 1.0)
    throw std::invalid_argument("terminal_design: lambda must be >= 1");
  const DareResult dare = solve_dare(a, b, q_lqr, r_lqr);
  TerminalDesign t;
  t.P = dare.P;
  t.K = dare.K;
  t.lambda = lambda;
  t.x_r = std::move(x_r);
  t.u_r = std::move(u_r);
  t.u_lo = std::move(u_lo);
  t.u_hi = std::move(u_hi);
  return t;
}

struct SolverOptions {
  int max_iter = 200;
  double fd_step = 1e-4;      // in box-scaled input units
  double grad_tol = 1e-6;     // projected-gradient (natural residual) norm
  double j_rel_tol = 1e-9;    // relative objective change
  double init_step = 1.0;
  int max_backtracks = 30;
};

struct OcpSpec {
  int Np = 10;
  int Nc = 10;
  Vector u_lo, u_hi;
  StageCostParams stage;
  TerminalDesign terminal;
  Vector y_ref;
  Vector u_ref;
  SolverOptions solver;

  void validate() const
  {
    if (Np < 1 || Nc < 1 || Nc > Np)
      throw std::invalid_argument("OcpSpec: need 1 <= Nc <= Np");
    if (u_lo.size() != u_hi.size() || (u_lo.array() > u_hi.array()).any())
      throw std::invalid_argument("OcpSpec: malformed input box");
    stage.validate();
  }
};

struct OcpSolution {
  std::vector<Vector> u_plan;  // Nc inputs, inside the box
  Matrix predicted;            // Np x n_outputs predicted means
  double J = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

/// Stacked lag vector across models (the terminal-cost state).
inline Vector stacked_lags(const std::vector<NarxState>& states)
{
  Eigen::Index n = 0;
  for (const auto& s : states) n += static_cast<Eigen::Index>(s.y_hist.size());
  Vector x(n);
  Eigen::Index k = 0;
  for (const auto& s : states)
    for (double y : s.y_hist) x(k++) = y;
  return x;
}

struct ObjectiveEval {
  double J;
  Matrix predicted;
};

/// Rollout objective of Eq-style receding-horizon cost: stage cost on the
/// state at step i with the input applied there, terminal cost after Np steps.
/// Tail steps i >= Nc follow the clamped terminal law.
inline ObjectiveEval ocp_objective(const std::vector<FittedModel>& models,
                                   const std::vector<NarxState>& states0,
                                   const OcpSpec& spec,
                                   const std::vector<Vector>& plan)
{
  const Eigen::Index n_out = static_cast<Eigen::Index>(models.size());
  std::vector<NarxState> states = states0;
  ObjectiveEval ev;
  ev.J = 0.0;
  ev.predicted.resize(spec.Np, n_out);

  Vector y_now(n_out);
  for (Eigen::Index m = 0; m < n_out; ++m)
    y_now(m) = states[static_cast<std::size_t>(m)].y_hist.front();

  for (int i = 0; i < spec.Np; ++i) {
    const Vector u = i < spec.Nc
                         ? plan[static_cast<std::size_t>(i)]
                         : spec.terminal.kappa_f(stacked_lags(states));
    ev.J += stage_cost(y_now, u, spec.stage, spec.y_ref, spec.u_ref);

    for (Eigen::Index m = 0; m < n_out; ++m) {
      const auto& model = models[static_cast<std::size_t>(m)];
      const Vector z =
          make_regressor(states[static_cast<std::size_t>(m)], u, model.cfg);
      const double mean = predictive(model, z).mean;
      if (!std::isfinite(mean))
        throw std::runtime_error("solve_ocp: rollout blew up at step " +
                                 std::to_string(i));
      ev.predicted(i, m) = mean;
    }
    for (Eigen::Index m = 0; m < n_out; ++m)
      states[static_cast<std::size_t>(m)] =
          shift_state(states[static_cast<std::size_t>(m)], ev.predicted(i, m), u);
    y_now = ev.predicted.row(i).transpose();
  }
  ev.J += spec.terminal.terminal_cost(stacked_lags(states));
  if (!std::isfinite(ev.J))
    throw std::runtime_error("solve_ocp: non-finite objective");
  return ev;
}

}  // namespace detail

/**
 * Single-shooting projected gradient descent over the stacked input plan.
 * Works in box-scaled coordinates w in [0,1]; gradients by central
 * differences; Armijo backtracking with projection after each trial step.
 */
inline OcpSolution solve_ocp(const std::vector<FittedModel>& models,
                             const std::vector<NarxState>& states0,
                             const OcpSpec& spec,
                             const std::optional<std::vector<Vector>>&
                                 warm_start = std::nullopt)
{
  spec.validate();
  if (models.empty() || models.size() != states0.size())
    throw std::invalid_argument("solve_ocp: model/state mismatch");
  const Eigen::Index n_u = spec.u_lo.size();
  const Eigen::Index dim = static_cast<Eigen::Index>(spec.Nc) * n_u;
  const Vector width = (spec.u_hi - spec.u_lo).cwiseMax(1e-12);

  const auto to_plan = [&](const Vector& w) {
    std::vector<Vector> plan(static_cast<std::size_t>(spec.Nc));
    for (int i = 0; i < spec.Nc; ++i)
      plan[static_cast<std::size_t>(i)] =
          spec.u_lo + width.cwiseProduct(w.segment(i * n_u, n_u));
    return plan;
  };
  const auto objective = [&](const Vector& w) {
    return detail::ocp_objective(models, states0, spec, to_plan(w)).J;
  };
  const auto clamp01 = [](Vector w) {
    return w.cwiseMax(0.0).cwiseMin(1.0).eval();
  };

  // Scaled warm start (reference-constant plan when none given).
  Vector w(dim);
  for (int i = 0; i < spec.Nc; ++i) {
    const Vector u = warm_start ? (*warm_start)[static_cast<std::size_t>(i)]
                                : spec.u_ref;
    w.segment(i * n_u, n_u) = (u - spec.u_lo).cwiseQuotient(width);
  }
  w = clamp01(w);

  double J = objective(w);
  double step = spec.solver.init_step;
  Vector w_prev, g_prev;
  int it = 0;
  bool converged = false;

  for (; it < spec.solver.max_iter; ++it) {
    // Central-difference gradient in scaled coordinates.
    Vector g(dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
      Vector wp = w, wm = w;
      wp(j) += spec.solver.fd_step;
      wm(j) -= spec.solver.fd_step;
      g(j) = (objective(wp) - objective(wm)) / (2.0 * spec.solver.fd_step);
    }

    if ((w - clamp01(w - g)).norm() < spec.solver.grad_tol) {
      converged = true;
      break;
    }

    // Barzilai-Borwein trial step when history exists, Armijo-safeguarded.
    double t = step;
    if (w_prev.size() == dim) {
      const Vector dw = w - w_prev;
      const Vector dg = g - g_prev;
      const double denom = dg.squaredNorm();
      if (denom > 0.0) t = std::abs(dw.dot(dg)) / denom;
    }
    t = std::clamp(t, 1e-10, 1e8);
    w_prev = w;
    g_prev = g;

    bool accepted = false;
    for (int bt = 0; bt < spec.solver.max_backtracks; ++bt) {
      const Vector w_trial = clamp01(w - t * g);
      const double move2 = (w - w_trial).squaredNorm();
      if (move2 == 0.0) break;
      const double J_trial = objective(w_trial);
      if (J_trial <= J - 1e-4 * move2 / t) {
        const double dJ = J - J_trial;
        w = w_trial;
        J = J_trial;
        accepted = true;
        step = t;
        if (dJ < spec.solver.j_rel_tol * std::max(1.0, std::abs(J))) {
          converged = true;
        }
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // No acceptable step: treat as stationary.
      converged = true;
      break;
    }
    if (converged) {
      ++it;
      break;
    }
  }

  OcpSolution sol;
  sol.u_plan = to_plan(w);
  const auto ev = detail::ocp_objective(models, states0, spec, sol.u_plan);
  sol.predicted = ev.predicted;
  sol.J = ev.J;
  sol.iterations = it;
  sol.converged = converged;
  return sol;
}

/// Per-step bookkeeping exposed by the controller for logging.
struct ControlStepInfo {
  Vector u;
  double J = 0.0;
  int solver_iterations = 0;
  bool solver_converged = false;
  bool fallback = false;
  Vector delta;       // y_meas - previous one-step prediction (NaN first step)
  Vector y_predicted;  // one-step prediction under the applied input
  double load = 0.0;
};

/**
 * Receding-horizon loop: update the NARX state with the new measurement,
 * re-solve warm-started from the previous plan shifted by one (tail filled
 * with the terminal law at the predicted terminal state), apply the first
 * input. On solver failure the previous input is reapplied and flagged.
 */
class RecedingHorizonController {
 public:
  RecedingHorizonController(std::vector<FittedModel> models, OcpSpec spec)
      : models_(std::move(models)), spec_(std::move(spec))
  {
    spec_.validate();
    if (models_.empty())
      throw std::invalid_argument("controller: needs at least one model");
  }

  ControlStepInfo control_step(const Vector& y_meas, double load = 0.0)
  {
    if (y_meas.size() != static_cast<Eigen::Index>(models_.size()))
      throw std::invalid_argument("control_step: measurement size mismatch");

    ControlStepInfo info;
    info.load = load;
    info.delta = Vector::Constant(y_meas.size(),
                                  std::numeric_limits<double>::quiet_NaN());

    if (!initialized_) {
      states_.clear();
      for (std::size_t m = 0; m < models_.size(); ++m)
        states_.push_back(NarxState::filled(
            models_[m].cfg, y_meas(static_cast<Eigen::Index>(m)), spec_.u_ref));
      plan_.assign(static_cast<std::size_t>(spec_.Nc), spec_.u_ref);
      prev_u_ = spec_.u_ref;
      initialized_ = true;
    } else {
      for (std::size_t m = 0; m < models_.size(); ++m)
        states_[m] = shift_state(states_[m],
                                 y_meas(static_cast<Eigen::Index>(m)), prev_u_);
      info.delta = y_meas - prev_prediction_;
      warm_shift();
    }

    try {
      const OcpSolution sol = solve_ocp(models_, states_, spec_, plan_);
      plan_ = sol.u_plan;
      info.u = plan_.front();
      info.J = sol.J;
      info.solver_iterations = sol.iterations;
      info.solver_converged = sol.converged;
    } catch (const std::exception&) {
      info.u = prev_u_;
      info.fallback = true;
      ++fallback_count_;
    }

    // One-step prediction under the applied input, for the delta_k statistic.
    prev_prediction_.resize(static_cast<Eigen::Index>(models_.size()));
    for (std::size_t m = 0; m < models_.size(); ++m) {
      const Vector z = make_regressor(states_[m], info.u, models_[m].cfg);
      prev_prediction_(static_cast<Eigen::Index>(m)) =
          predictive(models_[m], z).mean;
    }
    info.y_predicted = prev_prediction_;
    prev_u_ = info.u;
    return info;
  }

  const std::vector<Vector>& plan() const { return plan_; }
  int fallback_count() const { return fallback_count_; }
  const OcpSpec& spec() const { return spec_; }

 private:
  /// Shift the previous plan left; fill the tail with the terminal law at the
  /// predicted terminal state of the shifted plan.
  void warm_shift()
  {
    if (plan_.size() > 1)
      std::rotate(plan_.begin(), plan_.begin() + 1, plan_.end());
    try {
      const Rollout roll = rollout_mean(models_, states_, plan_,
                                        static_cast<int>(plan_.size()) - 1);
      const Vector x_term =
          roll.states.empty() ? detail::stacked_lags(states_)
                              : detail::stacked_lags(roll.states.back());
      plan_.back() = spec_.terminal.kappa_f(x_term);
    } catch (const std::exception&) {
      plan_.back() = spec_.u_ref;  // conservative fill when the rollout fails
    }
  }

  std::vector<FittedModel> models_;
  OcpSpec spec_;
  std::vector<NarxState> states_;
  std::vector<Vector> plan_;
  Vector prev_u_;
  Vector prev_prediction_;
  bool initialized_ = false;
  int fallback_count_ = 0;
};

}  // namespace svbmpc

#endif  // SVBMPC_MPC_HPP
