// One-step predictive distribution of a fitted model and certainty-equivalent
// multi-step rollout of the mean.
//
// Marginalizing the weight posterior and the Gamma noise factor gives a
// Student-t one-step predictive:
//   mean      = mu' phi
//   precision = (1 + phi' Sigma phi)^{-1} c/d
//   dof       = 2c
// Rollouts propagate the mean only; the per-step variance is reported but the
// noise term is set to zero.

#ifndef SVBMPC_PREDICT_HPP
#define SVBMPC_PREDICT_HPP

#include <cmath>
#include <cstddef>
#include <deque>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "svbmpc/dictionary.hpp"
#include "svbmpc/nsvb.hpp"
#include "svbmpc/numerics.hpp"

namespace svbmpc {

/// A fitted MISO NARX model: surviving dictionary terms, the variational
/// posterior over their coefficients, and the regressor standardization.
struct FittedModel {
  NarxConfig cfg;
  std::vector<BasisTerm> terms;
  Standardizer standardizer;
  Posterior posterior;
  Hyperpriors hyper;
  FitReport report;
};

struct PredictiveDist {
  double mean = 0.0;
  double precision = 0.0;  // Student-t scale precision, > 0
  double dof = 0.0;        // 2c, > 0

  /// Variance (1 + phi' Sigma phi) d/(c-1); defined only for dof > 2.
  double variance() const
  {
    if (!(dof > 2.0))
      throw std::domain_error(
          "PredictiveDist: variance undefined for dof <= 2 (c <= 1)");
    return dof / ((dof - 2.0) * precision);
  }
};

namespace detail {

// ln Gamma(a + 1/2) - ln Gamma(a), series for large a to avoid cancellation.
inline double lgamma_half_step(double a)
{
  if (a > 1e6) {
    return 0.5 * std::log(a) - 1.0 / (8.0 * a);
  }
  return log_gamma(a + 0.5) - log_gamma(a);
}

}  // namespace detail

/// Log density of the Student-t with location mu, scale precision lam, dof nu.
inline double student_t_logpdf(double y, double mu, double lam, double nu)
{
  if (!(lam > 0.0) || !(nu > 0.0))
    throw std::invalid_argument("student_t_logpdf: lam and nu must be > 0");
  const double z2 = lam * (y - mu) * (y - mu);
  return detail::lgamma_half_step(0.5 * nu) +
         0.5 * std::log(lam / (std::numbers::pi * nu)) -
         0.5 * (nu + 1.0) * std::log1p(z2 / nu);
}

/// One-step predictive distribution at a raw (unstandardized) regressor.
inline PredictiveDist predictive(const FittedModel& model, const Vector& z_raw)
{
  if (!z_raw.allFinite())
    throw std::invalid_argument("predictive: non-finite regressor");
  if (z_raw.size() != model.cfg.regressor_len())
    throw std::invalid_argument("predictive: regressor length mismatch");

  const Vector z = model.standardizer.apply(z_raw);
  PredictiveDist out;
  const auto& post = model.posterior;
  if (model.terms.empty()) {
    out.mean = 0.0;
    out.precision = post.c / post.d;
    out.dof = 2.0 * post.c;
    return out;
  }
  const Vector phi = expand(z, model.terms);
  const double s = 1.0 + phi.dot(post.Sigma * phi);
  out.mean = post.mu.dot(phi);
  out.precision = (post.c / post.d) / s;
  out.dof = 2.0 * post.c;
  if (!std::isfinite(out.mean) || !(out.precision > 0.0))
    throw std::runtime_error("predictive: invalid predictive parameters");
  return out;
}

/// Rolling buffer of the last n_a+1 outputs and n_b applied inputs,
/// newest first.
struct NarxState {
  std::deque<double> y_hist;
  std::deque<Vector> u_hist;

  static NarxState filled(const NarxConfig& cfg, double y0, const Vector& u0)
  {
    NarxState s;
    for (int i = 0; i <= cfg.n_a; ++i) s.y_hist.push_back(y0);
    for (int i = 0; i < cfg.n_b; ++i) s.u_hist.push_back(u0);
    return s;
  }

  bool matches(const NarxConfig& cfg) const
  {
    return static_cast<int>(y_hist.size()) == cfg.n_a + 1 &&
           static_cast<int>(u_hist.size()) == cfg.n_b;
  }
};

/// Regressor z_k = (y_k..y_{k-n_a}, u_k, u_{k-1}..u_{k-n_b}) for a candidate
/// current input.
inline Vector make_regressor(const NarxState& state, const Vector& u_now,
                             const NarxConfig& cfg)
{
  if (!state.matches(cfg))
    throw std::invalid_argument("make_regressor: state/config mismatch");
  if (u_now.size() != cfg.n_u)
    throw std::invalid_argument("make_regressor: input channel mismatch");
  Vector z(cfg.regressor_len());
  Eigen::Index col = 0;
  for (double y : state.y_hist) z(col++) = y;
  for (Eigen::Index c = 0; c < cfg.n_u; ++c) z(col++) = u_now(c);
  for (const Vector& u : state.u_hist)
    for (Eigen::Index c = 0; c < cfg.n_u; ++c) z(col++) = u(c);
  return z;
}

/// Push the new output and the applied input, dropping the oldest entries.
inline NarxState shift_state(NarxState state, double y_new,
                             const Vector& u_applied)
{
  state.y_hist.push_front(y_new);
  state.y_hist.pop_back();
  if (!state.u_hist.empty()) {
    state.u_hist.push_front(u_applied);
    state.u_hist.pop_back();
  }
  return state;
}

struct Rollout {
  Matrix outputs;    // horizon x n_models predicted means
  Matrix variances;  // per-step predictive variances (same shape)
  std::vector<std::vector<NarxState>> states;  // states after each step
};

/**
 * Certainty-equivalent rollout: each step feeds the predictive mean back
 * through the shift map; real history in the initial states is consumed
 * naturally as the buffers shift.
 */
inline Rollout rollout_mean(const std::vector<FittedModel>& models,
                            std::vector<NarxState> states,
                            const std::vector<Vector>& u_plan, int horizon)
{
  if (static_cast<int>(u_plan.size()) < horizon)
    throw std::invalid_argument("rollout_mean: plan shorter than horizon");
  if (models.size() != states.size())
    throw std::invalid_argument("rollout_mean: model/state count mismatch");

  const Eigen::Index n_models = static_cast<Eigen::Index>(models.size());
  Rollout out;
  out.outputs.resize(horizon, n_models);
  out.variances.resize(horizon, n_models);
  out.states.reserve(static_cast<std::size_t>(horizon));

  for (int j = 0; j < horizon; ++j) {
    const Vector& u = u_plan[static_cast<std::size_t>(j)];
    for (Eigen::Index m = 0; m < n_models; ++m) {
      const auto& model = models[static_cast<std::size_t>(m)];
      const Vector z = make_regressor(states[static_cast<std::size_t>(m)], u,
                                      model.cfg);
      const PredictiveDist p = predictive(model, z);
      if (!std::isfinite(p.mean))
        throw std::runtime_error("rollout_mean: model blew up at step " +
                                 std::to_string(j));
      out.outputs(j, m) = p.mean;
      out.variances(j, m) = p.dof > 2.0 ? p.variance()
                                        : std::numeric_limits<double>::quiet_NaN();
    }
    for (Eigen::Index m = 0; m < n_models; ++m)
      states[static_cast<std::size_t>(m)] = shift_state(
          states[static_cast<std::size_t>(m)], out.outputs(j, m), u);
    out.states.push_back(states);
  }
  return out;
}

}  // namespace svbmpc

#endif  // SVBMPC_PREDICT_HPP
