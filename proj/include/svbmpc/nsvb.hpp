// Sparse variational Bayesian learning for the linear-in-parameters model
//
//   y_k = Phi_k omega + xi_k,      xi ~ N(0, beta^{-1})
//   omega_m ~ N(0, alpha_m^{-1}),  alpha_m ~ Gam(a0, b0),  beta ~ Gam(c0, d0)
//
// with a mean-field posterior Q(omega) Q(alpha) Q(beta). Coordinate ascent
// cycles three closed-form factor updates:
//
//   Q(omega) = N(mu, Sigma),
//     Sigma = (diag E[alpha] + E[beta] Phi'Phi)^{-1},
//     mu    = E[beta] Sigma Phi'y
//   Q(alpha_m) = Gam(a_m, b_m),
//     a_m = a0 + 1/2,  b_m = b0 + E[omega_m^2]/2
//   Q(beta) = Gam(c, d),
//     c = c0 + N/2,
//     d = d0 + (y'y - 2 mu'Phi'y + tr(E[omega omega'] Phi'Phi)) / 2
//
// and monitors the evidence lower bound, which a correct implementation
// never decreases. Irrelevant columns are pruned once their posterior
// precision E[alpha_m] diverges (automatic relevance determination) and the
// reduced model is refit until the active set is stable.

#ifndef SVBMPC_NSVB_HPP
#define SVBMPC_NSVB_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "svbmpc/numerics.hpp"

namespace svbmpc {

struct Hyperpriors {
  double a0 = 1e-5;
  double b0 = 1e-5;
  double c0 = 1e-5;
  double d0 = 1e-5;

  void validate() const
  {
    if (!(a0 > 0.0 && b0 > 0.0 && c0 > 0.0 && d0 > 0.0))
      throw std::invalid_argument("Hyperpriors: all must be positive");
  }
};

/// Variational factor parameters. Sigma is symmetric positive definite;
/// all Gamma parameters are positive.
struct Posterior {
  Vector mu;     // E[omega]
  Matrix Sigma;  // Cov[omega]
  Vector a;      // per-coefficient Gamma shapes over alpha_m
  Vector b;      // per-coefficient Gamma rates over alpha_m
  double c = 0.0;  // Gamma shape over beta
  double d = 0.0;  // Gamma rate over beta

  Eigen::Index size() const { return mu.size(); }
};

/// The posterior expectations used by the updates, the ELBO and prediction.
struct Moments {
  Vector E_omega;
  Matrix E_omega_outer;  // Sigma + mu mu'
  Vector E_alpha;        // a_m / b_m
  Vector E_ln_alpha;     // psi(a_m) - ln b_m
  double E_beta = 0.0;   // c / d
  double E_ln_beta = 0.0;  // psi(c) - ln d
};

inline Moments moments(const Posterior& post)
{
  Moments m;
  m.E_omega = post.mu;
  m.E_omega_outer = post.Sigma + post.mu * post.mu.transpose();
  const Eigen::Index n = post.a.size();
  m.E_alpha.resize(n);
  m.E_ln_alpha.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m.E_alpha(i) = post.a(i) / post.b(i);
    m.E_ln_alpha(i) = digamma(post.a(i)) - std::log(post.b(i));
  }
  m.E_beta = post.c / post.d;
  m.E_ln_beta = digamma(post.c) - std::log(post.d);
  return m;
}

struct FitReport {
  std::vector<double> elbo_trace;  // final refit phase; nondecreasing
  int iterations = 0;              // total cycles across refit phases
  bool converged = false;
  std::vector<int> pruned_term_indices;  // indices into the original columns
  int active_term_count = 0;
};

struct FitOptions {
  int max_iter = 500;
  double elbo_rel_tol = 1e-6;
  // E[alpha_m] can never exceed (a0 + 1/2)/b0 (~5e4 at the default
  // hyperpriors), so the threshold has to sit below that ceiling.
  double prune_threshold = 1e4;
  bool prune = true;
  // Test knobs: hold alpha at a fixed value (skips the alpha update and its
  // prior/entropy ELBO terms), or share a single alpha across coefficients
  // with shape a0 + M/2.
  std::optional<Vector> fixed_alpha;
  bool shared_alpha = false;
};

/// Gaussian factor update (conditional posterior of the weights).
inline std::pair<Vector, Matrix> update_omega(const Matrix& phi,
                                              const Vector& y,
                                              const Vector& E_alpha,
                                              double E_beta)
{
  if (phi.rows() != y.size())
    throw std::invalid_argument("update_omega: Phi/y dimension mismatch");
  if (phi.cols() != E_alpha.size())
    throw std::invalid_argument("update_omega: alpha dimension mismatch");
  if (!(E_beta > 0.0) || (E_alpha.array() <= 0.0).any())
    throw std::invalid_argument("update_omega: precisions must be positive");

  Matrix precision = E_beta * (phi.transpose() * phi);
  precision.diagonal() += E_alpha;
  SpdFactor factor(precision);
  Vector mu = factor.solve(E_beta * (phi.transpose() * y));
  Matrix sigma = factor.inverse();
  sigma = 0.5 * (sigma + sigma.transpose());
  return {std::move(mu), std::move(sigma)};
}

/// Gamma factor update for the per-coefficient weight precisions.
inline std::pair<Vector, Vector> update_alpha(const Hyperpriors& hyper,
                                              const Vector& E_omega_sq_diag,
                                              bool shared = false)
{
  hyper.validate();
  if ((E_omega_sq_diag.array() < 0.0).any() || !E_omega_sq_diag.allFinite())
    throw std::invalid_argument("update_alpha: invalid second moments");
  const Eigen::Index m = E_omega_sq_diag.size();
  Vector a(m), b(m);
  if (shared) {
    const double as = hyper.a0 + 0.5 * static_cast<double>(m);
    const double bs = hyper.b0 + 0.5 * E_omega_sq_diag.sum();
    a.setConstant(as);
    b.setConstant(bs);
  } else {
    a.setConstant(hyper.a0 + 0.5);
    b = hyper.b0 + 0.5 * E_omega_sq_diag.array();
  }
  return {std::move(a), std::move(b)};
}

/// Gamma factor update for the noise precision.
inline std::pair<double, double> update_beta(const Hyperpriors& hyper,
                                             const Matrix& phi,
                                             const Vector& y,
                                             const Vector& E_omega,
                                             const Matrix& E_omega_outer)
{
  hyper.validate();
  if (phi.rows() != y.size() || phi.cols() != E_omega.size() ||
      E_omega_outer.rows() != phi.cols() || E_omega_outer.cols() != phi.cols())
    throw std::invalid_argument("update_beta: dimension mismatch");
  const double n = static_cast<double>(y.size());
  const double c = hyper.c0 + 0.5 * n;
  const Matrix gram = phi.transpose() * phi;
  const double d = hyper.d0 + 0.5 * y.squaredNorm() -
                   E_omega.dot(phi.transpose() * y) +
                   0.5 * (E_omega_outer * gram).trace();
  if (!(d > 0.0) || !std::isfinite(d))
    throw std::runtime_error(
        "update_beta: nonpositive rate d = " + std::to_string(d) +
        " (inconsistent moments)");
  return {c, d};
}

namespace detail {

// E[ln Gam(x | shape, rate)] under E[x], E[ln x].
inline double e_ln_gamma(double shape, double rate, double e_ln_x, double e_x)
{
  return shape * std::log(rate) - log_gamma(shape) + (shape - 1.0) * e_ln_x -
         rate * e_x;
}

inline void check_term(double v, const char* name)
{
  if (!std::isfinite(v))
    throw std::runtime_error(std::string("elbo: non-finite term ") + name);
}

}  // namespace detail

/**
 * Evidence lower bound, assembled term by term from
 *   L = E[ln p(y|Phi,omega,beta)] + E[ln p(omega|alpha)] + E[ln p(alpha)]
 *     + E[ln p(beta)] - E[ln Q(omega)] - E[ln Q(alpha)] - E[ln Q(beta)].
 *
 * When alpha is held fixed (alpha_is_fixed) the alpha prior and entropy
 * terms drop: alpha is then a constant of the model, not a factor. With
 * shared_alpha a single Gamma factor covers all coefficients.
 */
inline double elbo(const Matrix& phi, const Vector& y, const Posterior& post,
                   const Hyperpriors& hyper, bool alpha_is_fixed = false,
                   bool shared_alpha = false,
                   const std::optional<Vector>& fixed_alpha = std::nullopt)
{
  hyper.validate();
  const double n = static_cast<double>(y.size());
  const double m = static_cast<double>(post.size());
  const double ln2pi = std::log(2.0 * std::numbers::pi);

  Moments mom = moments(post);
  if (alpha_is_fixed) {
    if (!fixed_alpha || fixed_alpha->size() != post.size())
      throw std::invalid_argument("elbo: fixed alpha values required");
    mom.E_alpha = *fixed_alpha;
    mom.E_ln_alpha = fixed_alpha->array().log();
  }

  const Matrix gram = phi.transpose() * phi;
  const double resid = y.squaredNorm() - 2.0 * mom.E_omega.dot(phi.transpose() * y) +
                       (mom.E_omega_outer * gram).trace();

  const double t_lik = 0.5 * n * (mom.E_ln_beta - ln2pi) - 0.5 * mom.E_beta * resid;
  detail::check_term(t_lik, "E_ln_likelihood");

  const double t_pw =
      -0.5 * m * ln2pi + 0.5 * mom.E_ln_alpha.sum() -
      0.5 * (mom.E_alpha.array() * mom.E_omega_outer.diagonal().array()).sum();
  detail::check_term(t_pw, "E_ln_p_omega");

  double t_pa = 0.0, t_qa = 0.0;
  if (!alpha_is_fixed && post.size() > 0) {
    if (shared_alpha) {
      t_pa = detail::e_ln_gamma(hyper.a0, hyper.b0, mom.E_ln_alpha(0),
                                mom.E_alpha(0));
      t_qa = -detail::e_ln_gamma(post.a(0), post.b(0), mom.E_ln_alpha(0),
                                 mom.E_alpha(0));
    } else {
      for (Eigen::Index i = 0; i < post.size(); ++i) {
        t_pa += detail::e_ln_gamma(hyper.a0, hyper.b0, mom.E_ln_alpha(i),
                                   mom.E_alpha(i));
        t_qa -= detail::e_ln_gamma(post.a(i), post.b(i), mom.E_ln_alpha(i),
                                   mom.E_alpha(i));
      }
    }
    detail::check_term(t_pa, "E_ln_p_alpha");
    detail::check_term(t_qa, "entropy_Q_alpha");
  }

  const double t_pb =
      detail::e_ln_gamma(hyper.c0, hyper.d0, mom.E_ln_beta, mom.E_beta);
  detail::check_term(t_pb, "E_ln_p_beta");

  double t_qw = 0.0;
  if (post.size() > 0) {
    t_qw = 0.5 * SpdFactor(post.Sigma).log_det() + 0.5 * m * (1.0 + ln2pi);
    detail::check_term(t_qw, "entropy_Q_omega");
  }

  const double t_qb =
      -detail::e_ln_gamma(post.c, post.d, mom.E_ln_beta, mom.E_beta);
  detail::check_term(t_qb, "entropy_Q_beta");

  return t_lik + t_pw + t_pa + t_pb + t_qw + t_qa + t_qb;
}

struct FitResult {
  Posterior posterior;
  FitReport report;
  std::vector<int> active_indices;  // surviving columns of the original Phi
};

/**
 * Cyclic coordinate ascent omega -> alpha -> beta with the ELBO evaluated
 * after each full cycle, followed by ARD pruning and refits until the active
 * set is stable. Non-convergence is reported, not thrown; update failures
 * propagate.
 */
inline FitResult fit(const Matrix& phi_full, const Vector& y,
                     const Hyperpriors& hyper, const FitOptions& opts = {})
{
  hyper.validate();
  if (phi_full.rows() < 1 || phi_full.cols() < 1)
    throw std::invalid_argument("fit: need N >= 1 and M >= 1");
  if (phi_full.rows() != y.size())
    throw std::invalid_argument("fit: Phi/y dimension mismatch");
  if (opts.fixed_alpha && opts.fixed_alpha->size() != phi_full.cols())
    throw std::invalid_argument("fit: fixed alpha size mismatch");
  const bool alpha_fixed = opts.fixed_alpha.has_value();

  FitResult res;
  res.active_indices.resize(static_cast<std::size_t>(phi_full.cols()));
  for (std::size_t i = 0; i < res.active_indices.size(); ++i)
    res.active_indices[i] = static_cast<int>(i);

  Matrix phi = phi_full;

  // Scale-aware start: unit weight precisions, noise precision from the
  // target variance.
  const double n = static_cast<double>(y.size());
  const double var_y = (y.array() - y.mean()).square().sum() / std::max(1.0, n);
  Vector E_alpha = alpha_fixed ? *opts.fixed_alpha
                               : Vector::Ones(phi.cols()).eval();
  double E_beta = var_y > 0.0 ? 1.0 / var_y : 1.0;

  Posterior post;
  FitReport rep;
  int total_iters = 0;

  while (true) {  // refit phases
    std::vector<double> trace;
    bool phase_converged = false;

    while (total_iters < opts.max_iter) {
      ++total_iters;
      auto [mu, sigma] = update_omega(phi, y, E_alpha, E_beta);
      post.mu = std::move(mu);
      post.Sigma = std::move(sigma);

      const Vector e_w2 =
          post.Sigma.diagonal() + post.mu.cwiseProduct(post.mu);
      if (alpha_fixed) {
        // Keep Gamma parameters consistent with the held value so that
        // moments() stays meaningful; they are not used by the updates.
        post.a = Vector::Constant(phi.cols(), 1.0);
        post.b = E_alpha.cwiseInverse();
      } else {
        auto [a, b] = update_alpha(hyper, e_w2, opts.shared_alpha);
        post.a = std::move(a);
        post.b = std::move(b);
        E_alpha = post.a.cwiseQuotient(post.b);
      }

      const Matrix outer = post.Sigma + post.mu * post.mu.transpose();
      auto [c, d] = update_beta(hyper, phi, y, post.mu, outer);
      post.c = c;
      post.d = d;
      E_beta = c / d;

      const double l = elbo(phi, y, post, hyper, alpha_fixed,
                            opts.shared_alpha,
                            alpha_fixed ? std::optional<Vector>(E_alpha)
                                        : std::nullopt);
      const bool done =
          !trace.empty() &&
          std::abs(l - trace.back()) <
              opts.elbo_rel_tol * std::max(1.0, std::abs(l));
      trace.push_back(l);
      if (done) {
        phase_converged = true;
        break;
      }
    }

    rep.elbo_trace = trace;
    rep.converged = phase_converged;

    if (!opts.prune || alpha_fixed) break;

    // ARD prune: drop columns whose posterior precision diverged.
    std::vector<int> keep, drop;
    for (Eigen::Index i = 0; i < E_alpha.size(); ++i) {
      if (E_alpha(i) > opts.prune_threshold)
        drop.push_back(static_cast<int>(i));
      else
        keep.push_back(static_cast<int>(i));
    }
    if (drop.empty()) break;

    for (int i : drop)
      rep.pruned_term_indices.push_back(
          res.active_indices[static_cast<std::size_t>(i)]);

    std::vector<int> new_active;
    new_active.reserve(keep.size());
    Matrix phi_red(phi.rows(), static_cast<Eigen::Index>(keep.size()));
    Vector ea_red(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) {
      phi_red.col(static_cast<Eigen::Index>(j)) = phi.col(keep[j]);
      ea_red(static_cast<Eigen::Index>(j)) = E_alpha(keep[j]);
      new_active.push_back(res.active_indices[static_cast<std::size_t>(keep[j])]);
    }
    phi = std::move(phi_red);
    E_alpha = std::move(ea_red);
    res.active_indices = std::move(new_active);

    if (phi.cols() == 0) {
      // Everything pruned: the all-zero model. Keep the beta factor from the
      // raw targets.
      post.mu.resize(0);
      post.Sigma.resize(0, 0);
      post.a.resize(0);
      post.b.resize(0);
      auto [c, d] = update_beta(hyper, Matrix(y.size(), 0), y, Vector(),
                                Matrix(0, 0));
      post.c = c;
      post.d = d;
      rep.elbo_trace.clear();
      rep.converged = true;
      break;
    }
    if (total_iters >= opts.max_iter) break;
  }

  std::sort(rep.pruned_term_indices.begin(), rep.pruned_term_indices.end());
  rep.iterations = total_iters;
  rep.active_term_count = static_cast<int>(res.active_indices.size());
  res.posterior = std::move(post);
  res.report = std::move(rep);
  return res;
}

}  // namespace svbmpc

#endif  // SVBMPC_NSVB_HPP
