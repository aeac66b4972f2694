#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "svbmpc/dictionary.hpp"
#include "svbmpc/nsvb.hpp"

using namespace svbmpc;

namespace {

// Sparse ground truth y_{k+1} = 0.5 y_k + 0.2 u_k + noise, expanded in the
// 15-term degree-2 dictionary over (y_k, y_{k-1}, u_k, u_{k-1}).
struct SparseProblem {
  Matrix phi;
  Vector y;
  std::vector<BasisTerm> terms;
  int idx_yk = -1;
  int idx_uk = -1;
};

SparseProblem make_sparse_problem(std::uint64_t seed, int n_samples,
                                  double noise_std)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;

  const int len = n_samples + 3;
  std::vector<double> y(static_cast<std::size_t>(len), 0.0);
  Matrix u(len, 1);
  for (int k = 0; k < len; ++k) u(k, 0) = gauss(rng);
  for (int k = 0; k + 1 < len; ++k)
    y[static_cast<std::size_t>(k + 1)] = 0.5 * y[static_cast<std::size_t>(k)] +
                                         0.2 * u(k, 0) +
                                         noise_std * gauss(rng);

  NarxConfig cfg;
  cfg.n_a = 1;
  cfg.n_b = 1;
  cfg.n_u = 1;
  cfg.degree = 2;
  cfg.include_bias = true;

  const RegressorSet set = build_regressors(y, u, cfg);
  SparseProblem p;
  p.terms = enumerate_terms(cfg);
  p.phi = build_design(set.regressors, p.terms);
  p.y = set.targets;
  for (std::size_t i = 0; i < p.terms.size(); ++i) {
    if (p.terms[i].name == "y[k]") p.idx_yk = static_cast<int>(i);
    if (p.terms[i].name == "u[k]") p.idx_uk = static_cast<int>(i);
  }
  REQUIRE(p.terms.size() == 15);
  REQUIRE(p.idx_yk >= 0);
  REQUIRE(p.idx_uk >= 0);
  return p;
}

}  // namespace

TEST_CASE("update_omega hand-checked cases")
{
  {
    // Phi = I2, unit precisions: Sigma = I/2, mu = y/2.
    const Matrix phi = Matrix::Identity(2, 2);
    const Vector y = Vector::Ones(2);
    const auto [mu, sigma] = update_omega(phi, y, Vector::Ones(2), 1.0);
    CHECK((sigma - 0.5 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((mu - 0.5 * Vector::Ones(2)).cwiseAbs().maxCoeff() < 1e-12);
  }
  {
    // Vanishing likelihood: the prior dominates and mu collapses to zero.
    const Matrix phi = Matrix::Identity(2, 2);
    const Vector y = 10.0 * Vector::Ones(2);
    const auto [mu, sigma] = update_omega(phi, y, Vector::Ones(2), 1e-12);
    CHECK(mu.cwiseAbs().maxCoeff() < 1e-9);
  }
  {
    // Single column of ones with a nearly flat prior: mu -> sample mean.
    Matrix phi(3, 1);
    phi << 1, 1, 1;
    Vector y(3);
    y << 1, 2, 3;
    const auto [mu, sigma] =
        update_omega(phi, y, Vector::Constant(1, 1e-9), 1.0);
    CHECK(mu(0) == Catch::Approx(2.0).margin(1e-8));
  }
}

TEST_CASE("update_alpha formula substitution")
{
  Hyperpriors hyper;
  {
    const auto [a, b] = update_alpha(hyper, Vector::Zero(1));
    CHECK(a(0) == Catch::Approx(0.50001).margin(1e-12));
    CHECK(b(0) == Catch::Approx(1e-5).margin(1e-20));
    CHECK(a(0) / b(0) == Catch::Approx(5.0001e4).epsilon(1e-9));
  }
  {
    const auto [a, b] = update_alpha(hyper, Vector::Constant(1, 2.0));
    CHECK(b(0) == Catch::Approx(1.00001).margin(1e-12));
  }
}

TEST_CASE("update_beta hand-expanded cases")
{
  Hyperpriors hyper;
  {
    // Empty data: posterior equals the prior.
    const auto [c, d] =
        update_beta(hyper, Matrix(0, 0), Vector(), Vector(), Matrix(0, 0));
    CHECK(c == Catch::Approx(hyper.c0).margin(1e-18));
    CHECK(d == Catch::Approx(hyper.d0).margin(1e-18));
  }
  {
    // Perfect fit: the residual term vanishes.
    const Matrix phi = Matrix::Identity(2, 2);
    const Vector y = Vector::Ones(2);
    const Matrix outer = y * y.transpose();  // Sigma = 0, mu = y
    const auto [c, d] = update_beta(hyper, phi, y, y, outer);
    CHECK(c == Catch::Approx(hyper.c0 + 1.0).margin(1e-15));
    CHECK(d == Catch::Approx(hyper.d0).margin(1e-12));
  }
  {
    // Pure residual.
    Matrix phi(1, 1);
    phi << 1;
    Vector y(1);
    y << 1;
    const auto [c, d] =
        update_beta(hyper, phi, y, Vector::Zero(1), Matrix::Zero(1, 1));
    CHECK(d == Catch::Approx(hyper.d0 + 0.5).margin(1e-15));
  }
}

TEST_CASE("moments formulas")
{
  Posterior post;
  post.mu = Vector::Zero(1);
  post.Sigma = Matrix::Identity(1, 1);
  post.a = Vector::Constant(1, 2.0);
  post.b = Vector::Constant(1, 4.0);
  post.c = 3.0;
  post.d = 3.0;
  const Moments m = moments(post);
  CHECK(m.E_alpha(0) == Catch::Approx(0.5).margin(1e-15));
  CHECK(m.E_ln_alpha(0) ==
        Catch::Approx(digamma(2.0) - std::log(4.0)).margin(1e-12));
  CHECK(m.E_ln_alpha(0) == Catch::Approx(-0.96351).margin(1e-5));
  CHECK(m.E_beta == Catch::Approx(1.0).margin(1e-15));
  CHECK((m.E_omega_outer - Matrix::Identity(1, 1)).cwiseAbs().maxCoeff() <
        1e-15);
}

TEST_CASE("fit recovers the sparse ground truth")
{
  const SparseProblem p = make_sparse_problem(2024, 500, 0.01);
  const FitResult res = fit(p.phi, p.y, Hyperpriors{});

  REQUIRE(res.active_indices.size() == 2);
  CHECK(std::count(res.active_indices.begin(), res.active_indices.end(),
                   p.idx_yk) == 1);
  CHECK(std::count(res.active_indices.begin(), res.active_indices.end(),
                   p.idx_uk) == 1);
  for (std::size_t i = 0; i < res.active_indices.size(); ++i) {
    const double truth = res.active_indices[i] == p.idx_yk ? 0.5 : 0.2;
    CHECK(std::abs(res.posterior.mu(static_cast<Eigen::Index>(i)) - truth) <
          0.02);
  }
  CHECK(res.report.active_term_count == 2);
  CHECK(res.report.pruned_term_indices.size() == 13);
}

TEST_CASE("fit on zero targets prunes everything")
{
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss;
  Matrix phi(200, 4);
  for (int i = 0; i < 200; ++i)
    for (int j = 0; j < 4; ++j) phi(i, j) = gauss(rng);
  const Vector y = Vector::Zero(200);
  const FitResult res = fit(phi, y, Hyperpriors{});
  CHECK(res.active_indices.empty());
  CHECK(res.report.active_term_count == 0);
}

TEST_CASE("ridge oracle: fixed alpha and skipped pruning reproduce the "
          "conjugate posterior")
{
  std::mt19937_64 rng(77);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 30 + static_cast<int>(rng() % 40);
    const int m = 2 + static_cast<int>(rng() % 6);
    Matrix phi(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) phi(i, j) = gauss(rng);
    Vector y(n);
    for (int i = 0; i < n; ++i) y(i) = gauss(rng);
    Vector alpha(m);
    for (int j = 0; j < m; ++j) alpha(j) = 0.1 + std::abs(gauss(rng));
    const double beta = 2.3;

    const auto [mu, sigma] = update_omega(phi, y, alpha, beta);

    // Independent route: dense normal equations via full-pivot LU.
    Matrix reg = beta * (phi.transpose() * phi);
    reg.diagonal() += alpha;
    const Vector mu_ridge =
        Eigen::FullPivLU<Matrix>(reg).solve(beta * phi.transpose() * y);
    CHECK((mu - mu_ridge).norm() <= 1e-8 * std::max(1.0, mu_ridge.norm()));
  }
}

TEST_CASE("elbo is monotone along coordinate ascent")
{
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SparseProblem p = make_sparse_problem(seed, 300, 0.05);
    const FitResult res = fit(p.phi, p.y, Hyperpriors{});
    const auto& trace = res.report.elbo_trace;
    REQUIRE(trace.size() >= 2);
    for (std::size_t i = 1; i < trace.size(); ++i)
      CHECK(trace[i] >= trace[i - 1] - 1e-8 * std::abs(trace[i]));
  }
}

TEST_CASE("elbo with no data equals a nonpositive negative KL")
{
  Posterior post;
  post.mu = Vector::Zero(2);
  post.Sigma = Matrix::Identity(2, 2);
  post.a = Vector::Constant(2, 1e-5 + 0.5);
  post.b = Vector::Constant(2, 1e-5 + 0.5);
  post.c = 1e-5;
  post.d = 1e-5;
  const double l = elbo(Matrix(0, 2), Vector(), post, Hyperpriors{});
  CHECK(std::isfinite(l));
  CHECK(l <= 1e-9);
}

TEST_CASE("quadrature oracle bounds the fixed-alpha evidence")
{
  // One coefficient, alpha held at 1; dense 2-D grid over (omega, beta)
  // computes the exact log evidence the bound must stay below.
  std::mt19937_64 rng(31);
  std::normal_distribution<double> gauss;
  const int n = 25;
  Matrix phi(n, 1);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    phi(i, 0) = gauss(rng);
    y(i) = 1.3 * phi(i, 0) + 0.3 * gauss(rng);
  }
  const Hyperpriors hyper;
  FitOptions opts;
  opts.fixed_alpha = Vector::Ones(1);
  opts.prune = false;
  const FitResult res = fit(phi, y, hyper, opts);
  REQUIRE(res.report.converged);
  const double bound = res.report.elbo_trace.back();

  // log p(y) = log int N(y | phi w, beta^-1) N(w|0,1) Gam(beta|c0,d0) dw dbeta
  const double w_hat = res.posterior.mu(0);
  const double w_sd = std::sqrt(res.posterior.Sigma(0, 0));
  const double ln_beta_hat = std::log(res.posterior.c / res.posterior.d);
  const int grid = 801;
  std::vector<double> log_terms;
  log_terms.reserve(static_cast<std::size_t>(grid) * grid);
  const double w_lo = w_hat - 12.0 * w_sd, w_hi = w_hat + 12.0 * w_sd;
  const double lb_lo = ln_beta_hat - 14.0, lb_hi = ln_beta_hat + 10.0;
  const double dw = (w_hi - w_lo) / (grid - 1);
  const double dlb = (lb_hi - lb_lo) / (grid - 1);
  const double phi2 = phi.squaredNorm();
  const double phiy = (phi.transpose() * y)(0);
  const double yy = y.squaredNorm();
  const double ln2pi = std::log(2.0 * std::numbers::pi);
  for (int a = 0; a < grid; ++a) {
    const double w = w_lo + a * dw;
    const double sse = yy - 2.0 * w * phiy + w * w * phi2;
    for (int b = 0; b < grid; ++b) {
      const double lb = lb_lo + b * dlb;
      const double beta = std::exp(lb);
      double lt = 0.5 * n * (lb - ln2pi) - 0.5 * beta * sse;   // likelihood
      lt += -0.5 * ln2pi - 0.5 * w * w;                        // N(w|0,1)
      lt += hyper.c0 * std::log(hyper.d0) - log_gamma(hyper.c0) +
            (hyper.c0 - 1.0) * lb - hyper.d0 * beta;           // Gam(beta)
      lt += lb;  // Jacobian of the log-beta substitution
      log_terms.push_back(lt);
    }
  }
  const double max_lt = *std::max_element(log_terms.begin(), log_terms.end());
  double acc = 0.0;
  for (double lt : log_terms) acc += std::exp(lt - max_lt);
  const double log_evidence =
      max_lt + std::log(acc) + std::log(dw) + std::log(dlb);

  const double gap = log_evidence - bound;
  CHECK(gap >= -1e-6);
  CHECK(gap <= 0.5);
}

TEST_CASE("permutation equivariance of the posterior")
{
  const SparseProblem p = make_sparse_problem(11, 250, 0.05);
  FitOptions opts;
  opts.prune = false;
  const FitResult base = fit(p.phi, p.y, Hyperpriors{}, opts);

  std::vector<int> perm(static_cast<std::size_t>(p.phi.cols()));
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(3);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix phi_p(p.phi.rows(), p.phi.cols());
  for (std::size_t j = 0; j < perm.size(); ++j)
    phi_p.col(static_cast<Eigen::Index>(j)) = p.phi.col(perm[j]);
  const FitResult permuted = fit(phi_p, p.y, Hyperpriors{}, opts);

  REQUIRE(base.report.converged);
  REQUIRE(permuted.report.converged);
  CHECK(std::abs(base.report.elbo_trace.back() -
                 permuted.report.elbo_trace.back()) <
        1e-8 * std::abs(base.report.elbo_trace.back()));
  for (std::size_t j = 0; j < perm.size(); ++j) {
    CHECK(permuted.posterior.mu(static_cast<Eigen::Index>(j)) ==
          Catch::Approx(base.posterior.mu(perm[j])).margin(1e-7));
    for (std::size_t i = 0; i < perm.size(); ++i)
      CHECK(permuted.posterior.Sigma(static_cast<Eigen::Index>(i),
                                     static_cast<Eigen::Index>(j)) ==
            Catch::Approx(base.posterior.Sigma(perm[i], perm[j]))
                .margin(1e-7));
  }
}

TEST_CASE("ARD separates active and inactive precisions")
{
  const SparseProblem p = make_sparse_problem(555, 500, 0.01);
  FitOptions opts;
  opts.prune = false;
  const FitResult res = fit(p.phi, p.y, Hyperpriors{}, opts);
  const Vector e_alpha = res.posterior.a.cwiseQuotient(res.posterior.b);
  for (Eigen::Index i = 0; i < e_alpha.size(); ++i) {
    if (i == p.idx_yk || i == p.idx_uk)
      CHECK(e_alpha(i) < 1e2);
    else
      CHECK(e_alpha(i) > 1e4);
  }
}

TEST_CASE("shared-alpha mode uses the pooled second moment")
{
  const SparseProblem p = make_sparse_problem(4, 200, 0.05);
  FitOptions opts;
  opts.prune = false;
  opts.shared_alpha = true;
  const FitResult res = fit(p.phi, p.y, Hyperpriors{}, opts);
  REQUIRE(res.report.converged);
  // All coefficients share one Gamma factor with shape a0 + M/2.
  for (Eigen::Index i = 0; i < res.posterior.a.size(); ++i) {
    CHECK(res.posterior.a(i) ==
          Catch::Approx(1e-5 + 0.5 * p.phi.cols()).margin(1e-12));
    CHECK(res.posterior.b(i) == Catch::Approx(res.posterior.b(0)).margin(0.0));
  }
  const auto& trace = res.report.elbo_trace;
  for (std::size_t i = 1; i < trace.size(); ++i)
    CHECK(trace[i] >= trace[i - 1] - 1e-8 * std::abs(trace[i]));
}

TEST_CASE("fit input validation")
{
  CHECK_THROWS_AS(fit(Matrix(0, 1), Vector(), Hyperpriors{}),
                  std::invalid_argument);
  Hyperpriors bad;
  bad.a0 = 0.0;
  CHECK_THROWS_AS(fit(Matrix::Identity(2, 2), Vector::Ones(2), bad),
                  std::invalid_argument);
}
