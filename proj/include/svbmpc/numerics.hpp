// Dense numeric kernels shared by the identification and control code:
// RK4 integration, discrete Riccati fixed-point solve, digamma/log-gamma,
// SPD solves with log-determinant, Newton root finding and finite-difference
// Jacobians. Dimensions here are small (a few hundred at most), so everything
// is plain dense Eigen.

#ifndef SVBMPC_NUMERICS_HPP
#define SVBMPC_NUMERICS_HPP

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace svbmpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Default finite-difference perturbation used for Jacobians and model
// linearization.
inline constexpr double kDefaultFdDelta = 0.015;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

/**
 * One classical 4th-order Runge-Kutta step of x' = f(x, u) with u held
 * constant over the step.
 */
template <typename Field>
Vector rk4_step(Field&& f, const Vector& x, const Vector& u, double dt)
{
  if (!(dt > 0.0))
    throw std::invalid_argument("rk4_step: dt must be positive");

  const Vector k1 = f(x, u);
  const Vector k2 = f(x + 0.5 * dt * k1, u);
  const Vector k3 = f(x + 0.5 * dt * k2, u);
  const Vector k4 = f(x + dt * k3, u);
  Vector next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite())
    throw std::runtime_error("rk4_step: non-finite derivative evaluation");
  return next;
}

/**
 * Digamma function psi(x) = d/dx ln Gamma(x) for x > 0.
 *
 * Recurrence up to x >= 8, then the asymptotic series; absolute error is
 * below 1e-12 over the range used here.
 */
inline double digamma(double x)
{
  if (!(x > 0.0) || !std::isfinite(x))
    throw std::domain_error("digamma: requires x > 0");

  double acc = 0.0;
  while (x < 8.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // ln x - 1/(2x) - sum B_{2n} / (2n x^{2n})
  const double series =
      std::log(x) - 0.5 * inv -
      inv2 * (1.0 / 12.0 -
              inv2 * (1.0 / 120.0 -
                      inv2 * (1.0 / 252.0 -
                              inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
  return acc + series;
}

/// ln Gamma(x) for x > 0.
inline double log_gamma(double x)
{
  if (!(x > 0.0) || !std::isfinite(x))
    throw std::domain_error("log_gamma: requires x > 0");
  return std::lgamma(x);
}

/**
 * Cholesky factorization of a symmetric positive definite matrix with a
 * small jitter retry. The precision matrix of the weight posterior can be
 * near-singular after pruning, so on a failed pivot we add
 * 1e-10 * trace/n * I (escalating across at most 3 retries) before failing.
 */
class SpdFactor {
 public:
  explicit SpdFactor(const Matrix& m)
  {
    if (m.rows() != m.cols())
      throw std::invalid_argument("SpdFactor: matrix must be square");
    if (!m.allFinite())
      throw std::invalid_argument("SpdFactor: non-finite entries");
    const Eigen::Index n = m.rows();
    if (n == 0)
      throw std::invalid_argument("SpdFactor: empty matrix");

    const double base = 1e-10 * m.trace() / static_cast<double>(n);
    double jitter = 0.0;
    for (int attempt = 0; attempt <= 3; ++attempt) {
      Matrix work = m;
      if (attempt > 0) {
        jitter = base * std::pow(10.0, attempt - 1);
        work.diagonal().array() += jitter;
      }
      llt_.compute(work);
      if (llt_.info() == Eigen::Success) {
        jitter_ = jitter;
        return;
      }
    }
    throw std::runtime_error(
        "SpdFactor: matrix not positive definite after jitter retries");
  }

  Vector solve(const Vector& b) const { return llt_.solve(b); }
  Matrix solve(const Matrix& b) const { return llt_.solve(b); }

  Matrix inverse() const
  {
    const Eigen::Index n = llt_.matrixL().rows();
    return llt_.solve(Matrix::Identity(n, n));
  }

  double log_det() const
  {
    return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
  }

  double jitter_applied() const { return jitter_; }

 private:
  Eigen::LLT<Matrix> llt_;
  double jitter_ = 0.0;
};

/// Solve M x = b for symmetric positive definite M.
inline Vector spd_solve(const Matrix& m, const Vector& b)
{
  if (m.rows() != b.size())
    throw std::invalid_argument("spd_solve: dimension mismatch");
  return SpdFactor(m).solve(b);
}

/// Largest eigenvalue magnitude.
inline double spectral_radius(const Matrix& a)
{
  if (a.rows() != a.cols())
    throw std::invalid_argument("spectral_radius: matrix must be square");
  Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

struct DareResult {
  Matrix P;  // fixed point of the Riccati recursion
  Matrix K;  // gain, K = (R + B'PB)^{-1} B'PA
  int iterations = 0;
};

/**
 * Discrete algebraic Riccati equation solved by fixed-point iteration
 *   P <- Q + A'PA - A'PB (R + B'PB)^{-1} B'PA
 * starting from P = Q. Dimensions are tiny (n <= 6 in this project), so the
 * plain recursion with tolerance 1e-9 is preferred over a Schur method.
 * Throws if the recursion fails to settle (unstabilizable or the control is
 * too expensive to stabilize within the iteration budget).
 */
inline DareResult solve_dare(const Matrix& a, const Matrix& b, const Matrix& q,
                             const Matrix& r, double tol = 1e-9,
                             int max_iter = 10000)
{
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.cols();
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n ||
      r.rows() != m || r.cols() != m)
    throw std::invalid_argument("solve_dare: inconsistent dimensions");
  const double qs = std::max(1.0, q.cwiseAbs().maxCoeff());
  const double rs = std::max(1.0, r.cwiseAbs().maxCoeff());
  if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-8 * qs)
    throw std::invalid_argument("solve_dare: Q must be symmetric");
  if ((r - r.transpose()).cwiseAbs().maxCoeff() > 1e-8 * rs)
    throw std::invalid_argument("solve_dare: R must be symmetric");
  {
    Eigen::LLT<Matrix> rchk(r);
    if (rchk.info() != Eigen::Success)
      throw std::invalid_argument("solve_dare: R must be positive definite");
  }

  Matrix p = q;
  for (int it = 1; it <= max_iter; ++it) {
    const Matrix bt_p = b.transpose() * p;
    const Matrix gram = r + bt_p * b;         // R + B'PB, SPD
    const Matrix k = SpdFactor(gram).solve(bt_p * a);
    Matrix next = q + a.transpose() * p * a - a.transpose() * p * b * k;
    next = 0.5 * (next + next.transpose());   // keep symmetric
    const double diff = (next - p).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, p.cwiseAbs().maxCoeff());
    p = next;
    if (!p.allFinite() || p.cwiseAbs().maxCoeff() > 1e14)
      throw std::runtime_error("solve_dare: recursion diverged (unstabilizable)");
    if (diff < tol * scale) {
      DareResult out;
      out.P = p;
      const Matrix bt_p2 = b.transpose() * p;
      out.K = SpdFactor(r + bt_p2 * b).solve(bt_p2 * a);
      out.iterations = it;
      if (spectral_radius(a - b * out.K) >= 1.0)
        throw std::runtime_error("solve_dare: closed loop not stable");
      return out;
    }
  }
  throw std::runtime_error(
      "solve_dare: no convergence within iteration budget (unstabilizable)");
}

/**
 * Central-difference Jacobian: entry (i,j) = (g_i(x+d e_j) - g_i(x-d e_j)) / 2d.
 */
template <typename Fn>
Matrix fd_jacobian(Fn&& g, const Vector& x, double delta = kDefaultFdDelta)
{
  if (!(delta > 0.0))
    throw std::invalid_argument("fd_jacobian: delta must be positive");
  const Vector g0 = g(x);
  const Eigen::Index rows = g0.size();
  const Eigen::Index cols = x.size();
  Matrix jac(rows, cols);
  Vector xp = x, xm = x;
  for (Eigen::Index j = 0; j < cols; ++j) {
    xp(j) = x(j) + delta;
    xm(j) = x(j) - delta;
    const Vector gp = g(xp);
    const Vector gm = g(xm);
    jac.col(j) = (gp - gm) / (2.0 * delta);
    xp(j) = x(j);
    xm(j) = x(j);
  }
  if (!jac.allFinite())
    throw std::runtime_error("fd_jacobian: non-finite evaluation");
  return jac;
}

/**
 * Newton iteration on g(x) = 0 with finite-difference Jacobians.
 * Stops when ||g(x)|| <= tol; throws on a singular Jacobian or when the
 * iteration budget runs out.
 */
template <typename Fn>
Vector newton_root(Fn&& g, Vector x, double tol = 1e-10, int max_iter = 100,
                   double fd_delta = kDefaultFdDelta)
{
  for (int it = 0; it <= max_iter; ++it) {
    const Vector gx = g(x);
    if (!gx.allFinite())
      throw std::runtime_error("newton_root: non-finite residual");
    if (gx.norm() <= tol)
      return x;
    if (it == max_iter)
      break;
    const Matrix jac = fd_jacobian(g, x, fd_delta);
    Eigen::FullPivLU<Matrix> lu(jac);
    if (!lu.isInvertible())
      throw std::runtime_error("newton_root: singular Jacobian");
    x += lu.solve(-gx);
  }
  throw std::runtime_error("newton_root: no convergence within max iterations");
}

}  // namespace svbmpc

#endif  // SVBMPC_NUMERICS_HPP
