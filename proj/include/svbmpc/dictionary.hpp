// NARX regressor construction and polynomial dictionary expansion.
//
// A regressor at time k stacks lagged outputs and inputs,
//   z_k = (y_k, ..., y_{k-n_a}, u_k, ..., u_{k-n_b}),
// and the design matrix row Phi_k holds every monomial of z_k up to the
// configured total degree. Models are MISO: one dictionary per controlled
// output, regressing on that output's own lags and all input channels.

#ifndef SVBMPC_DICTIONARY_HPP
#define SVBMPC_DICTIONARY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "svbmpc/numerics.hpp"

namespace svbmpc {

struct NarxConfig {
  int n_a = 2;         // output lags (uses y_k .. y_{k-n_a})
  int n_b = 0;         // input lags (uses u_k .. u_{k-n_b})
  int n_u = 1;         // input channels
  int n_y = 1;         // output channels per model (MISO: 1)
  int degree = 2;      // max total monomial degree
  bool include_bias = true;
  int max_terms = 500;

  int regressor_len() const { return (n_a + 1) * n_y + (n_b + 1) * n_u; }
  int max_lag() const { return std::max(n_a, n_b); }

  void validate() const
  {
    if (n_a < 0 || n_b < 0)
      throw std::invalid_argument("NarxConfig: lag counts must be >= 0");
    if (n_u < 1 || n_y < 1)
      throw std::invalid_argument("NarxConfig: channel counts must be >= 1");
    if (degree < 1)
      throw std::invalid_argument("NarxConfig: degree must be >= 1");
    if (max_terms < 1)
      throw std::invalid_argument("NarxConfig: max_terms must be >= 1");
  }
};

/// One monomial over the regressor entries, kept as an exponent multi-index.
struct BasisTerm {
  std::vector<int> exponents;
  std::string name;

  int degree() const
  {
    int d = 0;
    for (int e : exponents) d += e;
    return d;
  }
};

/// Human-readable labels for the regressor slots, e.g. "y[k-1]", "u2[k]".
inline std::vector<std::string> regressor_labels(const NarxConfig& cfg)
{
  cfg.validate();
  std::vector<std::string> labels;
  labels.reserve(static_cast<std::size_t>(cfg.regressor_len()));
  for (int lag = 0; lag <= cfg.n_a; ++lag) {
    for (int c = 0; c < cfg.n_y; ++c) {
      std::string base = cfg.n_y == 1 ? "y" : "y" + std::to_string(c + 1);
      labels.push_back(lag == 0 ? base + "[k]"
                                : base + "[k-" + std::to_string(lag) + "]");
    }
  }
  for (int lag = 0; lag <= cfg.n_b; ++lag) {
    for (int c = 0; c < cfg.n_u; ++c) {
      std::string base = cfg.n_u == 1 ? "u" : "u" + std::to_string(c + 1);
      labels.push_back(lag == 0 ? base + "[k]"
                                : base + "[k-" + std::to_string(lag) + "]");
    }
  }
  return labels;
}

inline std::string term_name(const std::vector<int>& exponents,
                             const std::vector<std::string>& labels)
{
  std::string out;
  for (std::size_t j = 0; j < exponents.size(); ++j) {
    if (exponents[j] == 0) continue;
    if (!out.empty()) out += "*";
    out += labels[j];
    if (exponents[j] > 1) out += "^" + std::to_string(exponents[j]);
  }
  return out.empty() ? "1" : out;
}

namespace detail {

inline void enumerate_compositions(int remaining, std::size_t slot,
                                   std::vector<int>& current,
                                   std::vector<std::vector<int>>& out)
{
  if (slot + 1 == current.size()) {
    current[slot] = remaining;
    out.push_back(current);
    return;
  }
  for (int e = remaining; e >= 0; --e) {
    current[slot] = e;
    enumerate_compositions(remaining - e, slot + 1, current, out);
  }
  current[slot] = 0;
}

}  // namespace detail

/**
 * All monomials of total degree 1..cfg.degree over the regressor entries,
 * plus the bias term when enabled. Ordering is deterministic: by total degree,
 * then lexicographic on the exponent multi-index (first slot most
 * significant, highest exponent first).
 */
inline std::vector<BasisTerm> enumerate_terms(const NarxConfig& cfg)
{
  cfg.validate();
  const int n = cfg.regressor_len();
  const std::vector<std::string> labels = regressor_labels(cfg);

  std::vector<BasisTerm> terms;
  if (cfg.include_bias)
    terms.push_back(BasisTerm{std::vector<int>(n, 0), "1"});

  for (int d = 1; d <= cfg.degree; ++d) {
    std::vector<std::vector<int>> expo;
    std::vector<int> current(static_cast<std::size_t>(n), 0);
    detail::enumerate_compositions(d, 0, current, expo);
    for (auto& e : expo)
      terms.push_back(BasisTerm{e, term_name(e, labels)});
    if (terms.size() > static_cast<std::size_t>(cfg.max_terms))
      throw std::runtime_error("enumerate_terms: dictionary too large (" +
                               std::to_string(terms.size()) + " > cap " +
                               std::to_string(cfg.max_terms) + ")");
  }
  return terms;
}

/// Evaluate every term at one regressor: Phi_k[m] = prod_j z_j^{e_{m,j}}.
inline Vector expand(const Vector& z, const std::vector<BasisTerm>& terms)
{
  if (!z.allFinite())
    throw std::invalid_argument("expand: non-finite regressor");
  Vector row(static_cast<Eigen::Index>(terms.size()));
  for (std::size_t m = 0; m < terms.size(); ++m) {
    const auto& e = terms[m].exponents;
    if (static_cast<Eigen::Index>(e.size()) != z.size())
      throw std::invalid_argument("expand: exponent length mismatch");
    double v = 1.0;
    for (std::size_t j = 0; j < e.size(); ++j)
      for (int p = 0; p < e[j]; ++p) v *= z(static_cast<Eigen::Index>(j));
    row(static_cast<Eigen::Index>(m)) = v;
  }
  if (!row.allFinite())
    throw std::runtime_error("expand: expansion overflowed to non-finite");
  return row;
}

/// Affine per-entry shift/scale of regressors, fit on training data.
/// Kelvin-scale entries raised to powers otherwise destroy conditioning.
struct Standardizer {
  Vector mean;
  Vector scale;
  bool enabled = false;

  static Standardizer fit(const Matrix& regressors, bool enable = true)
  {
    Standardizer s;
    s.enabled = enable;
    const Eigen::Index n = regressors.cols();
    s.mean = Vector::Zero(n);
    s.scale = Vector::Ones(n);
    if (!enable || regressors.rows() < 2) return s;
    s.mean = regressors.colwise().mean();
    for (Eigen::Index j = 0; j < n; ++j) {
      const double var =
          (regressors.col(j).array() - s.mean(j)).square().sum() /
          static_cast<double>(regressors.rows() - 1);
      s.scale(j) = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
  }

  Vector apply(const Vector& z) const
  {
    if (!enabled) return z;
    return (z - mean).cwiseQuotient(scale);
  }

  Matrix apply_rows(const Matrix& regressors) const
  {
    if (!enabled) return regressors;
    Matrix out = regressors;
    out.rowwise() -= mean.transpose();
    out.array().rowwise() /= scale.transpose().array();
    return out;
  }
};

struct RegressorSet {
  Vector targets;     // y_{k+1} for each valid k
  Matrix regressors;  // one z_k per row
};

/**
 * Pair each target y_{k+1} with its regressor z_k. The series must share a
 * common time base; N = len - max(n_a, n_b) - 1 pairs result.
 */
inline RegressorSet build_regressors(const std::vector<double>& y_series,
                                     const Matrix& u_series,
                                     const NarxConfig& cfg)
{
  cfg.validate();
  if (cfg.n_y != 1)
    throw std::invalid_argument("build_regressors: one output channel per model");
  const Eigen::Index len = static_cast<Eigen::Index>(y_series.size());
  if (u_series.rows() != len)
    throw std::invalid_argument("build_regressors: series lengths differ");
  if (u_series.cols() != cfg.n_u)
    throw std::invalid_argument("build_regressors: input channel mismatch");
  const int lag = cfg.max_lag();
  if (len < lag + 2)
    throw std::invalid_argument("build_regressors: series too short");
  for (double v : y_series)
    if (!std::isfinite(v))
      throw std::invalid_argument("build_regressors: NaN in output data");
  if (!u_series.allFinite())
    throw std::invalid_argument("build_regressors: NaN in input data");

  const Eigen::Index n_pairs = len - lag - 1;
  RegressorSet out;
  out.targets.resize(n_pairs);
  out.regressors.resize(n_pairs, cfg.regressor_len());
  for (Eigen::Index i = 0; i < n_pairs; ++i) {
    const Eigen::Index k = lag + i;
    out.targets(i) = y_series[static_cast<std::size_t>(k + 1)];
    Eigen::Index col = 0;
    for (int l = 0; l <= cfg.n_a; ++l)
      out.regressors(i, col++) = y_series[static_cast<std::size_t>(k - l)];
    for (int l = 0; l <= cfg.n_b; ++l)
      for (int c = 0; c < cfg.n_u; ++c)
        out.regressors(i, col++) = u_series(k - l, c);
  }
  return out;
}

/// Design matrix over (already standardized) regressors.
inline Matrix build_design(const Matrix& regressors,
                           const std::vector<BasisTerm>& terms)
{
  Matrix phi(regressors.rows(), static_cast<Eigen::Index>(terms.size()));
  for (Eigen::Index i = 0; i < regressors.rows(); ++i)
    phi.row(i) = expand(regressors.row(i).transpose(), terms).transpose();
  return phi;
}

}  // namespace svbmpc

#endif  // SVBMPC_DICTIONARY_HPP
