// JSON (de)serialization of fitted models: hyperpriors, surviving dictionary
// terms, posterior parameters (Sigma row-major), standardization, and the
// fit report.

#ifndef SVBMPC_MODEL_IO_HPP
#define SVBMPC_MODEL_IO_HPP

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "svbmpc/predict.hpp"

namespace svbmpc {

namespace detail {

inline nlohmann::json to_json(const Vector& v)
{
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Vector vector_from_json(const nlohmann::json& j)
{
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

}  // namespace detail

inline nlohmann::json model_to_json(const FittedModel& model)
{
  nlohmann::json j;
  j["narx"] = {
      {"n_a", model.cfg.n_a},       {"n_b", model.cfg.n_b},
      {"n_u", model.cfg.n_u},       {"n_y", model.cfg.n_y},
      {"degree", model.cfg.degree}, {"include_bias", model.cfg.include_bias},
      {"max_terms", model.cfg.max_terms},
  };
  j["hyperpriors"] = {{"a0", model.hyper.a0},
                      {"b0", model.hyper.b0},
                      {"c0", model.hyper.c0},
                      {"d0", model.hyper.d0}};
  j["terms"] = nlohmann::json::array();
  for (const auto& t : model.terms)
    j["terms"].push_back({{"name", t.name}, {"exponents", t.exponents}});

  const auto& p = model.posterior;
  nlohmann::json sigma = nlohmann::json::array();
  for (Eigen::Index r = 0; r < p.Sigma.rows(); ++r)
    for (Eigen::Index c = 0; c < p.Sigma.cols(); ++c)
      sigma.push_back(p.Sigma(r, c));
  j["posterior"] = {{"mu", detail::to_json(p.mu)},
                    {"sigma_row_major", sigma},
                    {"a", detail::to_json(p.a)},
                    {"b", detail::to_json(p.b)},
                    {"c", p.c},
                    {"d", p.d}};
  j["standardization"] = {{"enabled", model.standardizer.enabled},
                          {"mean", detail::to_json(model.standardizer.mean)},
                          {"scale", detail::to_json(model.standardizer.scale)}};
  j["fit_report"] = {{"elbo_trace", model.report.elbo_trace},
                     {"iterations", model.report.iterations},
                     {"converged", model.report.converged},
                     {"pruned_term_indices", model.report.pruned_term_indices},
                     {"active_term_count", model.report.active_term_count}};
  return j;
}

inline FittedModel model_from_json(const nlohmann::json& j)
{
  FittedModel model;
  const auto& n = j.at("narx");
  model.cfg.n_a = n.at("n_a").get<int>();
  model.cfg.n_b = n.at("n_b").get<int>();
  model.cfg.n_u = n.at("n_u").get<int>();
  model.cfg.n_y = n.at("n_y").get<int>();
  model.cfg.degree = n.at("degree").get<int>();
  model.cfg.include_bias = n.at("include_bias").get<bool>();
  model.cfg.max_terms = n.at("max_terms").get<int>();

  const auto& h = j.at("hyperpriors");
  model.hyper = Hyperpriors{h.at("a0").get<double>(), h.at("b0").get<double>(),
                            h.at("c0").get<double>(), h.at("d0").get<double>()};

  for (const auto& t : j.at("terms")) {
    BasisTerm term;
    term.name = t.at("name").get<std::string>();
    term.exponents = t.at("exponents").get<std::vector<int>>();
    model.terms.push_back(std::move(term));
  }

  const auto& p = j.at("posterior");
  model.posterior.mu = detail::vector_from_json(p.at("mu"));
  model.posterior.a = detail::vector_from_json(p.at("a"));
  model.posterior.b = detail::vector_from_json(p.at("b"));
  model.posterior.c = p.at("c").get<double>();
  model.posterior.d = p.at("d").get<double>();
  const Eigen::Index m = model.posterior.mu.size();
  const auto& sigma = p.at("sigma_row_major");
  if (static_cast<Eigen::Index>(sigma.size()) != m * m)
    throw std::runtime_error("model_from_json: Sigma size mismatch");
  model.posterior.Sigma.resize(m, m);
  for (Eigen::Index r = 0; r < m; ++r)
    for (Eigen::Index c = 0; c < m; ++c)
      model.posterior.Sigma(r, c) =
          sigma.at(static_cast<std::size_t>(r * m + c)).get<double>();

  const auto& s = j.at("standardization");
  model.standardizer.enabled = s.at("enabled").get<bool>();
  model.standardizer.mean = detail::vector_from_json(s.at("mean"));
  model.standardizer.scale = detail::vector_from_json(s.at("scale"));

  const auto& r = j.at("fit_report");
  model.report.elbo_trace = r.at("elbo_trace").get<std::vector<double>>();
  model.report.iterations = r.at("iterations").get<int>();
  model.report.converged = r.at("converged").get<bool>();
  model.report.pruned_term_indices =
      r.at("pruned_term_indices").get<std::vector<int>>();
  model.report.active_term_count = r.at("active_term_count").get<int>();
  return model;
}

inline void save_model(const FittedModel& model, const std::string& path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("save_model: cannot open " + path);
  out << model_to_json(model).dump(2) << "\n";
}

inline FittedModel load_model(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("load_model: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return model_from_json(j);
}

}  // namespace svbmpc

#endif  // SVBMPC_MODEL_IO_HPP
