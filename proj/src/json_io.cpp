#include "robustmm/json_io.hpp"

#include <cmath>

#include "robustmm/errors.hpp"

namespace robustmm {

using nlohmann::json;

json to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json to_json(const Eigen::MatrixXd& M) {
  json out = json::array();
  for (int i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    out.push_back(row);
  }
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  if (!j.is_array()) throw ParseError("expected a JSON array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ParseError("expected a JSON array of arrays");
  Eigen::MatrixXd M(j.size(), j[0].size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].size() != j[0].size()) throw ParseError("ragged matrix rows");
    for (std::size_t c = 0; c < j[i].size(); ++c) M(i, c) = j[i][c].get<double>();
  }
  return M;
}

json to_json(const CalibrationResult& c) {
  json out;
  out["family"] = c.family == RhoKind::Biweight ? "biweight" : "huber";
  out["k"] = c.k;
  out["cutoff"] = c.cutoff;
  out["b0"] = c.b0;
  out["r0"] = std::isnan(c.r0) ? json(nullptr) : json(c.r0);
  out["alpha1"] = c.alpha1;
  out["lambda"] = c.lambda;
  out["efficiency"] = c.efficiency;
  return out;
}

json structure_to_json(const CovarianceStructure& s) {
  json out;
  out["k"] = s.k();
  switch (s.kind()) {
    case CovKind::AR1:
      out["kind"] = "ar1";
      break;
    case CovKind::Unstructured:
      out["kind"] = "unstructured";
      break;
    case CovKind::Toeplitz:
      out["kind"] = "toeplitz";
      break;
    case CovKind::MixedEffects: {
      out["kind"] = "mixed";
      json zs = json::array();
      for (const auto& Z : s.designs()) zs.push_back(to_json(Z));
      out["Z"] = zs;
      break;
    }
  }
  return out;
}

CovarianceStructure structure_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const int k = j.at("k").get<int>();
  if (kind == "ar1") return CovarianceStructure::ar1(k);
  if (kind == "unstructured") return CovarianceStructure::unstructured(k);
  if (kind == "toeplitz") return CovarianceStructure::toeplitz(k);
  if (kind == "mixed") {
    std::vector<Eigen::MatrixXd> designs;
    if (j.contains("Z"))
      for (const auto& z : j.at("Z")) designs.push_back(matrix_from_json(z));
    return CovarianceStructure::mixed_effects(k, std::move(designs));
  }
  throw ParseError("unknown structure kind: " + kind);
}

json sample_metadata_json(const BalancedSample& sample) {
  const KappaResult kr = kappa(sample);
  json out;
  out["n"] = sample.n;
  out["k"] = sample.k;
  out["q"] = sample.q;
  out["p"] = kr.p;
  out["kappa"] = kr.value;
  out["kappa_exact"] = kr.exact;
  json bad = json::array();
  for (int i = 0; i < sample.n; ++i)
    if (!sample.full_rank[i]) bad.push_back(i);
  out["rank_deficient_subjects"] = bad;
  return out;
}

json fit_report_json(const MMFit& fit, const BalancedSample& sample, const RhoFunction& rho0,
                     double b0, const RhoFunction& rho1, const AsymptoticReport& asymptotics) {
  json out;
  out["sample"] = sample_metadata_json(sample);
  out["rho0"] = {{"family", "biweight"},
                 {"cutoff", rho0.cutoff()},
                 {"b0", b0},
                 {"r0", b0 / rho0.sup()}};
  out["rho1"] = {{"family", rho1.kind() == RhoKind::Biweight ? "biweight" : "huber"},
                 {"cutoff", rho1.cutoff()}};
  out["beta0"] = to_json(fit.initial.beta0);
  out["theta0"] = to_json(fit.initial.theta0);
  out["V0"] = to_json(fit.initial.V0);
  out["scale_constraint_residual"] = fit.initial.scale_constraint_residual;
  out["candidates_evaluated"] = fit.initial.candidates_evaluated;
  if (!fit.initial.warning.empty()) out["warning"] = fit.initial.warning;
  out["beta1"] = to_json(fit.beta1);
  out["objective"] = fit.objective;
  out["iterations"] = fit.iterations;
  out["converged"] = fit.converged;
  out["starts_used"] = fit.starts_used;
  out["score_norm"] = fit.score_norm;
  out["distances"] = fit.distances;
  out["weights"] = fit.weights;
  out["asymptotics"] = {{"alpha1", asymptotics.alpha1},
                        {"lambda", asymptotics.lambda},
                        {"info_matrix", to_json(asymptotics.info_matrix)},
                        {"closed_form_cov", to_json(asymptotics.closed_form_cov)},
                        {"sandwich_cov", to_json(asymptotics.sandwich_cov)},
                        {"D1_hat", to_json(asymptotics.D1_hat)}};
  return out;
}

json to_json(const BreakdownBound& b) {
  json out;
  out["n"] = b.n;
  out["r0"] = b.r0;
  out["kappa"] = b.kappa;
  out["kappa_exact"] = b.kappa_exact;
  out["v0_breakdown"] = b.v0_breakdown;
  out["bound_beta"] = b.bound_beta;
  out["bound_max"] = b.bound_max;
  out["feasible"] = b.feasible;
  return out;
}

json to_json(const MonteCarloReport& r) {
  json out;
  out["replications"] = r.replications;
  out["failures"] = r.failures;
  out["mean_beta_error"] = to_json(r.mean_beta_error);
  out["empirical_cov_of_sqrt_n_error"] = to_json(r.empirical_cov_of_sqrt_n_error);
  out["closed_form_cov"] = to_json(r.closed_form_cov);
  out["efficiency_vs_gls"] = r.efficiency_vs_gls;
  out["coverage_95"] = r.coverage_95;
  out["consistency_slope"] = std::isnan(r.consistency_slope) ? json(nullptr)
                                                             : json(r.consistency_slope);
  return out;
}

GeneratorSpec generator_spec_from_json(const json& j) {
  GeneratorSpec spec(structure_from_json(j.at("structure")));
  spec.n = j.at("n").get<int>();
  spec.k = j.at("k").get<int>();
  spec.q = j.at("q").get<int>();
  spec.beta_true = vector_from_json(j.at("beta_true"));
  spec.theta_true = vector_from_json(j.at("theta_true"));
  const std::string design = j.value("design", "intercept_plus_noise");
  if (design == "fixed_equal") {
    spec.design = DesignKind::FixedEqual;
    spec.fixed_X = matrix_from_json(j.at("X"));
  } else if (design == "gaussian_random") {
    spec.design = DesignKind::GaussianRandom;
    spec.design_mean = j.value("design_mean", 0.0);
    spec.design_sd = j.value("design_sd", 1.0);
  } else if (design == "intercept_plus_noise") {
    spec.design = DesignKind::InterceptPlusNoise;
  } else {
    throw ParseError("unknown design: " + design);
  }
  const std::string law = j.value("error_law", "gaussian");
  if (law == "gaussian") {
    spec.error_law = ErrorLaw::Gaussian;
  } else if (law == "student_t") {
    spec.error_law = ErrorLaw::StudentT;
    spec.student_df = j.value("df", 5.0);
  } else {
    throw ParseError("unknown error law: " + law);
  }
  spec.seed = j.value("seed", 0ULL);
  return spec;
}

EstimatorConfig estimator_config_from_json(const json& j) {
  EstimatorConfig est;
  est.r0 = j.value("r0", 0.5);
  const std::string fam = j.value("rho1", "biweight");
  if (fam == "biweight")
    est.rho1_kind = RhoKind::Biweight;
  else if (fam == "huber")
    est.rho1_kind = RhoKind::Huber;
  else
    throw ParseError("unknown rho1 family: " + fam);
  est.rho1_efficiency = j.value("rho1_efficiency", 0.95);
  est.rho1_cutoff = j.value("rho1_cutoff", 0.0);
  est.init.n_subsets = j.value("n_subsets", est.init.n_subsets);
  est.init.n_concentration = j.value("n_concentration", est.init.n_concentration);
  est.init.seed = j.value("seed", est.init.seed);
  est.mm.extra_starts = j.value("extra_starts", est.mm.extra_starts);
  est.mm.max_iter = j.value("max_iter", est.mm.max_iter);
  return est;
}

}  // namespace robustmm
