#pragma once

#include <json.hpp>

#include "robustmm/breakdown.hpp"
#include "robustmm/calibration.hpp"
#include "robustmm/covariance.hpp"
#include "robustmm/diagnostics.hpp"
#include "robustmm/simulate.hpp"

namespace robustmm {

nlohmann::json to_json(const Eigen::VectorXd& v);
nlohmann::json to_json(const Eigen::MatrixXd& M);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CalibrationResult& c);

// {"kind": "ar1"|"unstructured"|"toeplitz"|"mixed", "k": int,
//  "Z": [[[..]], ...] for mixed}
nlohmann::json structure_to_json(const CovarianceStructure& s);
CovarianceStructure structure_from_json(const nlohmann::json& j);

nlohmann::json sample_metadata_json(const BalancedSample& sample);

nlohmann::json fit_report_json(const MMFit& fit, const BalancedSample& sample,
                               const RhoFunction& rho0, double b0, const RhoFunction& rho1,
                               const AsymptoticReport& asymptotics);

nlohmann::json to_json(const BreakdownBound& b);
nlohmann::json to_json(const MonteCarloReport& r);

// simulate CLI spec: see README for the schema
GeneratorSpec generator_spec_from_json(const nlohmann::json& j);
EstimatorConfig estimator_config_from_json(const nlohmann::json& j);

}  // namespace robustmm
