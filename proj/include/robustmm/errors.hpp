#pragma once

#include <stdexcept>
#include <string>

namespace robustmm {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define ROBUSTMM_DEFINE_ERROR(Name) \
  struct Name : Error {             \
    using Error::Error;             \
  }

// data ingestion
ROBUSTMM_DEFINE_ERROR(ParseError);
ROBUSTMM_DEFINE_ERROR(Unbalanced);
ROBUSTMM_DEFINE_ERROR(RankDeficient);

// covariance structures
ROBUSTMM_DEFINE_ERROR(NotPositiveDefinite);
ROBUSTMM_DEFINE_ERROR(InvalidParams);
ROBUSTMM_DEFINE_ERROR(DegenerateInput);
ROBUSTMM_DEFINE_ERROR(IllConditioned);

// rho functions and calibration
ROBUSTMM_DEFINE_ERROR(NonIntegrable);
ROBUSTMM_DEFINE_ERROR(NoBracket);
ROBUSTMM_DEFINE_ERROR(NotBounded);

// estimation
ROBUSTMM_DEFINE_ERROR(DegenerateScale);
ROBUSTMM_DEFINE_ERROR(AllCandidatesSingular);
ROBUSTMM_DEFINE_ERROR(SingularWeightedDesign);
ROBUSTMM_DEFINE_ERROR(NotConverged);
ROBUSTMM_DEFINE_ERROR(Pathological);

// diagnostics
ROBUSTMM_DEFINE_ERROR(SingularInfo);
ROBUSTMM_DEFINE_ERROR(SingularD1);

#undef ROBUSTMM_DEFINE_ERROR

}  // namespace robustmm
