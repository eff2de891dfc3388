#pragma once

#include "surveyforge/adjust.hpp"
#include "surveyforge/glm.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace surveyforge::pool {

enum class Source { RE, NAT };

std::string_view to_string(Source source) noexcept;
Source parse_source(std::string_view text);

struct PooledSampleMember {
    std::string id;
    std::string household;
    Source source = Source::NAT;
    double p_own = 1.0;
    double p_hat_other = 0.0;
    double p_overlap = 0.0;
    double pooled_weight = 0.0;
};

/// Named numeric covariates, one row per unit (no intercept column).
struct CovariateTable {
    std::vector<std::string> names;
    Eigen::MatrixXd values;
};

/// Default counterfactual covariates (tract, household and head of household).
inline const std::vector<std::string> kDefaultCounterfactualCovariates = {
    "tract_households", "household_size", "head_age", "head_education", "head_female"};

struct CounterfactualModel {
    std::vector<std::string> covariates;
    glm::LinearFit fit;
};

inline constexpr double kProbClip = 1e-6;

/// Unit-weight linear regression of logit(clip(p)) on an intercept and the
/// source covariates.
CounterfactualModel fit_counterfactual_model(const std::vector<double> &source_probs, const CovariateTable &source);

/// Back-transformed predictions; the target must carry exactly the model's
/// covariates (any order), otherwise SchemaError.
std::vector<double> predict_counterfactual(const CounterfactualModel &model, const CovariateTable &target);

/// Fit on the source sample and predict for the target sample.
std::vector<double> fit_counterfactual(const std::vector<double> &source_probs, const CovariateTable &source,
                                       const CovariateTable &target);

/// Membership of one sampled woman for overlap estimation.
struct OverlapRecord {
    std::string household;
    Source source = Source::NAT;
    /// RE member recruited inside a wave-one (panel) household.
    bool in_household = false;
};

/// Share of combined-sample households that are panel households holding an
/// in-household replacement. Throws IntegrityError when the share is 1.
double estimate_overlap(const std::vector<OverlapRecord> &records);

/// How the overlap constant enters the denominator.
enum class OverlapScale {
    /// p_overlap = overlap for every member.
    Absolute,
    /// overlap is the share of the union selected by both samples:
    /// p_overlap = overlap (p_own + p_hat_other) / (1 + overlap).
    Relative,
};

std::string_view to_string(OverlapScale scale) noexcept;
OverlapScale parse_overlap_scale(std::string_view text);

/// Fills p_overlap and pooled_weight = 1 / (p_own + p_hat_other - p_overlap)
/// for every member and returns the weights in member order. Throws
/// IntegrityError naming the member when an invariant fails.
adjust::WeightVector pooled_weights(std::vector<PooledSampleMember> &members, double overlap,
                                    OverlapScale scale = OverlapScale::Absolute);

} // namespace surveyforge::pool
