#pragma once

#include "surveyforge/frame.hpp"
#include "surveyforge/observation.hpp"

#include <string>
#include <vector>

namespace surveyforge::design {

/// Relative tolerance for probability equality checks.
inline constexpr double kRelTol = 1e-12;

bool nearly_equal(double a, double b, double rel = kRelTol) noexcept;

/// n_k * nh_ki / nh_k. Throws CertaintyUnitError above 1.
double psu_prob(long n_k, long nh_ki, long nh_k);
/// s_ik * nh_kij / nh_ki. Throws CertaintyUnitError above 1.
double ssu_prob(long s_ik, long nh_kij, long nh_ki);
/// nv_households / nh_kij. Zero is returned as 0 and rejected by base_weight.
double household_prob(long nv_households, long nh_kij);
/// nv_questionnaires / nv_households.
double nonresponse_prob(long nv_questionnaires, long nv_households);
/// 1 / e_kijh.
double woman_prob(long e_kijh);

struct StageCounts {
    long n_k = 0;
    long s_ik = 0;
    long nv_households = 0;
    long nv_questionnaires = 0;
    long e = 0;

    /// Throws IntegrityError when the counts contradict each other.
    void validate() const;
};

struct InclusionProbabilities {
    double p_psu = 1.0;
    double p_ssu_given_psu = 1.0;
    double p_household_given_ssu = 1.0;
    double p_nonresponse = 1.0;
    double p_woman_given_household = 1.0;
    double p_overall = 1.0;
};

/// Product of the five stage probabilities.
double overall_prob(const InclusionProbabilities &parts);
/// Fills every field from counts and unit sizes, using first-order PPS
/// probabilities without certainty capping.
InclusionProbabilities inclusion_from_counts(const StageCounts &counts, long nh_ki, long nh_k, long nh_kij);

/// 1 / p_overall. Throws IntegrityError unless p_overall is in (0, 1].
double base_weight(double p_overall);

/// PPS inclusion probabilities n * x_i / sum(x) with certainty handling:
/// units whose value reaches 1 are fixed at 1 and the remaining sample size
/// is spread over the rest, repeated until no value exceeds 1. The result
/// sums to n. `certainty`, when given, receives the capped units.
std::vector<double> pps_inclusion_probabilities(const std::vector<long> &sizes, long n,
                                                std::vector<bool> *certainty = nullptr);

struct DesignDiagnostics {
    std::vector<std::string> warnings;
    /// Tracts with fewer than 2 valid questionnaires ("city/tract").
    std::vector<std::string> thin_tracts;
};

/// Stage probabilities for every observation from the frame, the visit log
/// and the observations themselves: n_k and s_ik are the distinct sampled
/// neighborhoods and tracts in the visit log, NVHouseholds its visit count,
/// NVQuestionnaires the observations in the tract and E the observation's
/// eligibility count. Certainty PSUs/SSUs are capped with a warning.
std::vector<InclusionProbabilities> observation_probabilities(const frame::SamplingFrame &frame,
                                                              const std::vector<Observation> &observations,
                                                              const std::vector<TractVisit> &visits,
                                                              DesignDiagnostics *diagnostics = nullptr);

} // namespace surveyforge::design
