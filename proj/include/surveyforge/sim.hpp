#pragma once

#include "surveyforge/design.hpp"
#include "surveyforge/estimate.hpp"
#include "surveyforge/frame.hpp"
#include "surveyforge/observation.hpp"
#include "surveyforge/pool.hpp"
#include "surveyforge/rng.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace surveyforge::sim {

enum class PsuMethod { Systematic, Multinomial };
enum class WeightingMode { Base, Final, Section };
enum class AttritionModel { MCAR, MAR };

/// Logistic response model on the section covariates.
struct ResponseModel {
    double intercept = 40.0; // effectively always responds
    double cohab = 0.0;
    double know_victim = 0.0;
    double children = 0.0;

    double probability(const frame::Covariates &cov) const noexcept;
    static ResponseModel constant(double p);
};

struct DesignConfig {
    int psus_per_stratum = 5;
    int tracts_per_psu = 3;
    int households_per_tract = 8;
    int min_questionnaires = 4;
    int max_questionnaires = 12;
    PsuMethod psu_method = PsuMethod::Systematic;
    /// Visit every fifth household from a random start instead of a random walk order.
    bool skip_rule = false;
    double household_response = 1.0;

    void validate() const;
};

struct AttritionConfig {
    bool enabled = false;
    AttritionModel model = AttritionModel::MCAR;
    /// MCAR attrition probability.
    double rate = 0.0;
    /// MAR attrition log-odds model.
    ResponseModel mar{0.0, 0.0, 0.0, 0.0};
    bool substitution = true;
    /// Chance an attrited woman's household supplies another eligible woman.
    double substitute_accept = 0.5;
    bool refresh = true;
    std::vector<std::string> covariates = pool::kDefaultCounterfactualCovariates;
    pool::OverlapScale overlap_scale = pool::OverlapScale::Relative;

    double probability(const frame::Covariates &cov) const noexcept;
    void validate() const;
};

/// A bound on one summary metric. `cell` is a cell name such as
/// "emotional_lifetime" or "all" for the across-cell summary row.
struct Assertion {
    std::string metric;
    std::string cell = "all";
    std::optional<double> min;
    std::optional<double> max;
};

struct ScenarioConfig {
    std::string name = "scenario";
    std::uint64_t seed = 1;
    int replicates = 1;
    int threads = 1;
    frame::FrameGenConfig frame;
    DesignConfig design;
    ResponseModel section;
    WeightingMode weighting = WeightingMode::Base;
    AttritionConfig attrition;
    /// Outcome cells estimated (indices into the six cells).
    std::vector<std::size_t> cells = {0, 1, 2, 3, 4, 5};
    estimate::CiMethod ci_method = estimate::CiMethod::Logit;
    double level = 0.95;
    std::vector<Assertion> assertions;

    /// Throws ConfigError.
    void validate() const;
    static ScenarioConfig from_json(const nlohmann::json &j);
    static ScenarioConfig load(const std::string &path);
};

std::string cell_name(std::size_t cell);
std::size_t parse_cell_name(const std::string &name);

/// One sampled woman with frame coordinates and stage probabilities.
struct SampledWoman {
    Observation obs;
    std::size_t city = 0;
    std::size_t stratum = 0;
    std::size_t neighborhood = 0;
    std::size_t tract = 0;
    std::size_t household = 0;
    std::size_t woman = 0;
    /// PSU label for variance estimation (distinct per multinomial hit).
    std::string psu_label;
    design::InclusionProbabilities probs;
};

struct Wave1Sample {
    std::vector<SampledWoman> women;
    std::vector<TractVisit> visits;
    /// Visited household keys (see household_key).
    std::vector<std::uint64_t> visited_households;
    std::vector<std::string> warnings;
};

std::uint64_t household_key(std::size_t city, std::size_t stratum, std::size_t nb, std::size_t tract,
                            std::size_t household) noexcept;

/// Systematic PPS selection with start u in [0,1): unit i is taken when a
/// point u + j falls in its cumulative interval. pi must sum to an integer.
std::vector<std::size_t> systematic_pps(const std::vector<double> &pi, double u);

Wave1Sample draw_wave1(const frame::SamplingFrame &frame, const ScenarioConfig &config, rng::Stream &stream);
Wave1Sample draw_wave1(const frame::SamplingFrame &frame, const ScenarioConfig &config, std::uint64_t seed);

/// Table 2 row: a wave-one sample, b attrition without replacement,
/// c attrition replaced inside the household, f out-of-household refreshment.
struct AttritionRow {
    std::string label;
    long a = 0;
    long b = 0;
    long c = 0;
    long f = 0;

    long d() const noexcept { return b + c; }
    long e() const noexcept { return a - d(); }
    long g() const noexcept { return f + c + e(); }
};

/// Sum of d over sum of a.
double attrition_rate(const std::vector<AttritionRow> &rows);

struct Wave2Member {
    SampledWoman woman;
    pool::Source source = pool::Source::NAT;
    bool in_household = false;
    double p_own = 1.0;
};

struct Wave2Sample {
    std::vector<Wave2Member> members;
    /// One row per city.
    std::vector<AttritionRow> accounting;
};

Wave2Sample apply_attrition_and_refresh(const Wave1Sample &wave1, const frame::SamplingFrame &frame,
                                        const ScenarioConfig &config, rng::Stream &stream);
Wave2Sample apply_attrition_and_refresh(const Wave1Sample &wave1, const frame::SamplingFrame &frame,
                                        const ScenarioConfig &config, std::uint64_t seed);

/// Raking controls from a synthetic city's enumerated margins.
adjust::RakingSpec truth_raking_spec(const frame::CityTruth &truth);

struct CellResult {
    std::size_t city = 0;
    std::size_t cell = 0;
    double truth = 0.0;
    bool valid = false;
    estimate::PrevalenceEstimate weighted;
    estimate::PrevalenceEstimate unweighted;
    bool covered_weighted = false;
    bool covered_unweighted = false;
    std::optional<double> var_ratio;
};

struct ReplicateResult {
    int replicate = 0;
    std::vector<CellResult> cells;
    std::vector<AttritionRow> accounting;
    std::vector<std::string> warnings;
};

/// Runs one replicate on its own substream of the scenario seed.
ReplicateResult run_replicate(const frame::SamplingFrame &frame, const ScenarioConfig &config, int replicate);

struct CellSummary {
    std::string city;
    std::size_t cell = 0;
    double truth = 0.0;
    long replicates = 0;
    double mean_weighted = 0.0;
    double mean_unweighted = 0.0;
    double rel_bias_weighted = 0.0;
    double rel_bias_unweighted = 0.0;
    double emp_se_weighted = 0.0;
    double mean_se_weighted = 0.0;
    double coverage_weighted = 0.0;
    double coverage_unweighted = 0.0;
    double var_ratio_median = 0.0;
};

struct AssertionOutcome {
    Assertion assertion;
    double value = 0.0;
    bool passed = false;
};

struct ReplicationResult {
    std::string scenario;
    std::vector<ReplicateResult> replicates;
    std::vector<CellSummary> cells;
    /// Median over cells of the per-cell median VarRatio.
    double var_ratio_median = 0.0;
    /// Mean over cells of |relative bias| of the weighted estimate.
    double mean_abs_rel_bias_weighted = 0.0;
    double mean_abs_rel_bias_unweighted = 0.0;
    std::vector<AssertionOutcome> assertions;
    double runtime_seconds = 0.0;

    bool passed() const noexcept;
    /// Summary metric by name for a cell name or "all".
    std::optional<double> metric(const std::string &name, const std::string &cell) const;
};

/// Generates the frame from the scenario and runs every replicate
/// (optionally on several threads); deterministic in the seed.
ReplicationResult run_monte_carlo(const ScenarioConfig &config);
ReplicationResult run_monte_carlo(const frame::SamplingFrame &frame, const ScenarioConfig &config);

void write_replicates_csv(std::ostream &out, const ReplicationResult &result, const frame::SamplingFrame &frame);
void write_summary_csv(std::ostream &out, const ReplicationResult &result);

struct EnumeratedWoman {
    std::string id;
    double inclusion = 0.0;
    double eq6 = 0.0;
    double y = 0.0;
};

struct EnumerationResult {
    std::size_t n_outcomes = 0;
    double total_probability = 0.0;
    std::vector<EnumeratedWoman> women;
    double population_total = 0.0;
    double population_mean = 0.0;
    double ht_total_mean = 0.0;
    double ht_total_variance = 0.0;
    double ht_mean_mean = 0.0;
    double ht_mean_variance = 0.0;
    double ratio_mean = 0.0;
    double ratio_variance = 0.0;
    double expected_linearization_variance = 0.0;
};

/// Enumerates every sample path of the wave-one protocol on a one-city
/// frame (systematic PPS for PSUs and tracts, equal-probability household
/// subsets, uniform woman choice) with full response. Every household must
/// have at least one eligible woman. Throws PreconditionError when the
/// sample space exceeds max_outcomes.
EnumerationResult enumerate_exact(const frame::SamplingFrame &frame, const DesignConfig &config,
                                  std::size_t cell = 0, std::size_t max_outcomes = 1'000'000);

/// Households visited per tract under the [min, max] questionnaire rule
/// with full response and no empty households.
long effective_visits(const DesignConfig &config, long tract_households) noexcept;

} // namespace surveyforge::sim
