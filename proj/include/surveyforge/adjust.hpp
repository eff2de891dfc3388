#pragma once

#include "surveyforge/glm.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace surveyforge::adjust {

enum class Stage { Base, Trimmed, Raked, Scaled, SectionAdjusted, Pooled };

std::string_view to_string(Stage stage) noexcept;

/// One applied transform with its numeric parameters.
struct Transform {
    std::string name;
    std::vector<std::pair<std::string, double>> params;

    std::optional<double> param(std::string_view key) const;
};

struct WeightVector {
    std::vector<double> values;
    Stage stage = Stage::Base;
    std::vector<Transform> lineage;

    /// Checks every value is finite and at least 1e-12; throws NumericError.
    static WeightVector make(std::vector<double> values, Stage stage = Stage::Base);

    std::size_t size() const noexcept { return values.size(); }
    double total() const noexcept;
    double mean() const noexcept;
    void check_positive() const;
};

/// Linear interpolation between order statistics at h = (n - 1) q.
double quantile_type7(std::vector<double> values, double q);
/// Smallest value whose cumulative weight share reaches q, where each value
/// carries its own magnitude as weight.
double weighted_quantile(std::vector<double> values, double q);

struct TrimOptions {
    double lower_q = 0.05;
    double upper_q = 0.95;
    /// Redistribute proportionally to current weights instead of equally.
    bool proportional = false;
    /// Use self-weighted quantiles of the weight distribution.
    bool weighted_quantiles = false;
    int max_passes = 10;
};

/// Caps weights above the upper quantile and raises those below the lower
/// quantile, then spreads the net trimmed mass over untrimmed observations;
/// repeats while untrimmed values cross a bound. The total is preserved.
/// Lineage records the numeric bounds under "lower" and "upper".
WeightVector trim_weights(const WeightVector &w, const TrimOptions &options);
/// Trimming to fixed numeric bounds; re-applying with the bounds recorded
/// by trim_weights leaves its output unchanged.
WeightVector trim_to_bounds(const WeightVector &w, double lower, double upper, bool proportional = false,
                            int max_passes = 10);

struct RakingCategory {
    std::string label;
    double control_total = 0.0;
};

struct RakingVariable {
    std::string name;
    std::vector<RakingCategory> categories;
};

struct RakingSpec {
    std::vector<RakingVariable> variables;
    double tolerance = 1e-8;
    int max_iter = 100;
    /// Controls are shares; they are rescaled to the input weight total.
    bool proportions = false;

    /// Throws ConfigError on empty or inconsistent margins.
    void validate() const;

    static RakingSpec from_json(const nlohmann::json &j);
    static RakingSpec load(const std::string &path);
    nlohmann::json to_json() const;
};

struct RakeReport {
    int iterations = 0;
    double max_relative_error = 0.0;
    /// Max relative margin error after each sweep.
    std::vector<double> error_history;
};

/// Per-observation category index for each raking variable, in spec order.
using CategoryCodes = std::vector<std::vector<std::size_t>>;

/// Maps string labels to category indices; throws SchemaError on unknown labels.
CategoryCodes code_categories(const RakingSpec &spec, const std::vector<std::vector<std::string>> &labels);

/// Iterative proportional fitting to the spec's margins. Throws
/// StructuralError when a category with a positive control has no sample
/// weight (or a zero control has members) and RakeConvergenceError, with
/// the last margins, when max_iter sweeps do not reach the tolerance.
WeightVector rake(const WeightVector &w, const RakingSpec &spec, const CategoryCodes &codes,
                  RakeReport *report = nullptr);

WeightVector scale_to_mean_one(const WeightVector &w);

struct PipelineOptions {
    TrimOptions first_trim{0.05, 0.95};
    TrimOptions second_trim{0.0, 0.95};
};

/// trim -> rake -> scale -> trim (upper only) -> scale.
WeightVector final_design_weights(const WeightVector &base, const RakingSpec &spec, const CategoryCodes &codes,
                                  const PipelineOptions &options = {}, RakeReport *report = nullptr);

/// Covariate names of the section-response model, in column order.
inline const std::vector<std::string> kSectionCovariates = {"cohab", "know_victim", "children"};

struct SectionResult {
    /// Respondent weights (design weight / propensity), scaled to mean one.
    WeightVector weights;
    /// Indices into the input of the respondents, in input order.
    std::vector<std::size_t> respondents;
    /// Fitted propensity for every input observation.
    std::vector<double> propensity;
    std::optional<glm::LogitFit> fit;
    std::vector<std::string> warnings;
};

/// Weighted logit of `answered` on an intercept and the covariate columns,
/// weighted by the design weights; respondents get design weight divided
/// by their propensity. A constant `answered` skips the fit (propensity 1).
SectionResult section_nonresponse_weights(const WeightVector &design_w, const Eigen::MatrixXd &covariates,
                                          const std::vector<bool> &answered,
                                          const glm::LogitOptions &options = {});

} // namespace surveyforge::adjust
