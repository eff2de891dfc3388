#pragma once

#include "surveyforge/items.hpp"

#include <optional>
#include <string>
#include <vector>

namespace surveyforge::estimate {

/// Stratum and PSU labels with analysis weights. PSU labels are nested in
/// their stratum (the same PSU label in two strata denotes two PSUs).
struct SurveyDesign {
    std::vector<std::string> strata;
    std::vector<std::string> psus;
    std::vector<double> weights;

    std::size_t size() const noexcept { return weights.size(); }
    /// Throws PreconditionError on empty labels, mismatched sizes or nonpositive weights.
    void validate() const;
    /// Same labels, unit weights.
    SurveyDesign unweighted() const;
};

/// Integer-coded design for repeated estimation.
struct CodedDesign {
    std::vector<int> stratum;
    std::vector<int> psu; // global PSU index
    std::vector<int> psu_stratum;
    std::vector<double> weights;
    int n_strata = 0;
    int n_psu = 0;

    static CodedDesign from(const SurveyDesign &design);
};

/// Ratio (Hajek) mean of a 0/1 indicator with its linearization variance.
struct RatioResult {
    double estimate = 0.0;
    double variance = 0.0;
    long n = 0;
    int n_psu = 0;
    int n_strata = 0;
};

/// y: 1, 0 or -1 for missing. Missing observations are out of the domain but
/// keep their PSU in the variance (score 0). Strata with one PSU contribute
/// the squared deviation of the PSU total from the mean of all PSU totals.
RatioResult ratio_linearization(const CodedDesign &design, const std::vector<signed char> &y);

/// Stratified between-PSU variance of PSU totals: sum over strata of
/// n_h/(n_h-1) * sum (t - mean_h)^2, singleton strata via lonely_psu_adjust.
double stratified_cluster_variance(const std::vector<std::vector<double>> &psu_totals_by_stratum);

/// Contribution of a singleton stratum's PSU total, centered at the grand
/// mean of all PSU totals.
double lonely_psu_adjust(double psu_total, double grand_mean) noexcept;

enum class CiMethod { Logit, Wald };

enum class DesignKind { Original, Unweighted, Weighted };

std::string_view to_string(DesignKind kind) noexcept;
DesignKind parse_design_kind(std::string_view text);

struct PrevalenceEstimate {
    int year = 0;
    std::string city;
    ViolenceType type = ViolenceType::Emotional;
    Window window = Window::Lifetime;
    DesignKind design = DesignKind::Weighted;
    long n = 0;
    /// Percentages.
    double prev = 0.0;
    double se = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    /// Variance of the proportion (not percentage) estimate.
    double variance = 0.0;
    int df = 0;
};

/// Confidence interval in proportion units; t quantile with df degrees of
/// freedom (normal when df < 1). The logit interval is symmetric on the
/// log-odds scale and degenerates to the point at 0 or 1.
std::pair<double, double> confidence_interval(double p, double se, int df, CiMethod method = CiMethod::Logit,
                                              double level = 0.95);

/// OR over answered items; missing when no item of the cell was answered.
std::optional<int> victim_indicator(const ItemAnswers &answers, ViolenceType type, Window window);

/// Prevalence of an indicator (1/0/-1 missing) under a design. Throws
/// PreconditionError when the cell has no observations.
PrevalenceEstimate prevalence(const SurveyDesign &design, const std::vector<signed char> &y,
                              CiMethod method = CiMethod::Logit, double level = 0.95);
PrevalenceEstimate prevalence(const CodedDesign &design, const std::vector<signed char> &y,
                              CiMethod method = CiMethod::Logit, double level = 0.95);

/// One city's design and indicator for regional pooling.
struct CityDesign {
    std::string city;
    SurveyDesign design;
    std::vector<signed char> y;
};

/// Concatenates the city designs with strata and PSUs nested in city.
PrevalenceEstimate region_aggregate(const std::vector<CityDesign> &cities, CiMethod method = CiMethod::Logit,
                                    double level = 0.95);

/// 100 (w - unw) / unw; missing when unw is 0.
std::optional<double> diff_metric(double prev_w, double prev_unw);
/// var_w / var_unw; missing when var_unw is 0.
std::optional<double> var_ratio(double var_w, double var_unw);

} // namespace surveyforge::estimate
