#include "surveyforge/estimate.hpp"

#include "surveyforge/error.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace surveyforge::estimate {

void SurveyDesign::validate() const {
    if (strata.size() != weights.size() || psus.size() != weights.size()) {
        throw PreconditionError("survey design: strata, PSU labels and weights differ in length");
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (strata[i].empty() || psus[i].empty()) {
            throw PreconditionError("survey design: observation " + std::to_string(i) + " has an empty label");
        }
        if (!(weights[i] > 0.0) || !std::isfinite(weights[i])) {
            throw PreconditionError("survey design: observation " + std::to_string(i) +
                                    " has a nonpositive weight");
        }
    }
}

SurveyDesign SurveyDesign::unweighted() const {
    SurveyDesign out = *this;
    std::fill(out.weights.begin(), out.weights.end(), 1.0);
    return out;
}

CodedDesign CodedDesign::from(const SurveyDesign &design) {
    design.validate();
    CodedDesign coded;
    std::unordered_map<std::string, int> strata;
    std::unordered_map<std::string, int> psus;
    coded.stratum.reserve(design.size());
    coded.psu.reserve(design.size());
    for (std::size_t i = 0; i < design.size(); ++i) {
        auto [sit, snew] = strata.emplace(design.strata[i], static_cast<int>(strata.size()));
        auto [pit, pnew] = psus.emplace(design.strata[i] + '\x1f' + design.psus[i], static_cast<int>(psus.size()));
        if (pnew) {
            coded.psu_stratum.push_back(sit->second);
        }
        coded.stratum.push_back(sit->second);
        coded.psu.push_back(pit->second);
    }
    coded.weights = design.weights;
    coded.n_strata = static_cast<int>(strata.size());
    coded.n_psu = static_cast<int>(psus.size());
    return coded;
}

double lonely_psu_adjust(double psu_total, double grand_mean) noexcept {
    const double d = psu_total - grand_mean;
    return d * d;
}

double stratified_cluster_variance(const std::vector<std::vector<double>> &psu_totals_by_stratum) {
    double grand = 0.0;
    std::size_t count = 0;
    for (const auto &stratum : psu_totals_by_stratum) {
        for (double t : stratum) {
            grand += t;
            ++count;
        }
    }
    if (count == 0) {
        return 0.0;
    }
    grand /= static_cast<double>(count);
    double variance = 0.0;
    for (const auto &stratum : psu_totals_by_stratum) {
        const std::size_t nh = stratum.size();
        if (nh == 0) {
            continue;
        }
        if (nh == 1) {
            variance += lonely_psu_adjust(stratum.front(), grand);
            continue;
        }
        double mean = 0.0;
        for (double t : stratum) {
            mean += t;
        }
        mean /= static_cast<double>(nh);
        double ss = 0.0;
        for (double t : stratum) {
            ss += (t - mean) * (t - mean);
        }
        variance += static_cast<double>(nh) / static_cast<double>(nh - 1) * ss;
    }
    return variance;
}

RatioResult ratio_linearization(const CodedDesign &design, const std::vector<signed char> &y) {
    if (y.size() != design.weights.size()) {
        throw PreconditionError("ratio_linearization: indicator and design differ in length");
    }
    double sw = 0.0;
    double swy = 0.0;
    long n = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] < 0) {
            continue;
        }
        sw += design.weights[i];
        swy += design.weights[i] * y[i];
        ++n;
    }
    if (n == 0) {
        throw PreconditionError("ratio_linearization: no observed values in the cell");
    }
    RatioResult r;
    r.n = n;
    r.estimate = swy / sw;
    r.n_psu = design.n_psu;
    r.n_strata = design.n_strata;

    std::vector<double> totals(static_cast<std::size_t>(design.n_psu), 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] >= 0) {
            totals[static_cast<std::size_t>(design.psu[i])] += design.weights[i] * (y[i] - r.estimate) / sw;
        }
    }
    std::vector<std::vector<double>> by_stratum(static_cast<std::size_t>(design.n_strata));
    for (int j = 0; j < design.n_psu; ++j) {
        by_stratum[static_cast<std::size_t>(design.psu_stratum[static_cast<std::size_t>(j)])].push_back(
            totals[static_cast<std::size_t>(j)]);
    }
    r.variance = stratified_cluster_variance(by_stratum);
    return r;
}

std::string_view to_string(DesignKind kind) noexcept {
    switch (kind) {
    case DesignKind::Original:
        return "original";
    case DesignKind::Unweighted:
        return "unweighted";
    case DesignKind::Weighted:
        return "weighted";
    }
    return "?";
}

DesignKind parse_design_kind(std::string_view text) {
    for (auto k : {DesignKind::Original, DesignKind::Unweighted, DesignKind::Weighted}) {
        if (to_string(k) == text) {
            return k;
        }
    }
    throw ConfigError("unknown design '" + std::string(text) + "'");
}

std::pair<double, double> confidence_interval(double p, double se, int df, CiMethod method, double level) {
    if (!(level > 0.0 && level < 1.0)) {
        throw PreconditionError("confidence level must lie in (0, 1)");
    }
    const double alpha = 1.0 - level;
    double q = 0.0;
    if (df >= 1) {
        boost::math::students_t dist(static_cast<double>(df));
        q = boost::math::quantile(boost::math::complement(dist, alpha / 2.0));
    } else {
        boost::math::normal dist;
        q = boost::math::quantile(boost::math::complement(dist, alpha / 2.0));
    }
    if (method == CiMethod::Wald) {
        return {std::max(0.0, p - q * se), std::min(1.0, p + q * se)};
    }
    if (p <= 0.0 || p >= 1.0) {
        return {p, p};
    }
    const double centre = std::log(p / (1.0 - p));
    const double half = q * se / (p * (1.0 - p));
    auto inv = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    return {inv(centre - half), inv(centre + half)};
}

std::optional<int> victim_indicator(const ItemAnswers &answers, ViolenceType type, Window window) {
    const std::size_t cell = cell_index(type, window);
    if (answers.present[cell] == 0) {
        return std::nullopt;
    }
    return (answers.yes[cell] & answers.present[cell]) != 0 ? 1 : 0;
}

PrevalenceEstimate prevalence(const CodedDesign &design, const std::vector<signed char> &y, CiMethod method,
                              double level) {
    const RatioResult r = ratio_linearization(design, y);
    PrevalenceEstimate est;
    est.n = r.n;
    est.df = r.n_psu - r.n_strata;
    est.variance = r.variance;
    const double se = std::sqrt(r.variance);
    const auto [lo, hi] = confidence_interval(r.estimate, se, est.df, method, level);
    est.prev = 100.0 * r.estimate;
    est.se = 100.0 * se;
    est.ci_low = 100.0 * std::min(lo, r.estimate);
    est.ci_high = 100.0 * std::max(hi, r.estimate);
    return est;
}

PrevalenceEstimate prevalence(const SurveyDesign &design, const std::vector<signed char> &y, CiMethod method,
                              double level) {
    return prevalence(CodedDesign::from(design), y, method, level);
}

PrevalenceEstimate region_aggregate(const std::vector<CityDesign> &cities, CiMethod method, double level) {
    SurveyDesign combined;
    std::vector<signed char> y;
    for (const auto &c : cities) {
        c.design.validate();
        if (c.y.size() != c.design.size()) {
            throw PreconditionError("region_aggregate: indicator length differs from the design of " + c.city);
        }
        for (std::size_t i = 0; i < c.design.size(); ++i) {
            combined.strata.push_back(c.city + "/" + c.design.strata[i]);
            combined.psus.push_back(c.city + "/" + c.design.psus[i]);
            combined.weights.push_back(c.design.weights[i]);
        }
        y.insert(y.end(), c.y.begin(), c.y.end());
    }
    return prevalence(combined, y, method, level);
}

std::optional<double> diff_metric(double prev_w, double prev_unw) {
    if (prev_unw == 0.0) {
        return std::nullopt;
    }
    return 100.0 * (prev_w - prev_unw) / prev_unw;
}

std::optional<double> var_ratio(double var_w, double var_unw) {
    if (var_unw == 0.0) {
        return std::nullopt;
    }
    return var_w / var_unw;
}

} // namespace surveyforge::estimate
