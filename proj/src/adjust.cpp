#include "surveyforge/adjust.hpp"

#include "surveyforge/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

namespace surveyforge::adjust {

std::string_view to_string(Stage stage) noexcept {
    switch (stage) {
    case Stage::Base:
        return "base";
    case Stage::Trimmed:
        return "trimmed";
    case Stage::Raked:
        return "raked";
    case Stage::Scaled:
        return "scaled";
    case Stage::SectionAdjusted:
        return "section_adjusted";
    case Stage::Pooled:
        return "pooled";
    }
    return "?";
}

std::optional<double> Transform::param(std::string_view key) const {
    for (const auto &[k, v] : params) {
        if (k == key) {
            return v;
        }
    }
    return std::nullopt;
}

namespace {

constexpr double kMinWeight = 1e-12;

} // namespace

WeightVector WeightVector::make(std::vector<double> values, Stage stage) {
    WeightVector w;
    w.values = std::move(values);
    w.stage = stage;
    w.check_positive();
    return w;
}

double WeightVector::total() const noexcept { return std::accumulate(values.begin(), values.end(), 0.0); }

double WeightVector::mean() const noexcept {
    return values.empty() ? 0.0 : total() / static_cast<double>(values.size());
}

void WeightVector::check_positive() const {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i]) || values[i] < kMinWeight) {
            throw NumericError("weight " + std::to_string(i) + " is " + std::to_string(values[i]) +
                               " (must be finite and at least 1e-12)");
        }
    }
}

double quantile_type7(std::vector<double> values, double q) {
    if (values.empty() || !(q >= 0.0 && q <= 1.0)) {
        throw PreconditionError("quantile_type7: need values and q in [0,1]");
    }
    std::sort(values.begin(), values.end());
    const double h = static_cast<double>(values.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double weighted_quantile(std::vector<double> values, double q) {
    if (values.empty() || !(q >= 0.0 && q <= 1.0)) {
        throw PreconditionError("weighted_quantile: need values and q in [0,1]");
    }
    std::sort(values.begin(), values.end());
    const double total = std::accumulate(values.begin(), values.end(), 0.0);
    double cum = 0.0;
    for (double v : values) {
        cum += v;
        if (cum >= q * total) {
            return v;
        }
    }
    return values.back();
}

WeightVector trim_to_bounds(const WeightVector &w, double lower, double upper, bool proportional, int max_passes) {
    if (!(lower <= upper)) {
        throw PreconditionError("trim_to_bounds: lower bound exceeds upper bound");
    }
    WeightVector out = w;
    auto &v = out.values;
    const std::size_t n = v.size();
    const double total0 = w.total();
    std::vector<bool> trimmed(n, false);
    for (int pass = 0; pass < max_passes; ++pass) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (trimmed[i]) {
                continue;
            }
            if (v[i] > upper) {
                v[i] = upper;
                trimmed[i] = true;
                changed = true;
            } else if (v[i] < lower) {
                v[i] = lower;
                trimmed[i] = true;
                changed = true;
            }
        }
        if (!changed) {
            break;
        }
        double kept = 0.0;
        std::size_t n_kept = 0;
        double current = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            current += v[i];
            if (!trimmed[i]) {
                kept += v[i];
                ++n_kept;
            }
        }
        const double net = total0 - current;
        if (n_kept == 0) {
            if (std::abs(net) > 1e-12 * total0) {
                throw NumericError("trimming would trim every observation; the total cannot be preserved");
            }
            break;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (trimmed[i]) {
                continue;
            }
            if (proportional) {
                v[i] *= (kept + net) / kept;
            } else {
                v[i] += net / static_cast<double>(n_kept);
            }
        }
    }
    out.stage = Stage::Trimmed;
    out.lineage.push_back(Transform{"trim", {{"lower", lower}, {"upper", upper}}});
    out.check_positive();
    return out;
}

WeightVector trim_weights(const WeightVector &w, const TrimOptions &options) {
    if (!(options.lower_q >= 0.0 && options.lower_q < options.upper_q && options.upper_q <= 1.0)) {
        throw PreconditionError("trim_weights: need 0 <= lower_q < upper_q <= 1");
    }
    if (w.size() < 3) {
        throw PreconditionError("trim_weights: need at least 3 weights");
    }
    auto q = [&](double p) {
        return options.weighted_quantiles ? weighted_quantile(w.values, p) : quantile_type7(w.values, p);
    };
    const double lower = q(options.lower_q);
    const double upper = q(options.upper_q);
    WeightVector out = trim_to_bounds(w, lower, upper, options.proportional, options.max_passes);
    auto &params = out.lineage.back().params;
    params.insert(params.begin(), {{"lower_q", options.lower_q}, {"upper_q", options.upper_q}});
    return out;
}

void RakingSpec::validate() const {
    if (variables.empty()) {
        throw ConfigError("raking spec has no variables");
    }
    if (!(tolerance > 0.0) || max_iter < 1) {
        throw ConfigError("raking spec needs tolerance > 0 and max_iter >= 1");
    }
    double reference = -1.0;
    for (const auto &var : variables) {
        if (var.categories.empty()) {
            throw ConfigError("raking variable '" + var.name + "' has no categories");
        }
        double total = 0.0;
        for (std::size_t c = 0; c < var.categories.size(); ++c) {
            const auto &cat = var.categories[c];
            if (!(cat.control_total >= 0.0) || !std::isfinite(cat.control_total)) {
                throw ConfigError("raking variable '" + var.name + "' category '" + cat.label +
                                  "' has an invalid control total");
            }
            for (std::size_t d = 0; d < c; ++d) {
                if (var.categories[d].label == cat.label) {
                    throw ConfigError("raking variable '" + var.name + "' repeats category '" + cat.label + "'");
                }
            }
            total += cat.control_total;
        }
        if (!(total > 0.0)) {
            throw ConfigError("raking variable '" + var.name + "' has a zero grand total");
        }
        if (reference < 0.0) {
            reference = total;
        } else if (std::abs(total - reference) > 1e-9 * reference) {
            throw ConfigError("raking variable '" + var.name + "' totals " + std::to_string(total) +
                              " but the first variable totals " + std::to_string(reference));
        }
    }
}

RakingSpec RakingSpec::from_json(const nlohmann::json &j) {
    RakingSpec spec;
    try {
        for (const auto &jv : j.at("variables")) {
            RakingVariable var;
            var.name = jv.at("name").get<std::string>();
            for (const auto &jc : jv.at("categories")) {
                var.categories.push_back({jc.at("label").get<std::string>(), jc.at("control_total").get<double>()});
            }
            spec.variables.push_back(std::move(var));
        }
        spec.tolerance = j.value("tolerance", spec.tolerance);
        spec.max_iter = j.value("max_iter", spec.max_iter);
        spec.proportions = j.value("proportions", spec.proportions);
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("raking spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

RakingSpec RakingSpec::load(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open raking spec '" + path + "'");
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError("raking spec '" + path + "': " + e.what());
    }
    return from_json(j);
}

nlohmann::json RakingSpec::to_json() const {
    nlohmann::json vars = nlohmann::json::array();
    for (const auto &var : variables) {
        nlohmann::json cats = nlohmann::json::array();
        for (const auto &c : var.categories) {
            cats.push_back({{"label", c.label}, {"control_total", c.control_total}});
        }
        vars.push_back({{"name", var.name}, {"categories", cats}});
    }
    nlohmann::json j = {{"variables", vars}, {"tolerance", tolerance}, {"max_iter", max_iter}};
    if (proportions) {
        j["proportions"] = true;
    }
    return j;
}

CategoryCodes code_categories(const RakingSpec &spec, const std::vector<std::vector<std::string>> &labels) {
    if (labels.size() != spec.variables.size()) {
        throw SchemaError("category labels supplied for " + std::to_string(labels.size()) + " variables, spec has " +
                          std::to_string(spec.variables.size()));
    }
    CategoryCodes codes(labels.size());
    for (std::size_t v = 0; v < labels.size(); ++v) {
        const auto &var = spec.variables[v];
        std::map<std::string, std::size_t> index;
        for (std::size_t c = 0; c < var.categories.size(); ++c) {
            index.emplace(var.categories[c].label, c);
        }
        codes[v].reserve(labels[v].size());
        for (std::size_t i = 0; i < labels[v].size(); ++i) {
            auto it = index.find(labels[v][i]);
            if (it == index.end()) {
                throw SchemaError("observation " + std::to_string(i) + ": '" + labels[v][i] +
                                  "' is not a category of raking variable '" + var.name + "'");
            }
            codes[v].push_back(it->second);
        }
    }
    return codes;
}

namespace {

std::vector<std::vector<double>> margins(const std::vector<double> &w, const RakingSpec &spec,
                                         const CategoryCodes &codes) {
    std::vector<std::vector<double>> m(spec.variables.size());
    for (std::size_t v = 0; v < spec.variables.size(); ++v) {
        m[v].assign(spec.variables[v].categories.size(), 0.0);
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[v][codes[v][i]] += w[i];
        }
    }
    return m;
}

double max_relative_error(const std::vector<std::vector<double>> &m, const std::vector<std::vector<double>> &controls) {
    double err = 0.0;
    for (std::size_t v = 0; v < m.size(); ++v) {
        for (std::size_t c = 0; c < m[v].size(); ++c) {
            if (controls[v][c] > 0.0) {
                err = std::max(err, std::abs(m[v][c] - controls[v][c]) / controls[v][c]);
            }
        }
    }
    return err;
}

} // namespace

WeightVector rake(const WeightVector &w, const RakingSpec &spec, const CategoryCodes &codes, RakeReport *report) {
    spec.validate();
    const std::size_t n = w.size();
    if (codes.size() != spec.variables.size()) {
        throw SchemaError("rake: category codes do not cover every raking variable");
    }
    for (std::size_t v = 0; v < codes.size(); ++v) {
        if (codes[v].size() != n) {
            throw SchemaError("rake: variable '" + spec.variables[v].name + "' has codes for " +
                              std::to_string(codes[v].size()) + " of " + std::to_string(n) + " observations");
        }
        for (std::size_t code : codes[v]) {
            if (code >= spec.variables[v].categories.size()) {
                throw SchemaError("rake: category code out of range for '" + spec.variables[v].name + "'");
            }
        }
    }

    std::vector<std::vector<double>> controls(spec.variables.size());
    const double input_total = w.total();
    for (std::size_t v = 0; v < spec.variables.size(); ++v) {
        double total = 0.0;
        for (const auto &c : spec.variables[v].categories) {
            total += c.control_total;
        }
        for (const auto &c : spec.variables[v].categories) {
            controls[v].push_back(spec.proportions ? c.control_total * input_total / total : c.control_total);
        }
    }

    WeightVector out = w;
    auto &vals = out.values;
    auto m = margins(vals, spec, codes);
    for (std::size_t v = 0; v < m.size(); ++v) {
        for (std::size_t c = 0; c < m[v].size(); ++c) {
            const auto &var = spec.variables[v];
            if (controls[v][c] > 0.0 && !(m[v][c] > 0.0)) {
                throw StructuralError("raking variable '" + var.name + "' category '" + var.categories[c].label +
                                      "' has a positive control total but no sample weight");
            }
            if (controls[v][c] == 0.0 && m[v][c] > 0.0) {
                throw StructuralError("raking variable '" + var.name + "' category '" + var.categories[c].label +
                                      "' has a zero control total but sampled members");
            }
        }
    }

    RakeReport local;
    RakeReport &rep = report ? *report : local;
    rep = RakeReport{};
    double err = max_relative_error(m, controls);
    int iter = 0;
    while (err >= spec.tolerance) {
        if (iter == spec.max_iter) {
            throw RakeConvergenceError("raking did not converge in " + std::to_string(spec.max_iter) +
                                           " iterations (max relative margin error " + std::to_string(err) + ")",
                                       m);
        }
        for (std::size_t v = 0; v < spec.variables.size(); ++v) {
            std::vector<double> sums(controls[v].size(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                sums[codes[v][i]] += vals[i];
            }
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t c = codes[v][i];
                vals[i] *= controls[v][c] / sums[c];
            }
        }
        ++iter;
        m = margins(vals, spec, codes);
        err = max_relative_error(m, controls);
        rep.error_history.push_back(err);
    }
    rep.iterations = iter;
    rep.max_relative_error = err;
    out.stage = Stage::Raked;
    out.lineage.push_back(Transform{"rake", {{"iterations", iter}, {"max_relative_error", err}}});
    out.check_positive();
    return out;
}

WeightVector scale_to_mean_one(const WeightVector &w) {
    if (w.values.empty()) {
        throw PreconditionError("scale_to_mean_one: empty weight vector");
    }
    WeightVector out = w;
    const double factor = static_cast<double>(w.size()) / w.total();
    for (double &v : out.values) {
        v *= factor;
    }
    out.stage = Stage::Scaled;
    out.lineage.push_back(Transform{"scale", {{"factor", factor}}});
    out.check_positive();
    return out;
}

WeightVector final_design_weights(const WeightVector &base, const RakingSpec &spec, const CategoryCodes &codes,
                                  const PipelineOptions &options, RakeReport *report) {
    base.check_positive();
    WeightVector w = trim_weights(base, options.first_trim);
    w = rake(w, spec, codes, report);
    w = scale_to_mean_one(w);
    w = trim_weights(w, options.second_trim);
    w = scale_to_mean_one(w);
    return w;
}

SectionResult section_nonresponse_weights(const WeightVector &design_w, const Eigen::MatrixXd &covariates,
                                          const std::vector<bool> &answered, const glm::LogitOptions &options) {
    const std::size_t n = design_w.size();
    if (static_cast<std::size_t>(covariates.rows()) != n || answered.size() != n) {
        throw PreconditionError("section_nonresponse_weights: inputs differ in length");
    }
    design_w.check_positive();
    SectionResult result;
    const auto n_answered = static_cast<std::size_t>(std::count(answered.begin(), answered.end(), true));
    result.propensity.assign(n, 1.0);
    if (n_answered == 0 || n_answered == n) {
        result.warnings.push_back(n_answered == 0 ? "no woman answered the violence section; propensity fit skipped"
                                                  : "every woman answered the violence section; propensity fit skipped");
    } else {
        Eigen::MatrixXd X(static_cast<Eigen::Index>(n), covariates.cols() + 1);
        X.col(0).setOnes();
        X.rightCols(covariates.cols()) = covariates;
        Eigen::VectorXd y(static_cast<Eigen::Index>(n));
        Eigen::VectorXd wv(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            y[static_cast<Eigen::Index>(i)] = answered[i] ? 1.0 : 0.0;
            wv[static_cast<Eigen::Index>(i)] = design_w.values[i];
        }
        std::vector<std::string> names = {"Constant"};
        for (Eigen::Index j = 0; j < covariates.cols(); ++j) {
            names.push_back(static_cast<std::size_t>(j) < kSectionCovariates.size() &&
                                    covariates.cols() == static_cast<Eigen::Index>(kSectionCovariates.size())
                                ? kSectionCovariates[static_cast<std::size_t>(j)]
                                : "x" + std::to_string(j + 1));
        }
        auto fit = glm::fit_weighted_logit(X, y, wv, names, options);
        if (!fit.converged) {
            throw ConvergenceError("section response logit did not converge in " + std::to_string(fit.n_iter) +
                                   " iterations");
        }
        const Eigen::VectorXd p = glm::predict_prob(fit, X);
        for (std::size_t i = 0; i < n; ++i) {
            result.propensity[i] = p[static_cast<Eigen::Index>(i)];
        }
        result.fit = std::move(fit);
    }

    WeightVector w;
    w.lineage = design_w.lineage;
    for (std::size_t i = 0; i < n; ++i) {
        if (answered[i]) {
            result.respondents.push_back(i);
            w.values.push_back(design_w.values[i] / result.propensity[i]);
        }
    }
    w.lineage.push_back(Transform{"section_propensity", {{"respondents", static_cast<double>(n_answered)}}});
    if (!w.values.empty()) {
        w = scale_to_mean_one(w);
    }
    w.stage = Stage::SectionAdjusted;
    result.weights = std::move(w);
    return result;
}

} // namespace surveyforge::adjust
