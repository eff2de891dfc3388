#include "surveyforge/pool.hpp"

#include "surveyforge/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace surveyforge::pool {

std::string_view to_string(Source source) noexcept { return source == Source::RE ? "RE" : "NAT"; }

Source parse_source(std::string_view text) {
    if (text == "RE") {
        return Source::RE;
    }
    if (text == "NAT") {
        return Source::NAT;
    }
    throw ConfigError("unknown sample source '" + std::string(text) + "' (expected RE or NAT)");
}

std::string_view to_string(OverlapScale scale) noexcept {
    return scale == OverlapScale::Absolute ? "absolute" : "relative";
}

OverlapScale parse_overlap_scale(std::string_view text) {
    if (text == "absolute") {
        return OverlapScale::Absolute;
    }
    if (text == "relative") {
        return OverlapScale::Relative;
    }
    throw ConfigError("unknown overlap scale '" + std::string(text) + "' (expected absolute or relative)");
}

namespace {

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd &values) {
    Eigen::MatrixXd X(values.rows(), values.cols() + 1);
    X.col(0).setOnes();
    X.rightCols(values.cols()) = values;
    return X;
}

} // namespace

CounterfactualModel fit_counterfactual_model(const std::vector<double> &source_probs, const CovariateTable &source) {
    const auto n = static_cast<Eigen::Index>(source_probs.size());
    if (source.values.rows() != n || static_cast<std::size_t>(source.values.cols()) != source.names.size()) {
        throw SchemaError("counterfactual source covariates do not match the probabilities");
    }
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double p = std::clamp(source_probs[static_cast<std::size_t>(i)], kProbClip, 1.0 - kProbClip);
        y[i] = std::log(p / (1.0 - p));
    }
    std::vector<std::string> names = {"Constant"};
    names.insert(names.end(), source.names.begin(), source.names.end());
    CounterfactualModel model;
    model.covariates = source.names;
    model.fit = glm::fit_weighted_linear(with_intercept(source.values), y, Eigen::VectorXd::Ones(n), names);
    return model;
}

std::vector<double> predict_counterfactual(const CounterfactualModel &model, const CovariateTable &target) {
    if (static_cast<std::size_t>(target.values.cols()) != target.names.size()) {
        throw SchemaError("counterfactual target covariate names do not match its columns");
    }
    Eigen::MatrixXd ordered(target.values.rows(), static_cast<Eigen::Index>(model.covariates.size()));
    for (const auto &name : target.names) {
        if (std::find(model.covariates.begin(), model.covariates.end(), name) == model.covariates.end()) {
            throw SchemaError("covariate '" + name + "' is present in the target but absent from the fit");
        }
    }
    for (std::size_t j = 0; j < model.covariates.size(); ++j) {
        auto it = std::find(target.names.begin(), target.names.end(), model.covariates[j]);
        if (it == target.names.end()) {
            throw SchemaError("covariate '" + model.covariates[j] + "' of the fit is missing from the target");
        }
        ordered.col(static_cast<Eigen::Index>(j)) = target.values.col(it - target.names.begin());
    }
    const Eigen::VectorXd eta = glm::predict_linear(model.fit, with_intercept(ordered));
    std::vector<double> out(static_cast<std::size_t>(eta.size()));
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double p = 1.0 / (1.0 + std::exp(-eta[i]));
        out[static_cast<std::size_t>(i)] = std::clamp(p, kProbClip, 1.0 - kProbClip);
    }
    return out;
}

std::vector<double> fit_counterfactual(const std::vector<double> &source_probs, const CovariateTable &source,
                                       const CovariateTable &target) {
    return predict_counterfactual(fit_counterfactual_model(source_probs, source), target);
}

double estimate_overlap(const std::vector<OverlapRecord> &records) {
    std::set<std::string> households;
    std::set<std::string> overlapping;
    for (const auto &r : records) {
        households.insert(r.household);
        if (r.source == Source::RE && r.in_household) {
            overlapping.insert(r.household);
        }
    }
    if (households.empty()) {
        return 0.0;
    }
    const double share = static_cast<double>(overlapping.size()) / static_cast<double>(households.size());
    if (share >= 1.0) {
        throw IntegrityError("every combined-sample household is an overlap household; the joint-selection "
                             "probability must stay below 1");
    }
    return share;
}

adjust::WeightVector pooled_weights(std::vector<PooledSampleMember> &members, double overlap, OverlapScale scale) {
    if (!(overlap >= 0.0 && overlap < 1.0)) {
        throw PreconditionError("pooled_weights: overlap must lie in [0, 1)");
    }
    std::vector<double> values;
    values.reserve(members.size());
    for (auto &m : members) {
        const std::string who = std::string(to_string(m.source)) + " member " + m.id;
        if (!(m.p_own > 0.0 && m.p_own <= 1.0)) {
            throw IntegrityError(who + ": own-sample probability " + std::to_string(m.p_own) + " outside (0, 1]");
        }
        if (!(m.p_hat_other >= 0.0 && m.p_hat_other < 1.0)) {
            throw IntegrityError(who + ": counterfactual probability " + std::to_string(m.p_hat_other) +
                                 " outside [0, 1)");
        }
        const double sum = m.p_own + m.p_hat_other;
        m.p_overlap = scale == OverlapScale::Absolute ? overlap : overlap * sum / (1.0 + overlap);
        const double denominator = sum - m.p_overlap;
        if (!(denominator > 0.0) || m.p_overlap > std::min(sum, 1.0)) {
            throw IntegrityError(who + ": pooled denominator " + std::to_string(denominator) +
                                 " is not positive (p_own " + std::to_string(m.p_own) + ", p_hat_other " +
                                 std::to_string(m.p_hat_other) + ", overlap " + std::to_string(m.p_overlap) + ")");
        }
        m.pooled_weight = 1.0 / denominator;
        values.push_back(m.pooled_weight);
    }
    auto w = adjust::WeightVector::make(std::move(values), adjust::Stage::Pooled);
    w.lineage.push_back(adjust::Transform{
        "pool", {{"overlap", overlap}, {"relative_scale", scale == OverlapScale::Relative ? 1.0 : 0.0}}});
    return w;
}

} // namespace surveyforge::pool
