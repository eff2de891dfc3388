#include "surveyforge/sim.hpp"

#include "surveyforge/error.hpp"

#include <cmath>
#include <fstream>

namespace surveyforge::sim {

namespace {

double logistic(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

void require_prob(double p, const std::string &what) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw ConfigError(what + " must lie in [0,1]");
    }
}

} // namespace

double ResponseModel::probability(const frame::Covariates &cov) const noexcept {
    return logistic(intercept + cohab * cov.cohab + know_victim * cov.know_victim + children * cov.children);
}

ResponseModel ResponseModel::constant(double p) {
    require_prob(p, "response probability");
    if (p >= 1.0) {
        return ResponseModel{};
    }
    if (p <= 0.0) {
        return ResponseModel{-40.0, 0.0, 0.0, 0.0};
    }
    return ResponseModel{std::log(p / (1.0 - p)), 0.0, 0.0, 0.0};
}

double AttritionConfig::probability(const frame::Covariates &cov) const noexcept {
    if (!enabled) {
        return 0.0;
    }
    return model == AttritionModel::MCAR ? rate : mar.probability(cov);
}

void DesignConfig::validate() const {
    if (psus_per_stratum < 1 || tracts_per_psu < 1 || households_per_tract < 1) {
        throw ConfigError("design: PSUs per stratum, tracts per PSU and households per tract must be at least 1");
    }
    if (min_questionnaires < 4 || max_questionnaires > 12 || min_questionnaires > max_questionnaires) {
        throw ConfigError("design: questionnaires per tract must satisfy 4 <= min <= max <= 12");
    }
    require_prob(household_response, "design.household_response");
}

void AttritionConfig::validate() const {
    require_prob(rate, "attrition.rate");
    require_prob(substitute_accept, "attrition.substitute_accept");
}

void ScenarioConfig::validate() const {
    if (replicates < 1) {
        throw ConfigError("scenario '" + name + "': replicates must be at least 1");
    }
    if (threads < 1) {
        throw ConfigError("scenario '" + name + "': threads must be at least 1");
    }
    if (!(level > 0.0 && level < 1.0)) {
        throw ConfigError("scenario '" + name + "': level must lie in (0,1)");
    }
    if (cells.empty()) {
        throw ConfigError("scenario '" + name + "': no outcome cells selected");
    }
    for (std::size_t c : cells) {
        if (c >= kNumCells) {
            throw ConfigError("scenario '" + name + "': cell index out of range");
        }
    }
    frame.validate();
    design.validate();
    attrition.validate();
    for (const auto &a : assertions) {
        if (!a.min && !a.max) {
            throw ConfigError("scenario '" + name + "': assertion on '" + a.metric + "' has no bound");
        }
    }
}

std::string cell_name(std::size_t cell) {
    return std::string(to_string(cell_type(cell))) + "_" + std::string(to_string(cell_window(cell)));
}

std::size_t parse_cell_name(const std::string &name) {
    for (std::size_t c = 0; c < kNumCells; ++c) {
        if (cell_name(c) == name) {
            return c;
        }
    }
    throw ConfigError("unknown outcome cell '" + name + "'");
}

namespace {

ResponseModel response_from_json(const nlohmann::json &j, ResponseModel fallback) {
    if (j.is_number()) {
        return ResponseModel::constant(j.get<double>());
    }
    if (j.contains("rate")) {
        return ResponseModel::constant(j.at("rate").get<double>());
    }
    ResponseModel m = fallback;
    m.intercept = j.value("intercept", m.intercept);
    m.cohab = j.value("cohab", m.cohab);
    m.know_victim = j.value("know_victim", m.know_victim);
    m.children = j.value("children", m.children);
    return m;
}

frame::FrameGenConfig frame_from_json(const nlohmann::json &j) {
    frame::FrameGenConfig f;
    f.seed = j.value("seed", f.seed);
    f.n_cities = j.value("n_cities", f.n_cities);
    f.neighborhoods_per_city = j.value("neighborhoods_per_city", f.neighborhoods_per_city);
    f.tracts_min = j.value("tracts_min", f.tracts_min);
    f.tracts_max = j.value("tracts_max", f.tracts_max);
    f.households_min = j.value("households_min", f.households_min);
    f.households_max = j.value("households_max", f.households_max);
    f.eligible_women_probs = j.value("eligible_women_probs", f.eligible_women_probs);
    f.p_young = j.value("p_young", f.p_young);
    f.p_white = j.value("p_white", f.p_white);
    f.education_probs = j.value("education_probs", f.education_probs);
    f.p_cohab = j.value("p_cohab", f.p_cohab);
    f.p_know_victim = j.value("p_know_victim", f.p_know_victim);
    f.p_children = j.value("p_children", f.p_children);
    if (j.contains("prevalence")) {
        const auto &p = j.at("prevalence");
        if (p.is_array()) {
            f.prevalence = p.get<std::array<double, kNumCells>>();
        } else {
            for (const auto &[key, value] : p.items()) {
                f.prevalence[parse_cell_name(key)] = value.get<double>();
            }
        }
    }
    f.effect_cohab = j.value("effect_cohab", f.effect_cohab);
    f.effect_know_victim = j.value("effect_know_victim", f.effect_know_victim);
    f.effect_children = j.value("effect_children", f.effect_children);
    f.effect_young = j.value("effect_young", f.effect_young);
    f.effect_nonwhite = j.value("effect_nonwhite", f.effect_nonwhite);
    f.extra_item_prob = j.value("extra_item_prob", f.extra_item_prob);
    return f;
}

} // namespace

ScenarioConfig ScenarioConfig::from_json(const nlohmann::json &j) {
    ScenarioConfig s;
    try {
        s.name = j.value("name", s.name);
        s.seed = j.value("seed", s.seed);
        s.replicates = j.value("replicates", s.replicates);
        s.threads = j.value("threads", s.threads);
        s.level = j.value("level", s.level);
        if (j.contains("frame")) {
            s.frame = frame_from_json(j.at("frame"));
        }
        if (j.contains("design")) {
            const auto &d = j.at("design");
            s.design.psus_per_stratum = d.value("psus_per_stratum", s.design.psus_per_stratum);
            s.design.tracts_per_psu = d.value("tracts_per_psu", s.design.tracts_per_psu);
            s.design.households_per_tract = d.value("households_per_tract", s.design.households_per_tract);
            s.design.min_questionnaires = d.value("min_questionnaires", s.design.min_questionnaires);
            s.design.max_questionnaires = d.value("max_questionnaires", s.design.max_questionnaires);
            s.design.skip_rule = d.value("skip_rule", s.design.skip_rule);
            s.design.household_response = d.value("household_response", s.design.household_response);
            const std::string method = d.value("psu_method", std::string("systematic"));
            if (method == "systematic") {
                s.design.psu_method = PsuMethod::Systematic;
            } else if (method == "multinomial") {
                s.design.psu_method = PsuMethod::Multinomial;
            } else {
                throw ConfigError("design.psu_method must be systematic or multinomial");
            }
        }
        if (j.contains("section_response")) {
            s.section = response_from_json(j.at("section_response"), ResponseModel{});
        }
        const std::string weighting = j.value("weighting", std::string("base"));
        if (weighting == "base") {
            s.weighting = WeightingMode::Base;
        } else if (weighting == "final") {
            s.weighting = WeightingMode::Final;
        } else if (weighting == "section") {
            s.weighting = WeightingMode::Section;
        } else {
            throw ConfigError("weighting must be base, final or section");
        }
        if (j.contains("attrition")) {
            const auto &a = j.at("attrition");
            s.attrition.enabled = a.value("enabled", true);
            const std::string model = a.value("model", std::string("MCAR"));
            if (model == "MCAR") {
                s.attrition.model = AttritionModel::MCAR;
            } else if (model == "MAR") {
                s.attrition.model = AttritionModel::MAR;
            } else {
                throw ConfigError("attrition.model must be MCAR or MAR");
            }
            s.attrition.rate = a.value("rate", s.attrition.rate);
            if (a.contains("mar")) {
                s.attrition.mar = response_from_json(a.at("mar"), s.attrition.mar);
            }
            s.attrition.substitution = a.value("substitution", s.attrition.substitution);
            s.attrition.substitute_accept = a.value("substitute_accept", s.attrition.substitute_accept);
            s.attrition.refresh = a.value("refresh", s.attrition.refresh);
            s.attrition.covariates = a.value("covariates", s.attrition.covariates);
            s.attrition.overlap_scale =
                pool::parse_overlap_scale(a.value("overlap_scale", std::string("relative")));
        }
        if (j.contains("cells")) {
            s.cells.clear();
            for (const auto &c : j.at("cells")) {
                s.cells.push_back(parse_cell_name(c.get<std::string>()));
            }
        }
        const std::string ci = j.value("ci_method", std::string("logit"));
        if (ci == "logit") {
            s.ci_method = estimate::CiMethod::Logit;
        } else if (ci == "wald") {
            s.ci_method = estimate::CiMethod::Wald;
        } else {
            throw ConfigError("ci_method must be logit or wald");
        }
        if (j.contains("assertions")) {
            for (const auto &ja : j.at("assertions")) {
                Assertion a;
                a.metric = ja.at("metric").get<std::string>();
                a.cell = ja.value("cell", a.cell);
                if (ja.contains("min")) {
                    a.min = ja.at("min").get<double>();
                }
                if (ja.contains("max")) {
                    a.max = ja.at("max").get<double>();
                }
                s.assertions.push_back(std::move(a));
            }
        }
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError("scenario: " + std::string(e.what()));
    }
    s.validate();
    return s;
}

ScenarioConfig ScenarioConfig::load(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open scenario '" + path + "'");
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError("scenario '" + path + "': " + e.what());
    }
    return from_json(j);
}

} // namespace surveyforge::sim
