#include "common.hpp"

#include "surveyforge/adjust.hpp"
#include "surveyforge/csv.hpp"
#include "surveyforge/design.hpp"
#include "surveyforge/frame.hpp"
#include "surveyforge/glm.hpp"
#include "surveyforge/observation.hpp"
#include "surveyforge/pool.hpp"

#include <map>
#include <sstream>

namespace surveyforge::cli {

namespace {

adjust::RakingSpec raking_for(const Context &ctx, const nlohmann::json &node, const std::string &city) {
    std::string path;
    if (node.is_string()) {
        path = node.get<std::string>();
    } else if (node.is_object() && node.contains(city)) {
        path = node.at(city).get<std::string>();
    } else {
        throw ConfigError("no raking spec for city " + city);
    }
    const auto resolved = ctx.resolve(path);
    if (!std::filesystem::exists(resolved)) {
        throw ConfigError("raking spec not found: " + resolved.string());
    }
    return adjust::RakingSpec::load(resolved.string());
}

adjust::TrimOptions trim_from(const nlohmann::json &j, adjust::TrimOptions t) {
    t.lower_q = j.value("lower_q", t.lower_q);
    t.upper_q = j.value("upper_q", t.upper_q);
    t.proportional = j.value("proportional", t.proportional);
    t.weighted_quantiles = j.value("weighted_quantiles", t.weighted_quantiles);
    t.max_passes = j.value("max_passes", t.max_passes);
    if (!(t.lower_q >= 0.0 && t.lower_q < t.upper_q && t.upper_q <= 1.0)) {
        throw ConfigError("trim quantiles must satisfy 0 <= lower_q < upper_q <= 1");
    }
    return t;
}

void write_weights(std::ostringstream &out, const std::vector<std::string> &ids, const adjust::WeightVector &w) {
    csv::Writer writer(out);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        writer.row({ids[i], std::string(adjust::to_string(w.stage)), csv::format_exact(w.values[i])});
    }
}

void diagnostics_row(csv::Writer &writer, const std::string &city, const std::vector<double> &w) {
    const auto s = summarize_weights(w);
    writer.row({city, std::to_string(s.n), csv::format_2dp(s.mean), csv::format_2dp(s.sd), csv::format_2dp(s.min),
                csv::format_2dp(s.max), csv::format_2dp(s.iqr), csv::format_2dp(s.cv)});
}

const std::vector<std::string> kDiagnosticsHeader = {"City", "N", "Mean", "Sd", "Min", "Max", "IQR", "CV"};

struct MemberRow {
    std::string city;
    pool::PooledSampleMember member;
    bool in_household = false;
    std::vector<std::string> labels;
    std::vector<double> covariates;
};

void run_pooling(const Context &ctx, const nlohmann::json &pooling, const nlohmann::json &raking,
                 const adjust::PipelineOptions &pipeline) {
    if (!pooling.contains("members")) {
        throw ConfigError("pooling.members must name the pooled-members CSV");
    }
    const auto path = ctx.resolve(pooling.at("members").get<std::string>());
    if (!std::filesystem::exists(path)) {
        throw ConfigError("pooling members file not found: " + path.string());
    }
    const auto covariates =
        pooling.value("covariates", std::vector<std::string>(pool::kDefaultCounterfactualCovariates));
    const auto scale = pool::parse_overlap_scale(pooling.value("overlap_scale", std::string("relative")));
    const std::vector<std::string> attributes = {"age_group", "race", "education"};

    const auto table = csv::Table::read(path.string());
    const auto c_city = table.require_column("city");
    const auto c_id = table.require_column("woman_id");
    const auto c_hh = table.require_column("household");
    const auto c_source = table.require_column("source");
    const auto c_p = table.require_column("p_own");
    const auto c_in = table.require_column("in_household");
    std::vector<std::size_t> c_attr;
    for (const auto &a : attributes) {
        c_attr.push_back(table.require_column(a));
    }
    std::vector<std::size_t> c_cov;
    for (const auto &c : covariates) {
        c_cov.push_back(table.require_column(c));
    }

    std::vector<std::string> cities;
    std::map<std::string, std::vector<MemberRow>> by_city;
    for (std::size_t r = 0; r < table.rows(); ++r) {
        MemberRow m;
        m.city = table.at(r, c_city);
        m.member.id = table.at(r, c_id);
        m.member.household = table.at(r, c_hh);
        try {
            m.member.source = pool::parse_source(table.at(r, c_source));
        } catch (const Error &e) {
            throw ParseError(table.source(), table.line(r), e.what());
        }
        m.member.p_own = table.as_double(r, c_p);
        m.in_household = table.as_long(r, c_in) != 0;
        for (auto c : c_attr) {
            m.labels.push_back(table.at(r, c));
        }
        for (auto c : c_cov) {
            m.covariates.push_back(table.as_double(r, c));
        }
        if (!by_city.count(m.city)) {
            cities.push_back(m.city);
        }
        by_city[m.city].push_back(std::move(m));
    }

    std::ostringstream pooled_csv;
    std::ostringstream weights_csv;
    csv::Writer pooled_writer(pooled_csv);
    csv::Writer weights_writer(weights_csv);
    pooled_writer.row({"woman_id", "source", "p_own", "p_hat_other", "p_overlap", "pooled_weight"});
    weights_writer.row({"woman_id", "stage", "weight"});
    std::ostringstream diag_csv;
    csv::Writer diag_writer(diag_csv);
    diag_writer.row(kDiagnosticsHeader);

    for (const auto &city : cities) {
        auto &rows = by_city[city];
        auto table_for = [&](pool::Source source, std::vector<double> &probs, std::vector<std::size_t> &index) {
            pool::CovariateTable t;
            t.names = covariates;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                if (rows[i].member.source == source) {
                    index.push_back(i);
                    probs.push_back(rows[i].member.p_own);
                }
            }
            t.values.resize(static_cast<Eigen::Index>(index.size()), static_cast<Eigen::Index>(covariates.size()));
            for (std::size_t k = 0; k < index.size(); ++k) {
                for (std::size_t j = 0; j < covariates.size(); ++j) {
                    t.values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) =
                        rows[index[k]].covariates[j];
                }
            }
            return t;
        };
        std::vector<double> p_re;
        std::vector<double> p_nat;
        std::vector<std::size_t> i_re;
        std::vector<std::size_t> i_nat;
        const auto t_re = table_for(pool::Source::RE, p_re, i_re);
        const auto t_nat = table_for(pool::Source::NAT, p_nat, i_nat);
        auto assign = [&](const std::vector<double> &src_p, const pool::CovariateTable &src,
                          const pool::CovariateTable &tgt, const std::vector<std::size_t> &index) {
            if (index.empty()) {
                return;
            }
            if (src_p.empty()) {
                ctx.warn("city " + city + ": other sample is empty, counterfactual probabilities set to 0");
                return;
            }
            const auto hat = pool::fit_counterfactual(src_p, src, tgt);
            for (std::size_t k = 0; k < index.size(); ++k) {
                rows[index[k]].member.p_hat_other = hat[k];
            }
        };
        assign(p_nat, t_nat, t_re, i_re);
        assign(p_re, t_re, t_nat, i_nat);

        std::vector<pool::OverlapRecord> records;
        std::vector<pool::PooledSampleMember> members;
        for (const auto &m : rows) {
            records.push_back({m.member.household, m.member.source, m.in_household});
            members.push_back(m.member);
        }
        const double overlap = pool::estimate_overlap(records);
        const auto pooled = pool::pooled_weights(members, overlap, scale);
        const auto spec = raking_for(ctx, raking, city);
        std::vector<std::vector<std::string>> labels(spec.variables.size());
        for (std::size_t v = 0; v < spec.variables.size(); ++v) {
            std::size_t a = 0;
            while (a < attributes.size() && attributes[a] != spec.variables[v].name) {
                ++a;
            }
            if (a == attributes.size()) {
                throw ConfigError("raking variable '" + spec.variables[v].name +
                                  "' is not a pooled-members column");
            }
            for (const auto &m : rows) {
                labels[v].push_back(m.labels[a]);
            }
        }
        const auto final = adjust::final_design_weights(pooled, spec, adjust::code_categories(spec, labels), pipeline);
        for (std::size_t i = 0; i < members.size(); ++i) {
            const auto &m = members[i];
            pooled_writer.row({m.id, std::string(pool::to_string(m.source)), csv::format_exact(m.p_own),
                               csv::format_exact(m.p_hat_other), csv::format_exact(m.p_overlap),
                               csv::format_exact(m.pooled_weight)});
            weights_writer.row({m.id, std::string(adjust::to_string(final.stage)), csv::format_exact(final.values[i])});
        }
        diagnostics_row(diag_writer, city, final.values);
        ctx.info("pooled " + std::to_string(members.size()) + " members in " + city + " (overlap " +
                 csv::format_exact(overlap) + ")");
    }
    write_file(ctx.output("pooled.csv"), pooled_csv.str());
    write_file(ctx.output("weights_pooled.csv"), weights_csv.str());
    write_file(ctx.output("diagnostics_pooled.csv"), diag_csv.str());
}

} // namespace

int cmd_weight(const Context &ctx) {
    const auto frame = frame::load_frame(ctx.input("frame").string());
    const auto observations = load_observations(ctx.input("observations").string());
    const auto visits = load_visits(ctx.input("visits").string());
    if (!ctx.config.contains("raking")) {
        throw ConfigError("config key 'raking' must name a raking spec (or one per city)");
    }
    const auto &raking = ctx.config.at("raking");

    adjust::PipelineOptions pipeline;
    if (ctx.config.contains("trim")) {
        const auto &t = ctx.config.at("trim");
        pipeline.first_trim = trim_from(t, pipeline.first_trim);
        pipeline.second_trim.upper_q = t.value("second_upper_q", pipeline.second_trim.upper_q);
        pipeline.second_trim.proportional = pipeline.first_trim.proportional;
        pipeline.second_trim.weighted_quantiles = pipeline.first_trim.weighted_quantiles;
    }
    glm::LogitOptions logit;
    logit.ridge = ctx.config.value("logit_ridge", logit.ridge);

    design::DesignDiagnostics diag;
    const auto probs = design::observation_probabilities(frame, observations, visits, &diag);
    for (const auto &w : diag.warnings) {
        ctx.warn(w);
    }
    for (const auto &t : diag.thin_tracts) {
        ctx.warn("tract " + t + " has fewer than 2 valid questionnaires");
    }

    std::vector<std::string> cities;
    std::map<std::string, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < observations.size(); ++i) {
        const auto &city = observations[i].city;
        if (!members.count(city)) {
            cities.push_back(city);
        }
        members[city].push_back(i);
    }

    std::ostringstream base_csv;
    std::ostringstream final_csv;
    std::ostringstream section_csv;
    for (auto *s : {&base_csv, &final_csv, &section_csv}) {
        csv::Writer(*s).row({"woman_id", "stage", "weight"});
    }
    std::ostringstream diag_design;
    std::ostringstream diag_section;
    csv::Writer design_writer(diag_design);
    csv::Writer section_writer(diag_section);
    design_writer.row(kDiagnosticsHeader);
    section_writer.row(kDiagnosticsHeader);
    std::vector<std::pair<std::string, glm::LogitFit>> fits;

    for (const auto &city : cities) {
        const auto &idx = members[city];
        std::vector<std::string> ids;
        std::vector<double> base;
        for (auto i : idx) {
            ids.push_back(observations[i].woman_id);
            base.push_back(design::base_weight(probs[i].p_overall));
        }
        const auto base_w = adjust::WeightVector::make(base);
        write_weights(base_csv, ids, base_w);

        const auto spec = raking_for(ctx, raking, city);
        std::vector<std::vector<std::string>> labels(spec.variables.size());
        for (std::size_t v = 0; v < spec.variables.size(); ++v) {
            for (auto i : idx) {
                labels[v].push_back(attribute_label(observations[i], spec.variables[v].name));
            }
        }
        adjust::RakeReport report;
        const auto final =
            adjust::final_design_weights(base_w, spec, adjust::code_categories(spec, labels), pipeline, &report);
        ctx.info("city " + city + ": raking converged in " + std::to_string(report.iterations) + " sweeps");
        write_weights(final_csv, ids, final);
        diagnostics_row(design_writer, city, final.values);

        Eigen::MatrixXd cov(static_cast<Eigen::Index>(idx.size()), 3);
        std::vector<bool> answered;
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const auto &c = observations[idx[k]].covariates;
            cov.row(static_cast<Eigen::Index>(k)) << double(c.cohab), double(c.know_victim), double(c.children);
            answered.push_back(observations[idx[k]].answered_violence);
        }
        auto section = adjust::section_nonresponse_weights(final, cov, answered, logit);
        for (const auto &w : section.warnings) {
            ctx.warn("city " + city + ": " + w);
        }
        std::vector<std::string> respondent_ids;
        for (auto r : section.respondents) {
            respondent_ids.push_back(ids[r]);
        }
        write_weights(section_csv, respondent_ids, section.weights);
        diagnostics_row(section_writer, city, section.weights.values);
        if (section.fit) {
            fits.emplace_back(city, *section.fit);
        }
    }

    write_file(ctx.output("weights_base.csv"), base_csv.str());
    write_file(ctx.output("weights_final.csv"), final_csv.str());
    write_file(ctx.output("weights_section.csv"), section_csv.str());
    write_file(ctx.output("diagnostics_design.csv"), diag_design.str());
    write_file(ctx.output("diagnostics_section.csv"), diag_section.str());
    write_file(ctx.output("logit_report.txt"),
               fits.empty() ? std::string("No nonresponse models were fitted.\n")
                            : glm::format_logit_table("Logit models for answering the violence section", fits));

    if (ctx.config.contains("pooling")) {
        run_pooling(ctx, ctx.config.at("pooling"), raking, pipeline);
    }
    return 0;
}

} // namespace surveyforge::cli
