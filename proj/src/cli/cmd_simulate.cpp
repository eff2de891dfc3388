#include "common.hpp"

#include "surveyforge/csv.hpp"
#include "surveyforge/sim.hpp"

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace surveyforge::cli {

namespace {

struct Entry {
    sim::ScenarioConfig config;
    bool emit_sample = false;
};

Entry parse_entry(const Context &ctx, const nlohmann::json &node) {
    nlohmann::json j = node;
    if (node.is_string()) {
        const auto path = ctx.resolve(node.get<std::string>());
        std::ifstream in(path);
        if (!in) {
            throw ConfigError("cannot open scenario '" + path.string() + "'");
        }
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception &e) {
            throw ConfigError("scenario '" + path.string() + "': " + e.what());
        }
    }
    if (!j.is_object()) {
        throw ConfigError("a scenario must be a JSON object or a path to one");
    }
    if (ctx.seed) {
        j["seed"] = *ctx.seed;
    }
    Entry e;
    e.emit_sample = j.value("emit_sample", false);
    j.erase("emit_sample");
    e.config = sim::ScenarioConfig::from_json(j);
    return e;
}

void emit_sample(const Context &ctx, const Entry &entry, const frame::SamplingFrame &frame) {
    const auto &config = entry.config;
    const auto dir = ctx.out / (config.name + "_sample");
    std::filesystem::create_directories(dir);
    rng::Stream stream = rng::Stream(config.seed).substream("sample");
    const auto wave1 = sim::draw_wave1(frame, config, stream);

    std::ostringstream f;
    frame::write_frame(f, frame);
    write_file(dir / "frame.csv", f.str());
    std::vector<Observation> obs;
    for (const auto &w : wave1.women) {
        obs.push_back(w.obs);
    }
    std::ostringstream o;
    write_observations(o, obs);
    write_file(dir / "observations.csv", o.str());
    std::ostringstream v;
    write_visits(v, wave1.visits);
    write_file(dir / "visits.csv", v.str());

    nlohmann::json raking = nlohmann::json::object();
    for (const auto &city : frame.cities) {
        const std::string name = "raking_" + city.id + ".json";
        write_file(dir / name, sim::truth_raking_spec(city.truth).to_json().dump(2) + "\n");
        raking[city.id] = name;
    }
    nlohmann::json weight = {
        {"frame", "frame.csv"}, {"observations", "observations.csv"}, {"visits", "visits.csv"}, {"raking", raking}};
    if (config.attrition.enabled) {
        rng::Stream s2 = rng::Stream(config.seed).substream("sample-wave2");
        const auto wave2 = sim::apply_attrition_and_refresh(wave1, frame, config, s2);
        std::ostringstream m;
        csv::Writer writer(m);
        std::vector<std::string> header = {"city",         "woman_id",  "household", "source",   "p_own",
                                           "in_household", "age_group", "race",      "education"};
        header.insert(header.end(), config.attrition.covariates.begin(), config.attrition.covariates.end());
        writer.row(header);
        for (const auto &member : wave2.members) {
            const auto &ob = member.woman.obs;
            std::vector<std::string> row = {ob.city, ob.woman_id, ob.household,
                                            std::string(pool::to_string(member.source)),
                                            csv::format_exact(member.p_own), member.in_household ? "1" : "0",
                                            attribute_label(ob, "age_group"), attribute_label(ob, "race"),
                                            attribute_label(ob, "education")};
            for (const auto &c : config.attrition.covariates) {
                row.push_back(csv::format_exact(covariate_value(ob, c)));
            }
            writer.row(row);
        }
        write_file(dir / "members.csv", m.str());
        weight["pooling"] = {{"members", "members.csv"},
                             {"covariates", config.attrition.covariates},
                             {"overlap_scale", std::string(pool::to_string(config.attrition.overlap_scale))}};
    }
    write_file(dir / "weight_config.json", weight.dump(2) + "\n");
    nlohmann::json prevalence = {{"year", 2016}, {"observations", "observations.csv"}};
    write_file(dir / "prevalence_config.json", prevalence.dump(2) + "\n");
    nlohmann::json compare = {{"prevalence", "prevalence.csv"}};
    write_file(dir / "compare_config.json", compare.dump(2) + "\n");
}

} // namespace

int cmd_simulate(const Context &ctx) {
    std::vector<Entry> entries;
    if (ctx.config.contains("scenarios")) {
        const auto &list = ctx.config.at("scenarios");
        if (!list.is_array() || list.empty()) {
            throw ConfigError("'scenarios' must be a nonempty array");
        }
        for (const auto &node : list) {
            entries.push_back(parse_entry(ctx, node));
        }
    } else {
        entries.push_back(parse_entry(ctx, ctx.config));
    }
    std::set<std::string> names;
    for (const auto &e : entries) {
        if (!names.insert(e.config.name).second) {
            throw ConfigError("duplicate scenario name '" + e.config.name + "'");
        }
    }

    std::ostringstream assertions;
    csv::Writer writer(assertions);
    writer.row({"scenario", "metric", "cell", "value", "min", "max", "passed"});
    bool all_passed = true;
    for (const auto &entry : entries) {
        const auto &config = entry.config;
        ctx.info("scenario " + config.name + ": " + std::to_string(config.replicates) + " replicates");
        const auto frame = frame::generate_synthetic_frame(config.frame);
        if (entry.emit_sample) {
            emit_sample(ctx, entry, frame);
        }
        const auto result = sim::run_monte_carlo(frame, config);
        std::set<std::string> seen;
        for (const auto &rep : result.replicates) {
            for (const auto &w : rep.warnings) {
                if (seen.insert(w).second && ctx.log_level >= LogLevel::Debug) {
                    ctx.warn(w);
                }
            }
        }
        if (!seen.empty()) {
            ctx.info(config.name + ": " + std::to_string(seen.size()) + " distinct replicate warnings");
        }

        std::ostringstream reps;
        sim::write_replicates_csv(reps, result, frame);
        write_file(ctx.output(config.name + "_replicates.csv"), reps.str());
        std::ostringstream summary;
        sim::write_summary_csv(summary, result);
        write_file(ctx.output(config.name + "_summary.csv"), summary.str());

        for (const auto &a : result.assertions) {
            writer.row({config.name, a.assertion.metric, a.assertion.cell, csv::format_exact(a.value),
                        a.assertion.min ? csv::format_exact(*a.assertion.min) : std::string(),
                        a.assertion.max ? csv::format_exact(*a.assertion.max) : std::string(),
                        a.passed ? "1" : "0"});
            std::cout << (a.passed ? "PASS " : "FAIL ") << config.name << ' ' << a.assertion.metric << '['
                      << a.assertion.cell << "] = " << csv::format_exact(a.value) << '\n';
        }
        all_passed = all_passed && result.passed();
    }
    write_file(ctx.output("assertions.csv"), assertions.str());
    return all_passed ? 0 : 1;
}

} // namespace surveyforge::cli
