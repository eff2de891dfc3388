#include "common.hpp"

#include "surveyforge/csv.hpp"
#include "surveyforge/estimate.hpp"
#include "surveyforge/observation.hpp"
#include "surveyforge/sim.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <unordered_map>

namespace surveyforge::cli {

namespace {

std::unordered_map<std::string, double> read_weights(const std::filesystem::path &path) {
    const auto table = csv::Table::read(path.string());
    const auto c_id = table.require_column("woman_id");
    const auto c_w = table.require_column("weight");
    std::unordered_map<std::string, double> out;
    for (std::size_t r = 0; r < table.rows(); ++r) {
        if (!out.emplace(table.at(r, c_id), table.as_double(r, c_w)).second) {
            throw ParseError(table.source(), table.line(r), "duplicate woman_id '" + table.at(r, c_id) + "'");
        }
    }
    return out;
}

std::filesystem::path weights_path(const Context &ctx, const std::string &design, const std::string &default_name) {
    if (ctx.config.contains("weights") && ctx.config.at("weights").contains(design)) {
        auto p = ctx.resolve(ctx.config.at("weights").at(design).get<std::string>());
        if (!std::filesystem::exists(p)) {
            throw MissingArtifactError(design + " weights not found: " + p.string() +
                                       " (run `surveyforge weight` first)");
        }
        return p;
    }
    const auto dir = ctx.config.contains("weights_dir") ? ctx.resolve(ctx.config.at("weights_dir").get<std::string>())
                                                        : ctx.out;
    auto p = dir / default_name;
    if (!std::filesystem::exists(p)) {
        throw MissingArtifactError(design + " weights not found: " + p.string() + " (run `surveyforge weight` first)");
    }
    return p;
}

struct CityData {
    std::string city;
    estimate::SurveyDesign design;
    std::vector<const Observation *> obs;
};

/// Per-city designs over the observations carrying a weight in `weights`
/// (all of them when `require_all`).
std::vector<CityData> city_designs(const std::vector<Observation> &observations,
                                   const std::unordered_map<std::string, double> &weights, bool require_all,
                                   bool unit_weights) {
    std::vector<CityData> out;
    std::map<std::string, std::size_t> index;
    for (const auto &o : observations) {
        const auto it = weights.find(o.woman_id);
        if (it == weights.end()) {
            if (require_all) {
                throw IntegrityError("no weight for woman " + o.woman_id);
            }
            continue;
        }
        auto [pos, fresh] = index.emplace(o.city, out.size());
        if (fresh) {
            out.push_back({o.city, {}, {}});
        }
        auto &c = out[pos->second];
        c.design.strata.push_back(o.stratum);
        c.design.psus.push_back(o.neighborhood);
        c.design.weights.push_back(unit_weights ? 1.0 : it->second);
        c.obs.push_back(&o);
    }
    return out;
}

std::vector<signed char> indicator(const std::vector<const Observation *> &obs, std::size_t cell) {
    std::vector<signed char> y;
    for (const auto *o : obs) {
        const auto v = estimate::victim_indicator(o->items, cell_type(cell), cell_window(cell));
        y.push_back(v ? static_cast<signed char>(*v) : static_cast<signed char>(-1));
    }
    return y;
}

bool has_values(const std::vector<signed char> &y) {
    for (auto v : y) {
        if (v >= 0) {
            return true;
        }
    }
    return false;
}

} // namespace

int cmd_prevalence(const Context &ctx) {
    const int year = ctx.config.value("year", 0);
    const auto observations = load_observations(ctx.input("observations").string());
    const auto original_w = read_weights(weights_path(ctx, "original", "weights_base.csv"));
    const auto weighted_w = read_weights(weights_path(ctx, "weighted", "weights_section.csv"));
    const std::string ci = ctx.config.value("ci_method", std::string("logit"));
    if (ci != "logit" && ci != "wald") {
        throw ConfigError("ci_method must be logit or wald");
    }
    const auto method = ci == "logit" ? estimate::CiMethod::Logit : estimate::CiMethod::Wald;
    const double level = ctx.config.value("level", 0.95);
    if (!(level > 0.0 && level < 1.0)) {
        throw ConfigError("level must lie in (0,1)");
    }
    const std::string region = ctx.config.value("region", std::string("Nordeste"));

    const std::vector<std::pair<estimate::DesignKind, std::vector<CityData>>> designs = {
        {estimate::DesignKind::Original, city_designs(observations, original_w, true, false)},
        {estimate::DesignKind::Unweighted, city_designs(observations, weighted_w, false, true)},
        {estimate::DesignKind::Weighted, city_designs(observations, weighted_w, false, false)},
    };

    std::vector<estimate::PrevalenceEstimate> rows;
    for (std::size_t cell = 0; cell < kNumCells; ++cell) {
        for (const auto &[kind, cities] : designs) {
            std::vector<estimate::CityDesign> pooled;
            for (const auto &c : cities) {
                auto y = indicator(c.obs, cell);
                if (!has_values(y)) {
                    ctx.warn("no answers for " + c.city + " " + sim::cell_name(cell) + " (" +
                             std::string(estimate::to_string(kind)) + "); row omitted");
                    continue;
                }
                auto est = estimate::prevalence(c.design, y, method, level);
                est.year = year;
                est.city = c.city;
                est.type = cell_type(cell);
                est.window = cell_window(cell);
                est.design = kind;
                rows.push_back(est);
                pooled.push_back({c.city, c.design, std::move(y)});
            }
            if (!pooled.empty()) {
                auto est = estimate::region_aggregate(pooled, method, level);
                est.year = year;
                est.city = region;
                est.type = cell_type(cell);
                est.window = cell_window(cell);
                est.design = kind;
                rows.push_back(est);
            }
        }
    }

    std::ostringstream out;
    csv::Writer writer(out);
    writer.row({"year", "city", "type", "window", "design", "n", "prev", "se", "ci_low", "ci_high"});
    for (const auto &r : rows) {
        writer.row({std::to_string(r.year), r.city, std::string(to_string(r.type)), std::string(to_string(r.window)),
                    std::string(estimate::to_string(r.design)), std::to_string(r.n), csv::format_exact(r.prev),
                    csv::format_exact(r.se), csv::format_exact(r.ci_low), csv::format_exact(r.ci_high)});
    }
    write_file(ctx.output("prevalence.csv"), out.str());

    // Human-readable layout: one block per cell, one line per city, n/Prev/CI per design.
    std::ostringstream table;
    for (std::size_t cell = 0; cell < kNumCells; ++cell) {
        table << sim::cell_name(cell) << '\n';
        table << "City";
        for (const auto &[kind, cities] : designs) {
            table << " & " << estimate::to_string(kind) << " n & Prev & CI";
        }
        table << '\n';
        std::vector<std::string> order;
        for (const auto &r : rows) {
            if (cell_index(r.type, r.window) == cell && std::find(order.begin(), order.end(), r.city) == order.end()) {
                order.push_back(r.city);
            }
        }
        for (const auto &city : order) {
            table << city;
            for (const auto &d : designs) {
                const auto it = std::find_if(rows.begin(), rows.end(), [&](const auto &r) {
                    return r.city == city && r.design == d.first && cell_index(r.type, r.window) == cell;
                });
                if (it == rows.end()) {
                    table << " & - & - & -";
                } else {
                    table << " & " << it->n << " & " << csv::format_2dp(it->prev) << " & "
                          << csv::format_2dp(it->ci_low) << "-" << csv::format_2dp(it->ci_high);
                }
            }
            table << '\n';
        }
        table << '\n';
    }
    write_file(ctx.output("prevalence_table.txt"), table.str());
    ctx.info("wrote " + std::to_string(rows.size()) + " prevalence rows");
    return 0;
}

} // namespace surveyforge::cli
