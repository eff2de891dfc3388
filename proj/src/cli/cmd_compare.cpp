#include "common.hpp"

#include "surveyforge/csv.hpp"
#include "surveyforge/estimate.hpp"
#include "surveyforge/sim.hpp"

#include <map>
#include <sstream>
#include <tuple>

namespace surveyforge::cli {

namespace {

struct Pair {
    std::optional<double> prev_w;
    std::optional<double> prev_u;
    std::optional<double> se_w;
    std::optional<double> se_u;
};

using Key = std::tuple<std::string, std::string, std::size_t>; // year, city, cell

std::string optional_cell(const std::optional<double> &v) { return v ? csv::format_exact(*v) : std::string(); }

} // namespace

int cmd_compare(const Context &ctx) {
    const auto table = csv::Table::read(ctx.input("prevalence", true).string());
    const auto c_year = table.require_column("year");
    const auto c_city = table.require_column("city");
    const auto c_type = table.require_column("type");
    const auto c_window = table.require_column("window");
    const auto c_design = table.require_column("design");
    const auto c_prev = table.require_column("prev");
    const auto c_se = table.require_column("se");

    std::vector<Key> order;
    std::map<Key, Pair> pairs;
    bool any_weighted = false;
    for (std::size_t r = 0; r < table.rows(); ++r) {
        std::size_t cell = 0;
        estimate::DesignKind kind{};
        try {
            cell = cell_index(parse_violence_type(table.at(r, c_type)), parse_window(table.at(r, c_window)));
            kind = estimate::parse_design_kind(table.at(r, c_design));
        } catch (const Error &e) {
            throw ParseError(table.source(), table.line(r), e.what());
        }
        if (kind == estimate::DesignKind::Original) {
            continue;
        }
        Key key{table.at(r, c_year), table.at(r, c_city), cell};
        auto [it, fresh] = pairs.try_emplace(key);
        if (fresh) {
            order.push_back(key);
        }
        const double prev = table.as_double(r, c_prev);
        const double se = table.as_double(r, c_se);
        if (kind == estimate::DesignKind::Weighted) {
            it->second.prev_w = prev;
            it->second.se_w = se;
            any_weighted = true;
        } else {
            it->second.prev_u = prev;
            it->second.se_u = se;
        }
    }
    if (!any_weighted) {
        throw MissingArtifactError("no weighted rows in " + table.source() +
                                   " (run `surveyforge prevalence` on weighted output first)");
    }

    std::ostringstream out;
    csv::Writer writer(out);
    writer.row({"year", "city", "type", "window", "diff_pct", "var_ratio"});
    std::array<std::ostringstream, kNumCells> panels;
    std::vector<csv::Writer> panel_writers;
    for (auto &p : panels) {
        panel_writers.emplace_back(p);
        panel_writers.back().row({"year", "city", "prev_unweighted", "prev_weighted", "diff_pct", "var_ratio"});
    }
    for (const auto &key : order) {
        const auto &[year, city, cell] = key;
        const auto &p = pairs.at(key);
        if (!p.prev_w || !p.prev_u) {
            ctx.warn(city + " " + sim::cell_name(cell) + ": missing " + (p.prev_w ? "unweighted" : "weighted") +
                     " estimate; comparison skipped");
            continue;
        }
        const auto diff = estimate::diff_metric(*p.prev_w, *p.prev_u);
        const auto ratio = estimate::var_ratio(*p.se_w * *p.se_w, *p.se_u * *p.se_u);
        if (!diff) {
            ctx.warn(city + " " + sim::cell_name(cell) + ": unweighted prevalence is 0, Diff undefined");
        }
        writer.row({year, city, std::string(to_string(cell_type(cell))), std::string(to_string(cell_window(cell))),
                    optional_cell(diff), optional_cell(ratio)});
        panel_writers[cell].row({year, city, csv::format_exact(*p.prev_u), csv::format_exact(*p.prev_w),
                                 optional_cell(diff), optional_cell(ratio)});
    }
    write_file(ctx.output("comparison.csv"), out.str());
    const std::string letters = "abcdef";
    for (std::size_t cell = 0; cell < kNumCells; ++cell) {
        write_file(ctx.output(std::string("panel_") + letters[cell] + "_" + sim::cell_name(cell) + ".csv"),
                   panels[cell].str());
    }
    return 0;
}

} // namespace surveyforge::cli
