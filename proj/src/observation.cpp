#include "surveyforge/observation.hpp"

#include "surveyforge/csv.hpp"
#include "surveyforge/error.hpp"

#include <fstream>
#include <ostream>

namespace surveyforge {

namespace {

frame::AgeGroup parse_age(const std::string &text, const csv::Table &t, std::size_t r) {
    if (text == "Young") {
        return frame::AgeGroup::Young;
    }
    if (text == "Adult") {
        return frame::AgeGroup::Adult;
    }
    throw ParseError(t.source(), t.line(r), "age_group must be Young or Adult, found '" + text + "'");
}

frame::Race parse_race(const std::string &text, const csv::Table &t, std::size_t r) {
    if (text == "White") {
        return frame::Race::White;
    }
    if (text == "NonWhite") {
        return frame::Race::NonWhite;
    }
    throw ParseError(t.source(), t.line(r), "race must be White or NonWhite, found '" + text + "'");
}

frame::Education parse_education(const std::string &text, const csv::Table &t, std::size_t r) {
    for (auto e : {frame::Education::Elementary, frame::Education::HighSchool, frame::Education::Undergraduate}) {
        if (text == frame::to_string(e)) {
            return e;
        }
    }
    throw ParseError(t.source(), t.line(r),
                     "education must be Elementary, HighSchool or Undergraduate, found '" + text + "'");
}

bool parse_flag(const csv::Table &t, std::size_t r, std::size_t c) {
    const long v = t.as_long(r, c);
    if (v != 0 && v != 1) {
        throw ParseError(t.source(), t.line(r), "column '" + t.header()[c] + "' must be 0 or 1");
    }
    return v == 1;
}

std::string flag(bool v) { return v ? "1" : "0"; }

} // namespace

std::string attribute_label(const Observation &obs, const std::string &name) {
    const auto &cov = obs.covariates;
    if (name == "age_group") {
        return std::string(frame::to_string(cov.age));
    }
    if (name == "race") {
        return std::string(frame::to_string(cov.race));
    }
    if (name == "education") {
        return std::string(frame::to_string(cov.education));
    }
    if (name == "cohab") {
        return flag(cov.cohab);
    }
    if (name == "know_victim") {
        return flag(cov.know_victim);
    }
    if (name == "children") {
        return flag(cov.children);
    }
    throw SchemaError("unknown categorical attribute '" + name + "'");
}

double covariate_value(const Observation &obs, const std::string &name) {
    if (name == "tract_households") {
        return static_cast<double>(obs.tract_households);
    }
    if (name == "household_size") {
        return obs.traits.size;
    }
    if (name == "head_age") {
        return obs.traits.head_age;
    }
    if (name == "head_education") {
        return obs.traits.head_education;
    }
    if (name == "head_female") {
        return obs.traits.head_female ? 1.0 : 0.0;
    }
    if (name == "cohab") {
        return obs.covariates.cohab ? 1.0 : 0.0;
    }
    if (name == "know_victim") {
        return obs.covariates.know_victim ? 1.0 : 0.0;
    }
    if (name == "children") {
        return obs.covariates.children ? 1.0 : 0.0;
    }
    throw SchemaError("unknown covariate '" + name + "'");
}

std::vector<Observation> read_observations(std::istream &in, const std::string &source_name) {
    const auto t = csv::Table::parse(in, source_name);
    const std::size_t c_city = t.require_column("city");
    const std::size_t c_stratum = t.require_column("stratum");
    const std::size_t c_nb = t.require_column("neighborhood");
    const std::size_t c_tract = t.require_column("tract");
    const std::size_t c_hh = t.require_column("household");
    const std::size_t c_id = t.require_column("woman_id");
    const std::size_t c_elig = t.require_column("n_eligible");
    const std::size_t c_ans = t.require_column("answered_violence");
    const std::size_t c_cohab = t.require_column("cohab");
    const std::size_t c_know = t.require_column("know_victim");
    const std::size_t c_children = t.require_column("children");
    const std::size_t c_age = t.require_column("age_group");
    const std::size_t c_race = t.require_column("race");
    const std::size_t c_edu = t.require_column("education");

    struct ItemCol {
        std::size_t cell;
        int index;
        std::size_t column;
    };
    std::vector<ItemCol> item_cols;
    for (std::size_t cell = 0; cell < kNumCells; ++cell) {
        for (int i = 0; i < items_in_cell(cell); ++i) {
            item_cols.push_back({cell, i, t.require_column(item_column_name(cell, i))});
        }
    }
    const auto c_tract_hh = t.column("tract_households");
    const auto c_size = t.column("household_size");
    const auto c_head_age = t.column("head_age");
    const auto c_head_edu = t.column("head_education");
    const auto c_head_female = t.column("head_female");

    std::vector<Observation> out;
    out.reserve(t.rows());
    for (std::size_t r = 0; r < t.rows(); ++r) {
        Observation o;
        o.city = t.at(r, c_city);
        o.stratum = t.at(r, c_stratum);
        o.neighborhood = t.at(r, c_nb);
        o.tract = t.at(r, c_tract);
        o.household = t.at(r, c_hh);
        o.woman_id = t.at(r, c_id);
        if (o.city.empty() || o.stratum.empty() || o.neighborhood.empty() || o.tract.empty() ||
            o.household.empty() || o.woman_id.empty()) {
            throw ParseError(source_name, t.line(r), "empty identifier");
        }
        o.n_eligible = static_cast<int>(t.as_long(r, c_elig));
        if (o.n_eligible < 1) {
            throw ParseError(source_name, t.line(r), "n_eligible must be at least 1 for an interviewed woman");
        }
        o.answered_violence = parse_flag(t, r, c_ans);
        o.covariates.cohab = parse_flag(t, r, c_cohab);
        o.covariates.know_victim = parse_flag(t, r, c_know);
        o.covariates.children = parse_flag(t, r, c_children);
        o.covariates.age = parse_age(t.at(r, c_age), t, r);
        o.covariates.race = parse_race(t.at(r, c_race), t, r);
        o.covariates.education = parse_education(t.at(r, c_edu), t, r);
        for (const auto &ic : item_cols) {
            if (t.at(r, ic.column).empty()) {
                continue;
            }
            o.items.set_item(ic.cell, ic.index, parse_flag(t, r, ic.column) ? 1 : 0);
        }
        if (c_tract_hh) {
            o.tract_households = t.as_long(r, *c_tract_hh);
        }
        if (c_size) {
            o.traits.size = static_cast<int>(t.as_long(r, *c_size));
        }
        if (c_head_age) {
            o.traits.head_age = static_cast<int>(t.as_long(r, *c_head_age));
        }
        if (c_head_edu) {
            o.traits.head_education = static_cast<int>(t.as_long(r, *c_head_edu));
        }
        if (c_head_female) {
            o.traits.head_female = parse_flag(t, r, *c_head_female);
        }
        out.push_back(std::move(o));
    }
    return out;
}

std::vector<Observation> load_observations(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path, 0, "cannot open observation file");
    }
    return read_observations(in, path);
}

void write_observations(std::ostream &out, const std::vector<Observation> &observations) {
    csv::Writer writer(out);
    std::vector<std::string> header = {"city",        "stratum",  "neighborhood", "tract",
                                       "household",   "woman_id", "n_eligible",   "answered_violence",
                                       "cohab",       "know_victim", "children",  "age_group",
                                       "race",        "education"};
    for (const auto &name : item_column_names()) {
        header.push_back(name);
    }
    for (const char *name : {"tract_households", "household_size", "head_age", "head_education", "head_female"}) {
        header.emplace_back(name);
    }
    writer.row(header);
    std::vector<std::string> fields;
    for (const auto &o : observations) {
        fields = {o.city,
                  o.stratum,
                  o.neighborhood,
                  o.tract,
                  o.household,
                  o.woman_id,
                  std::to_string(o.n_eligible),
                  flag(o.answered_violence),
                  flag(o.covariates.cohab),
                  flag(o.covariates.know_victim),
                  flag(o.covariates.children),
                  std::string(frame::to_string(o.covariates.age)),
                  std::string(frame::to_string(o.covariates.race)),
                  std::string(frame::to_string(o.covariates.education))};
        for (std::size_t cell = 0; cell < kNumCells; ++cell) {
            for (int i = 0; i < items_in_cell(cell); ++i) {
                const auto v = o.items.item(cell, i);
                fields.push_back(v ? std::to_string(*v) : std::string());
            }
        }
        fields.push_back(std::to_string(o.tract_households));
        fields.push_back(std::to_string(o.traits.size));
        fields.push_back(std::to_string(o.traits.head_age));
        fields.push_back(std::to_string(o.traits.head_education));
        fields.push_back(flag(o.traits.head_female));
        writer.row(fields);
    }
}

std::vector<TractVisit> read_visits(std::istream &in, const std::string &source_name) {
    const auto t = csv::Table::parse(in, source_name);
    const std::size_t c_city = t.require_column("city");
    const std::size_t c_stratum = t.require_column("stratum");
    const std::size_t c_nb = t.require_column("neighborhood");
    const std::size_t c_tract = t.require_column("tract");
    const std::size_t c_nv = t.require_column("n_visited_households");
    std::vector<TractVisit> out;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        TractVisit v{t.at(r, c_city), t.at(r, c_stratum), t.at(r, c_nb), t.at(r, c_tract), t.as_long(r, c_nv)};
        if (v.n_visited_households < 0) {
            throw ParseError(source_name, t.line(r), "n_visited_households must be nonnegative");
        }
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<TractVisit> load_visits(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path, 0, "cannot open visit log");
    }
    return read_visits(in, path);
}

void write_visits(std::ostream &out, const std::vector<TractVisit> &visits) {
    csv::Writer writer(out);
    writer.row({"city", "stratum", "neighborhood", "tract", "n_visited_households"});
    for (const auto &v : visits) {
        writer.row({v.city, v.stratum, v.neighborhood, v.tract, std::to_string(v.n_visited_households)});
    }
}

} // namespace surveyforge
