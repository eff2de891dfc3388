#include <doctest.h>

#include "surveyforge/cli.hpp"
#include "surveyforge/csv.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace surveyforge;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
    const auto dir = fs::temp_directory_path() / ("surveyforge_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write(const fs::path &p, const std::string &text) {
    std::ofstream(p, std::ios::binary) << text;
}

nlohmann::json mini_scenario() {
    return {{"name", "mini"},
            {"seed", 5},
            {"replicates", 4},
            {"frame",
             {{"seed", 8},
              {"n_cities", 2},
              {"neighborhoods_per_city", 12},
              {"tracts_min", 2},
              {"tracts_max", 3},
              {"households_min", 30},
              {"households_max", 60}}},
            {"design", {{"psus_per_stratum", 2}, {"tracts_per_psu", 2}, {"households_per_tract", 8}}},
            {"section_response", {{"intercept", 0.8}, {"know_victim", 1.0}}},
            {"weighting", "section"},
            {"attrition",
             {{"model", "MCAR"}, {"rate", 0.4}, {"covariates", {"household_size", "head_age", "tract_households"}}}},
            {"emit_sample", true},
            {"assertions", {{{"metric", "var_ratio_median"}, {"min", 0.0}, {"max", 100.0}}}}};
}

int run(std::vector<std::string> args) { return cli::run(args); }

/// Runs simulate with an emitted sample, then weight and prevalence on it.
fs::path full_chain(const std::string &name) {
    const auto dir = scratch(name);
    write(dir / "sim.json", mini_scenario().dump());
    REQUIRE(run({"simulate", "--config", (dir / "sim.json").string(), "--out", dir.string()}) == 0);
    const auto sample = dir / "mini_sample";
    REQUIRE(run({"weight", "--config", (sample / "weight_config.json").string(), "--out", sample.string()}) == 0);
    REQUIRE(run({"prevalence", "--config", (sample / "prevalence_config.json").string(), "--out", sample.string()}) ==
            0);
    REQUIRE(run({"compare", "--config", (sample / "compare_config.json").string(), "--out", sample.string()}) == 0);
    return dir;
}

} // namespace

TEST_CASE("usage errors") {
    CHECK(run({}) == cli::kConfigError);
    CHECK(run({"bogus"}) == cli::kConfigError);
    CHECK(run({"weight"}) == cli::kConfigError);
    CHECK(run({"--help"}) == cli::kOk);
    CHECK(run({"weight", "--config", "/nonexistent/config.json"}) == cli::kConfigError);
}

TEST_CASE("simulate rejects zero replicates") {
    const auto dir = scratch("r0");
    auto j = mini_scenario();
    j["replicates"] = 0;
    write(dir / "sim.json", j.dump());
    CHECK(run({"simulate", "--config", (dir / "sim.json").string(), "--out", dir.string()}) == cli::kConfigError);
}

TEST_CASE("simulate exit status follows the assertions") {
    const auto dir = scratch("assert");
    auto j = mini_scenario();
    j["emit_sample"] = false;
    j["assertions"] = {{{"metric", "var_ratio_median"}, {"max", -1.0}}};
    write(dir / "sim.json", j.dump());
    CHECK(run({"simulate", "--config", (dir / "sim.json").string(), "--out", dir.string()}) == cli::kRuntimeFailure);
    const auto table = csv::Table::read((dir / "assertions.csv").string());
    REQUIRE(table.rows() == 1);
    CHECK(table.at(0, table.require_column("passed")) == "0");

    auto dup = nlohmann::json{{"scenarios", {j, j}}};
    write(dir / "dup.json", dup.dump());
    CHECK(run({"simulate", "--config", (dir / "dup.json").string(), "--out", dir.string()}) == cli::kConfigError);
}

TEST_CASE("full pipeline on an emitted sample") {
    const auto dir = full_chain("chain");
    const auto sample = dir / "mini_sample";
    for (const char *f : {"weights_base.csv", "weights_final.csv", "weights_section.csv", "weights_pooled.csv",
                          "diagnostics_design.csv", "diagnostics_section.csv", "diagnostics_pooled.csv",
                          "logit_report.txt", "prevalence.csv", "prevalence_table.txt", "comparison.csv",
                          "panel_a_emotional_lifetime.csv", "panel_f_sexual_12months.csv"}) {
        CHECK_MESSAGE(fs::exists(sample / f), f);
    }
    for (const char *f : {"diagnostics_design.csv", "diagnostics_section.csv", "diagnostics_pooled.csv"}) {
        const auto diag = csv::Table::read((sample / f).string());
        CHECK(diag.header() == std::vector<std::string>{"City", "N", "Mean", "Sd", "Min", "Max", "IQR", "CV"});
        for (std::size_t r = 0; r < diag.rows(); ++r) {
            CHECK(diag.at(r, diag.require_column("Mean")) == "1.00");
        }
    }
    const auto final_w = csv::Table::read((sample / "weights_final.csv").string());
    double sum = 0.0;
    for (std::size_t r = 0; r < final_w.rows(); ++r) {
        sum += final_w.as_double(r, final_w.require_column("weight"));
    }
    REQUIRE(final_w.rows() > 0);
    CHECK(sum / static_cast<double>(final_w.rows()) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("reruns are byte identical") {
    const auto a = full_chain("rerun_a");
    const auto b = full_chain("rerun_b");
    for (const char *f : {"mini_replicates.csv", "mini_summary.csv", "assertions.csv"}) {
        CHECK(slurp(a / f) == slurp(b / f));
    }
    for (const char *f : {"weights_section.csv", "weights_pooled.csv", "prevalence.csv", "comparison.csv",
                          "logit_report.txt", "observations.csv"}) {
        CHECK(slurp(a / "mini_sample" / f) == slurp(b / "mini_sample" / f));
    }
    // A different seed changes the replicates.
    const auto c = scratch("rerun_c");
    write(c / "sim.json", mini_scenario().dump());
    REQUIRE(run({"simulate", "--config", (c / "sim.json").string(), "--out", c.string(), "--seed", "6"}) == 0);
    CHECK(slurp(c / "mini_replicates.csv") != slurp(a / "mini_replicates.csv"));
}

TEST_CASE("weight without raking controls is a config error") {
    const auto dir = full_chain("noraking");
    const auto sample = dir / "mini_sample";
    auto j = nlohmann::json::parse(slurp(sample / "weight_config.json"));
    j.erase("raking");
    write(sample / "broken.json", j.dump());
    CHECK(run({"weight", "--config", (sample / "broken.json").string(), "--out", (dir / "x").string()}) ==
          cli::kConfigError);
    j = nlohmann::json::parse(slurp(sample / "weight_config.json"));
    j["raking"] = "missing.json";
    write(sample / "broken2.json", j.dump());
    CHECK(run({"weight", "--config", (sample / "broken2.json").string(), "--out", (dir / "y").string()}) ==
          cli::kConfigError);
}

TEST_CASE("missing upstream artifacts exit with 3") {
    const auto dir = full_chain("missing");
    const auto sample = dir / "mini_sample";
    const auto empty = dir / "empty";
    fs::create_directories(empty);
    CHECK(run({"prevalence", "--config", (sample / "prevalence_config.json").string(), "--out", empty.string()}) ==
          cli::kMissingArtifact);
    write(empty / "absent.json", nlohmann::json{{"prevalence", "absent.csv"}}.dump());
    CHECK(run({"compare", "--config", (empty / "absent.json").string(), "--out", empty.string()}) ==
          cli::kMissingArtifact);

    // A prevalence file without weighted rows means the weighted run is missing.
    const auto table = csv::Table::read((sample / "prevalence.csv").string());
    std::ostringstream text;
    csv::Writer w(text);
    w.row(table.header());
    const auto c_design = table.require_column("design");
    for (std::size_t r = 0; r < table.rows(); ++r) {
        if (table.at(r, c_design) != "weighted") {
            w.row(table.row(r));
        }
    }
    write(empty / "prev.csv", text.str());
    write(empty / "cmp.json", nlohmann::json{{"prevalence", "prev.csv"}}.dump());
    CHECK(run({"compare", "--config", (empty / "cmp.json").string(), "--out", empty.string()}) ==
          cli::kMissingArtifact);
}

TEST_CASE("unit weights make weighted and unweighted columns identical") {
    const auto dir = full_chain("unit");
    const auto sample = dir / "mini_sample";
    const auto section = csv::Table::read((sample / "weights_section.csv").string());
    std::ostringstream text;
    csv::Writer w(text);
    w.row({"woman_id", "stage", "weight"});
    for (std::size_t r = 0; r < section.rows(); ++r) {
        w.row({section.at(r, section.require_column("woman_id")), "unit", "1"});
    }
    write(sample / "unit.csv", text.str());
    write(sample / "unit_prev.json", nlohmann::json{{"year", 2016},
                                                   {"observations", "observations.csv"},
                                                   {"weights", {{"original", "weights_base.csv"}, {"weighted", "unit.csv"}}},
                                                   {"out", "unit_out"}}
                                         .dump());
    REQUIRE(run({"prevalence", "--config", (sample / "unit_prev.json").string()}) == 0);
    const auto prev = csv::Table::read((sample / "unit_out" / "prevalence.csv").string());
    std::map<std::string, std::string> unweighted, weighted;
    const auto key = [&](std::size_t r) {
        return prev.at(r, prev.require_column("city")) + "|" + prev.at(r, prev.require_column("type")) + "|" +
               prev.at(r, prev.require_column("window"));
    };
    for (std::size_t r = 0; r < prev.rows(); ++r) {
        const auto d = prev.at(r, prev.require_column("design"));
        const auto v = prev.at(r, prev.require_column("prev")) + "/" + prev.at(r, prev.require_column("se")) + "/" +
                       prev.at(r, prev.require_column("ci_low"));
        (d == "weighted" ? weighted : unweighted)[key(r)] = v;
        if (d == "original") {
            unweighted.erase(key(r));
        }
    }
    CHECK_FALSE(weighted.empty());
    CHECK(weighted == unweighted);

    write(sample / "unit_cmp.json", nlohmann::json{{"prevalence", "unit_out/prevalence.csv"}, {"out", "unit_out"}}.dump());
    REQUIRE(run({"compare", "--config", (sample / "unit_cmp.json").string()}) == 0);
    const auto cmp = csv::Table::read((sample / "unit_out" / "comparison.csv").string());
    for (std::size_t r = 0; r < cmp.rows(); ++r) {
        CHECK(cmp.as_double(r, cmp.require_column("diff_pct")) == 0.0);
        CHECK(cmp.as_double(r, cmp.require_column("var_ratio")) == 1.0);
    }
}

TEST_CASE("compare reproduces a printed difference") {
    const auto dir = scratch("recife");
    write(dir / "prevalence.csv", "year,city,type,window,design,n,prev,se,ci_low,ci_high\n"
                                  "2016,Recife,sexual,12months,unweighted,1000,1.84,0.5,1,3\n"
                                  "2016,Recife,sexual,12months,weighted,900,0.89,0.4,0.4,1.8\n");
    write(dir / "cmp.json", nlohmann::json{{"prevalence", "prevalence.csv"}}.dump());
    REQUIRE(run({"compare", "--config", (dir / "cmp.json").string(), "--out", dir.string()}) == 0);
    const auto cmp = csv::Table::read((dir / "comparison.csv").string());
    REQUIRE(cmp.rows() == 1);
    CHECK(cmp.as_double(0, cmp.require_column("diff_pct")) == doctest::Approx(-51.63).epsilon(1e-4));
    CHECK(cmp.as_double(0, cmp.require_column("var_ratio")) == doctest::Approx(0.64));
    const auto panel = csv::Table::read((dir / "panel_f_sexual_12months.csv").string());
    CHECK(panel.rows() == 1);
}
