#include <doctest.h>

#include "surveyforge/adjust.hpp"
#include "surveyforge/error.hpp"
#include "surveyforge/rng.hpp"

#include <numeric>

using namespace surveyforge;
using namespace surveyforge::adjust;

namespace {

double sum(const std::vector<double> &v) { return std::accumulate(v.begin(), v.end(), 0.0); }

RakingSpec two_by_two() {
    RakingSpec spec;
    spec.variables = {{"row", {{"r1", 60}, {"r2", 40}}}, {"col", {{"c1", 70}, {"c2", 30}}}};
    return spec;
}

std::vector<std::vector<std::string>> two_by_two_labels() {
    std::vector<std::vector<std::string>> labels(2);
    const int counts[2][2] = {{10, 20}, {30, 40}};
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
            for (int k = 0; k < counts[r][c]; ++k) {
                labels[0].push_back(r ? "r2" : "r1");
                labels[1].push_back(c ? "c2" : "c1");
            }
        }
    }
    return labels;
}

} // namespace

TEST_CASE("type-7 quantile") {
    CHECK(quantile_type7({1, 2, 3, 4, 5}, 0.5) == 3.0);
    CHECK(quantile_type7({1, 1, 1, 1, 96}, 0.8) == doctest::Approx(20.0));
    CHECK(quantile_type7({4, 1, 3, 2}, 0.0) == 1.0);
    CHECK(quantile_type7({4, 1, 3, 2}, 1.0) == 4.0);
    CHECK(quantile_type7({10, 20}, 0.25) == doctest::Approx(12.5));
}

TEST_CASE("weight vectors reject non-finite and vanishing values") {
    CHECK_THROWS_AS(WeightVector::make({1.0, 0.0}), NumericError);
    CHECK_THROWS_AS(WeightVector::make({1.0, std::nan("")}), NumericError);
    CHECK_NOTHROW(WeightVector::make({1.0, 2.0}));
}

TEST_CASE("trimming a single outlier") {
    const auto w = WeightVector::make({1, 1, 1, 1, 96});
    const auto t = trim_weights(w, {0.0, 0.8});
    // Cap at 20; the excess 76 goes to the other four in equal shares of 19.
    for (double v : t.values) {
        CHECK(v == doctest::Approx(20.0));
    }
    CHECK(sum(t.values) == doctest::Approx(100.0).epsilon(1e-14));
    CHECK(t.stage == Stage::Trimmed);
    REQUIRE(t.lineage.size() == 1);
    CHECK(t.lineage[0].name == "trim");
    CHECK(*t.lineage[0].param("upper") == doctest::Approx(20.0));
}

TEST_CASE("trimming equal weights is a no-op") {
    const auto w = WeightVector::make(std::vector<double>(10, 2.5));
    const auto t = trim_weights(w, {0.05, 0.95});
    CHECK(t.values == w.values);
}

TEST_CASE("trimming preserves totals and caps order statistics") {
    rng::Stream s(11);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(10 + s.below(100));
        for (auto &x : v) {
            x = std::exp(s.normal());
        }
        for (bool proportional : {false, true}) {
            TrimOptions opt{0.05, 0.95, proportional};
            const auto t = trim_weights(WeightVector::make(v), opt);
            CHECK(sum(t.values) == doctest::Approx(sum(v)).epsilon(1e-12));
            const double lo = *t.lineage.back().param("lower");
            const double hi = *t.lineage.back().param("upper");
            for (double x : t.values) {
                CHECK(x >= lo * (1 - 1e-12));
                CHECK(x <= hi * (1 + 1e-12));
            }
            const auto again = trim_to_bounds(t, lo, hi, proportional);
            for (std::size_t i = 0; i < v.size(); ++i) {
                CHECK(again.values[i] == doctest::Approx(t.values[i]).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("trimming needs three observations and ordered quantiles") {
    CHECK_THROWS(trim_weights(WeightVector::make({1, 2}), {0.05, 0.95}));
    CHECK_THROWS(trim_weights(WeightVector::make({1, 2, 3}), {0.9, 0.1}));
}

TEST_CASE("scale to mean one") {
    const auto s = scale_to_mean_one(WeightVector::make({2, 4, 6}));
    CHECK(s.values[0] == doctest::Approx(0.5));
    CHECK(s.values[1] == doctest::Approx(1.0));
    CHECK(s.values[2] == doctest::Approx(1.5));
    CHECK(s.mean() == doctest::Approx(1.0).epsilon(1e-12));
    const auto same = scale_to_mean_one(WeightVector::make({0.5, 1.5}));
    CHECK(same.values == std::vector<double>{0.5, 1.5});
}

TEST_CASE("raking at the fixed point leaves weights unchanged") {
    RakingSpec spec;
    spec.variables = {{"row", {{"r1", 30}, {"r2", 70}}}, {"col", {{"c1", 40}, {"c2", 60}}}};
    auto labels = two_by_two_labels();
    const auto w = WeightVector::make(std::vector<double>(100, 1.0));
    const auto out = rake(w, spec, code_categories(spec, labels));
    for (double v : out.values) {
        CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("raking with one margin is post-stratification") {
    RakingSpec spec;
    spec.variables = {{"row", {{"r1", 50}, {"r2", 50}}}};
    std::vector<std::vector<std::string>> labels = {two_by_two_labels()[0]};
    RakeReport report;
    const auto out =
        rake(WeightVector::make(std::vector<double>(100, 1.0)), spec, code_categories(spec, labels), &report);
    CHECK(report.iterations <= 2);
    CHECK(out.values.front() == doctest::Approx(50.0 / 30.0));
    CHECK(out.values.back() == doctest::Approx(50.0 / 70.0));
}

TEST_CASE("raking 2x2 reaches the margins and errors decrease") {
    const auto spec = two_by_two();
    RakeReport report;
    const auto out = rake(WeightVector::make(std::vector<double>(100, 1.0)), spec,
                          code_categories(spec, two_by_two_labels()), &report);
    CHECK(report.max_relative_error < 1e-8);
    CHECK(report.iterations <= 100);
    const auto &h = report.error_history;
    for (std::size_t i = 1; i < h.size(); ++i) {
        CHECK(h[i] <= h[i - 1]);
    }
    CHECK(out.lineage.back().name == "rake");
}

TEST_CASE("raking is invariant to the order of the margins") {
    rng::Stream s(21);
    const std::size_t n = 300;
    std::vector<std::vector<std::string>> labels(3);
    std::vector<double> base(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[0].push_back(s.bernoulli(0.4) ? "Young" : "Adult");
        labels[1].push_back(s.bernoulli(0.3) ? "White" : "NonWhite");
        const double u = s.uniform();
        labels[2].push_back(u < 0.5 ? "Elementary" : (u < 0.85 ? "HighSchool" : "Undergraduate"));
        base[i] = 0.5 + s.uniform();
    }
    RakingSpec spec;
    spec.variables = {{"age_group", {{"Young", 450}, {"Adult", 550}}},
                      {"race", {{"White", 300}, {"NonWhite", 700}}},
                      {"education", {{"Elementary", 400}, {"HighSchool", 450}, {"Undergraduate", 150}}}};
    RakingSpec reversed = spec;
    std::reverse(reversed.variables.begin(), reversed.variables.end());
    auto rlabels = labels;
    std::reverse(rlabels.begin(), rlabels.end());
    const auto a = rake(WeightVector::make(base), spec, code_categories(spec, labels));
    const auto b = rake(WeightVector::make(base), reversed, code_categories(reversed, rlabels));
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-6));
    }
}

TEST_CASE("raking structural and convergence errors") {
    auto spec = two_by_two();
    spec.variables[0].categories.push_back({"r3", 10});
    spec.variables[0].categories[0].control_total = 50;
    CHECK_THROWS_AS(rake(WeightVector::make(std::vector<double>(100, 1.0)), spec,
                         code_categories(spec, two_by_two_labels())),
                    StructuralError);

    auto tight = two_by_two();
    tight.max_iter = 1;
    try {
        rake(WeightVector::make(std::vector<double>(100, 1.0)), tight, code_categories(tight, two_by_two_labels()));
        FAIL("expected non-convergence");
    } catch (const RakeConvergenceError &e) {
        CHECK(e.last_margins().size() == 2);
    }

    auto labels = two_by_two_labels();
    labels[0][0] = "unknown";
    CHECK_THROWS_AS(code_categories(two_by_two(), labels), SchemaError);
}

TEST_CASE("raking specs validate and round-trip through JSON") {
    const auto spec = two_by_two();
    CHECK_NOTHROW(spec.validate());
    const auto back = RakingSpec::from_json(spec.to_json());
    REQUIRE(back.variables.size() == 2);
    CHECK(back.variables[1].categories[0].label == "c1");
    CHECK(back.variables[1].categories[0].control_total == 70);

    RakingSpec inconsistent = spec;
    inconsistent.variables[1].categories[0].control_total = 10;
    CHECK_THROWS_AS(inconsistent.validate(), ConfigError);
    RakingSpec empty;
    CHECK_THROWS_AS(empty.validate(), ConfigError);
}

TEST_CASE("proportional controls are rescaled to the weight total") {
    RakingSpec spec;
    spec.proportions = true;
    spec.variables = {{"row", {{"r1", 0.5}, {"r2", 0.5}}}};
    std::vector<std::vector<std::string>> labels = {two_by_two_labels()[0]};
    const auto out = rake(WeightVector::make(std::vector<double>(100, 2.0)), spec, code_categories(spec, labels));
    CHECK(sum(out.values) == doctest::Approx(200.0));
    CHECK(out.values.front() * 30 == doctest::Approx(100.0));
}

TEST_CASE("final design weights pipeline") {
    const auto spec = two_by_two();
    SUBCASE("uniform weights with matching controls stay at one") {
        RakingSpec matching;
        matching.variables = {{"row", {{"r1", 30}, {"r2", 70}}}, {"col", {{"c1", 40}, {"c2", 60}}}};
        const auto out = final_design_weights(WeightVector::make(std::vector<double>(100, 1.0)), matching,
                                              code_categories(matching, two_by_two_labels()));
        for (double v : out.values) {
            CHECK(v == doctest::Approx(1.0).epsilon(1e-10));
        }
    }
    SUBCASE("lineage and determinism") {
        rng::Stream s(4);
        std::vector<double> base(100);
        for (auto &b : base) {
            b = std::exp(s.normal());
        }
        const auto codes = code_categories(spec, two_by_two_labels());
        const auto a = final_design_weights(WeightVector::make(base), spec, codes);
        const auto b = final_design_weights(WeightVector::make(base), spec, codes);
        CHECK(a.values == b.values);
        std::vector<std::string> names;
        for (const auto &t : a.lineage) {
            names.push_back(t.name);
        }
        CHECK(names == std::vector<std::string>{"trim", "rake", "scale", "trim", "scale"});
        CHECK(a.mean() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(*a.lineage[3].param("lower") <= *std::min_element(a.values.begin(), a.values.end()) * (1 + 1e-12));
        CHECK(a.stage == Stage::Scaled);
    }
}

TEST_CASE("section nonresponse weights") {
    const std::size_t n = 400;
    rng::Stream s(8);
    Eigen::MatrixXd cov(n, 3);
    std::vector<double> dw(n);
    std::vector<bool> answered(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double children = s.bernoulli(0.5) ? 1.0 : 0.0;
        cov.row(static_cast<Eigen::Index>(i)) << (s.bernoulli(0.5) ? 1.0 : 0.0), (s.bernoulli(0.3) ? 1.0 : 0.0),
            children;
        dw[i] = 0.5 + s.uniform();
        answered[i] = s.bernoulli(children > 0 ? 0.9 : 0.5);
    }
    const auto design = WeightVector::make(dw);
    const auto r = section_nonresponse_weights(design, cov, answered);
    REQUIRE(r.fit);
    CHECK(r.fit->coefficients(3) > 0.0);
    CHECK(r.weights.size() == r.respondents.size());
    CHECK(r.weights.mean() == doctest::Approx(1.0).epsilon(1e-12));
    // Weight ratio to design weight is the inverse propensity, up to the common scale.
    const double k = r.weights.values[0] * r.propensity[r.respondents[0]] / dw[r.respondents[0]];
    for (std::size_t j = 0; j < r.respondents.size(); ++j) {
        const auto i = r.respondents[j];
        CHECK(r.weights.values[j] * r.propensity[i] / dw[i] == doctest::Approx(k).epsilon(1e-12));
    }

    SUBCASE("everyone responds") {
        const auto all = section_nonresponse_weights(design, cov, std::vector<bool>(n, true));
        CHECK_FALSE(all.fit);
        CHECK_FALSE(all.warnings.empty());
        const auto scaled = scale_to_mean_one(design);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(all.weights.values[i] == doctest::Approx(scaled.values[i]).epsilon(1e-12));
        }
    }
}
