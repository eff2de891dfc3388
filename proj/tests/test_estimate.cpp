#include <doctest.h>

#include "surveyforge/error.hpp"
#include "surveyforge/estimate.hpp"
#include "surveyforge/frame.hpp"
#include "surveyforge/rng.hpp"
#include "surveyforge/sim.hpp"

#include <cmath>

using namespace surveyforge;
using namespace surveyforge::estimate;

namespace {

SurveyDesign flat(std::size_t n, const std::vector<double> &w = {}) {
    SurveyDesign d;
    for (std::size_t i = 0; i < n; ++i) {
        d.strata.push_back("s");
        d.psus.push_back("p" + std::to_string(i));
        d.weights.push_back(w.empty() ? 1.0 : w[i]);
    }
    return d;
}

double logit(double p) { return std::log(p / (1 - p)); }

} // namespace

TEST_CASE("victim indicator is an OR over the cell's items") {
    ItemAnswers none = ItemAnswers::complete({});
    const std::size_t physical = cell_index(ViolenceType::Physical, Window::Lifetime);
    CHECK(victim_indicator(none, ViolenceType::Physical, Window::Lifetime) == 0);
    for (int k = 0; k < 8; ++k) {
        ItemAnswers a = none;
        a.set_item(physical, k, 1);
        CHECK(victim_indicator(a, ViolenceType::Physical, Window::Lifetime) == 1);
        CHECK(victim_indicator(a, ViolenceType::Physical, Window::Last12Months) == 0);
    }
    CHECK_FALSE(victim_indicator(ItemAnswers::missing(), ViolenceType::Sexual, Window::Lifetime).has_value());
    ItemAnswers partial = ItemAnswers::missing();
    partial.set_item(physical, 2, 0);
    CHECK(victim_indicator(partial, ViolenceType::Physical, Window::Lifetime) == 0);
}

TEST_CASE("degenerate prevalence") {
    const auto est = prevalence(flat(5), std::vector<signed char>(5, 1));
    CHECK(est.prev == 100.0);
    CHECK(est.variance == 0.0);
    CHECK(est.ci_low == 100.0);
    CHECK(est.ci_high == 100.0);
    CHECK_THROWS_AS(prevalence(flat(3), std::vector<signed char>(3, -1)), PreconditionError);
}

TEST_CASE("linearization matches the delete-one jackknife") {
    const std::vector<signed char> y = {1, 0, 0, 1, 1, 0, 0, 0, 1, 0, 1, 0};
    const std::size_t n = y.size();
    const auto r = ratio_linearization(CodedDesign::from(flat(n)), y);
    std::vector<double> loo;
    double mean_loo = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            s += j == i ? 0.0 : y[j];
        }
        loo.push_back(s / (n - 1));
        mean_loo += loo.back() / n;
    }
    double jack = 0.0;
    for (double v : loo) {
        jack += (v - mean_loo) * (v - mean_loo);
    }
    jack *= static_cast<double>(n - 1) / n;
    CHECK(r.variance == doctest::Approx(jack).epsilon(1e-10));
    CHECK(r.estimate == doctest::Approx(5.0 / 12.0));
}

TEST_CASE("lonely PSU handling") {
    SUBCASE("three-stratum fixture") {
        SurveyDesign d;
        d.strata = {"h1", "h1", "h1", "h2", "h2", "h2", "h2", "h3", "h3"};
        d.psus = {"a", "a", "b", "c", "d", "d", "e", "f", "f"};
        d.weights = {1, 2, 1, 3, 1, 1, 2, 2, 1};
        const std::vector<signed char> y = {1, 0, 1, 0, 1, 0, 1, 1, 0};
        const auto r = ratio_linearization(CodedDesign::from(d), y);
        CHECK(r.variance == doctest::Approx(3.0 / 98.0).epsilon(1e-12));
        CHECK(r.n_psu == 6);
        CHECK(r.n_strata == 3);
    }
    SUBCASE("no singleton strata is the standard estimator") {
        const std::vector<std::vector<double>> t = {{1.0, 3.0}, {2.0, 2.0, 5.0}};
        // 2 * ((1-2)^2 + (3-2)^2) + 1.5 * (1 + 1 + 4)
        CHECK(stratified_cluster_variance(t) == doctest::Approx(4.0 + 9.0));
    }
    SUBCASE("all singleton strata center at the grand mean") {
        const std::vector<std::vector<double>> t = {{1.0}, {2.0}, {6.0}};
        CHECK(stratified_cluster_variance(t) == doctest::Approx(4.0 + 1.0 + 9.0));
        CHECK(lonely_psu_adjust(6.0, 3.0) == 9.0);
    }
}

TEST_CASE("unweighted prevalence is the sample mean") {
    rng::Stream s(2);
    SurveyDesign d;
    std::vector<signed char> y;
    double yes = 0;
    for (int i = 0; i < 200; ++i) {
        d.strata.push_back("s" + std::to_string(i % 4));
        d.psus.push_back("p" + std::to_string(i % 20));
        d.weights.push_back(0.5 + s.uniform());
        y.push_back(s.bernoulli(0.3) ? 1 : 0);
        yes += y.back();
    }
    const auto u = prevalence(d.unweighted(), y);
    CHECK(u.prev == doctest::Approx(100.0 * yes / 200.0).epsilon(1e-13));
    CHECK(u.n == 200);
    CHECK(u.df == 20 - 4);

    SurveyDesign scaled = d;
    for (auto &w : scaled.weights) {
        w *= 37.5;
    }
    const auto a = prevalence(d, y);
    const auto b = prevalence(scaled, y);
    CHECK(b.prev == doctest::Approx(a.prev).epsilon(1e-12));
    CHECK(b.se == doctest::Approx(a.se).epsilon(1e-12));
    CHECK(b.ci_low == doctest::Approx(a.ci_low).epsilon(1e-12));
    CHECK(b.ci_high == doctest::Approx(a.ci_high).epsilon(1e-12));
    CHECK(a.ci_low <= a.prev);
    CHECK(a.prev <= a.ci_high);
}

TEST_CASE("logit interval reproduces printed asymmetry") {
    const double p = 0.2780;
    const double lo = 0.2022;
    const double z = 1.959963984540054;
    const double se = (logit(p) - logit(lo)) / z * p * (1 - p);
    const auto [l, h] = confidence_interval(p, se, 0, CiMethod::Logit);
    CHECK(l == doctest::Approx(lo).epsilon(1e-10));
    CHECK(std::abs(100 * h - 36.91) < 0.005);

    const auto [wl, wh] = confidence_interval(p, se, 0, CiMethod::Wald);
    CHECK(wh - p == doctest::Approx(p - wl).epsilon(1e-12));
    // t quantiles widen the interval for small df.
    const auto [tl, th] = confidence_interval(p, se, 5, CiMethod::Logit);
    CHECK(tl < l);
    CHECK(th > h);
    const auto [zl, zh] = confidence_interval(0.0, 0.0, 10);
    CHECK(zl == 0.0);
    CHECK(zh == 0.0);
}

TEST_CASE("comparison metrics") {
    CHECK(*diff_metric(0.89, 1.84) == doctest::Approx(-51.63).epsilon(1e-4));
    CHECK(*diff_metric(27.16, 27.80) == doctest::Approx(-2.30).epsilon(1e-3));
    CHECK(*diff_metric(5.0, 5.0) == 0.0);
    CHECK_FALSE(diff_metric(1.0, 0.0).has_value());
    CHECK(*var_ratio(2.0, 2.0) == 1.0);
    CHECK(*var_ratio(0.0, 2.0) == 0.0);
    CHECK_FALSE(var_ratio(1.0, 0.0).has_value());
}

TEST_CASE("regional aggregation") {
    auto city = [&](const std::string &name) {
        CityDesign c;
        c.city = name;
        for (int i = 0; i < 120; ++i) {
            c.design.strata.push_back("s" + std::to_string(i % 3));
            c.design.psus.push_back("p" + std::to_string(i % 12));
            c.design.weights.push_back(1.0);
            c.y.push_back(i % 4 == 0 ? 1 : 0);
        }
        return c;
    };
    const auto a = city("A");
    const auto single = region_aggregate({a});
    const auto direct = prevalence(a.design, a.y);
    CHECK(single.prev == doctest::Approx(direct.prev).epsilon(1e-13));
    CHECK(single.se == doctest::Approx(direct.se).epsilon(1e-12));
    const auto both = region_aggregate({a, city("B")});
    CHECK(both.prev == doctest::Approx(direct.prev).epsilon(1e-13));
    CHECK(both.se < direct.se);
    CHECK(both.n == 240);
}

TEST_CASE("design names") {
    CHECK(to_string(DesignKind::Original) == "original");
    CHECK(parse_design_kind("weighted") == DesignKind::Weighted);
    CHECK_THROWS(parse_design_kind("other"));
}

TEST_CASE("linearization variance against the exact sampling variance") {
    // A single systematic micro-design has only a few possible samples per
    // stratum, so the comparison pools 40 frames with a 10% PSU fraction.
    double expected = 0.0;
    double exact = 0.0;
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        frame::FrameGenConfig fc;
        fc.seed = seed;
        fc.neighborhoods_per_city = 80;
        fc.tracts_min = 1;
        fc.tracts_max = 1;
        fc.households_min = 4;
        fc.households_max = 4;
        fc.eligible_women_probs = {0.0, 1.0};
        fc.prevalence[0] = 0.35;
        const auto fr = frame::generate_synthetic_frame(fc);
        sim::DesignConfig dc;
        dc.psus_per_stratum = 2;
        dc.tracts_per_psu = 1;
        dc.households_per_tract = 4;
        const auto e = sim::enumerate_exact(fr, dc, 0);
        CHECK(e.total_probability == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(e.ratio_mean == doctest::Approx(e.population_mean).epsilon(1e-12));
        expected += e.expected_linearization_variance;
        exact += e.ratio_variance;
    }
    CHECK(std::abs(expected / exact - 1.0) < 0.15);
}
