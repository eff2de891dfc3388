#include <doctest.h>

#include "surveyforge/error.hpp"
#include "surveyforge/pool.hpp"
#include "surveyforge/rng.hpp"

#include <cmath>

using namespace surveyforge;
using namespace surveyforge::pool;

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

CovariateTable table(const std::vector<std::string> &names, const std::vector<std::vector<double>> &rows) {
    CovariateTable t;
    t.names = names;
    t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < names.size(); ++j) {
            t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return t;
}

} // namespace

TEST_CASE("pooled weight arithmetic") {
    std::vector<PooledSampleMember> m = {{"a", "h1", Source::RE, 0.5, 0.25}};
    const auto w = pooled_weights(m, 0.0);
    CHECK(w.values[0] == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
    CHECK(m[0].pooled_weight == w.values[0]);

    std::vector<PooledSampleMember> single = {{"b", "h2", Source::NAT, 0.2, 0.0}};
    CHECK(pooled_weights(single, 0.0).values[0] == doctest::Approx(5.0));

    std::vector<PooledSampleMember> rel = {{"c", "h3", Source::NAT, 0.3, 0.1}};
    pooled_weights(rel, 0.25, OverlapScale::Relative);
    CHECK(rel[0].p_overlap == doctest::Approx(0.25 * 0.4 / 1.25));
    CHECK(rel[0].pooled_weight == doctest::Approx(1.0 / (0.4 - 0.08)));
}

TEST_CASE("pooled weights are symmetric in the frame labels") {
    rng::Stream s(6);
    for (int i = 0; i < 100; ++i) {
        const double a = 0.05 + 0.9 * s.uniform();
        const double b = 0.01 + 0.9 * s.uniform() * (1 - a);
        const double c = 0.5 * std::min(a, b) * s.uniform();
        std::vector<PooledSampleMember> x = {{"x", "h", Source::RE, a, b}};
        std::vector<PooledSampleMember> y = {{"x", "h", Source::NAT, b, a}};
        for (auto scale : {OverlapScale::Absolute, OverlapScale::Relative}) {
            CHECK(pooled_weights(x, c, scale).values[0] == pooled_weights(y, c, scale).values[0]);
        }
    }
}

TEST_CASE("invalid members are named") {
    std::vector<PooledSampleMember> m = {{"ok", "h1", Source::RE, 0.5, 0.2}, {"bad", "h2", Source::NAT, 0.1, 0.1}};
    try {
        pooled_weights(m, 0.3);
        FAIL("expected an integrity error");
    } catch (const IntegrityError &e) {
        CHECK(std::string(e.what()).find("bad") != std::string::npos);
    }
    std::vector<PooledSampleMember> zero = {{"z", "h", Source::RE, 0.0, 0.2}};
    CHECK_THROWS_AS(pooled_weights(zero, 0.0), IntegrityError);
}

TEST_CASE("two-frame enumeration: pooled HT total is unbiased") {
    // Independent frames: unit i is in A with prob a_i and in B with prob b_i,
    // so the joint probability is a_i b_i; with a constant product the overlap
    // is known exactly.
    const std::vector<double> a = {0.2, 0.4, 0.5, 0.25, 0.8};
    std::vector<double> b;
    const double c = 0.1;
    for (double x : a) {
        b.push_back(c / x);
    }
    const std::vector<double> y = {3, 1, 4, 1, 5};
    double expected = 0.0;
    for (int code = 0; code < 1 << 10; ++code) {
        double prob = 1.0;
        std::vector<PooledSampleMember> members;
        std::vector<double> ym;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const bool in_a = code >> (2 * i) & 1;
            const bool in_b = code >> (2 * i + 1) & 1;
            prob *= (in_a ? a[i] : 1 - a[i]) * (in_b ? b[i] : 1 - b[i]);
            if (in_a) {
                members.push_back({std::to_string(i), std::to_string(i), Source::NAT, a[i], b[i]});
                ym.push_back(y[i]);
            } else if (in_b) {
                members.push_back({std::to_string(i), std::to_string(i), Source::RE, b[i], a[i]});
                ym.push_back(y[i]);
            }
        }
        if (members.empty()) {
            continue;
        }
        const auto w = pooled_weights(members, c);
        for (std::size_t k = 0; k < members.size(); ++k) {
            expected += prob * w.values[k] * ym[k];
        }
    }
    CHECK(expected == doctest::Approx(14.0).epsilon(1e-12));
}

TEST_CASE("counterfactual probabilities") {
    SUBCASE("constant source probabilities") {
        const auto src = table({"x"}, {{1}, {2}, {3}, {4}});
        const auto tgt = table({"x"}, {{0}, {10}});
        const auto p = fit_counterfactual({0.3, 0.3, 0.3, 0.3}, src, tgt);
        CHECK(p[0] == doctest::Approx(0.3).epsilon(1e-12));
        CHECK(p[1] == doctest::Approx(0.3).epsilon(1e-12));
    }
    SUBCASE("logit-linear selection is recovered") {
        std::vector<std::vector<double>> src_rows, tgt_rows;
        std::vector<double> probs;
        rng::Stream s(12);
        for (int i = 0; i < 50; ++i) {
            const double u = s.uniform();
            const double v = s.normal();
            src_rows.push_back({u, v});
            probs.push_back(logistic(-2.0 + 1.5 * u - 0.4 * v));
        }
        std::vector<double> truth;
        for (int i = 0; i < 20; ++i) {
            const double u = s.uniform();
            const double v = s.normal();
            tgt_rows.push_back({v, u});
            truth.push_back(logistic(-2.0 + 1.5 * u - 0.4 * v));
        }
        // Target columns in a different order are matched by name.
        const auto p = fit_counterfactual(probs, table({"u", "v"}, src_rows), table({"v", "u"}, tgt_rows));
        for (std::size_t i = 0; i < truth.size(); ++i) {
            CHECK(std::abs(p[i] - truth[i]) < 1e-6);
        }
    }
    SUBCASE("in-sample predictions") {
        const auto src = table({"x"}, {{1}, {2}, {3}, {5}});
        const std::vector<double> probs = {0.1, 0.3, 0.2, 0.6};
        const auto model = fit_counterfactual_model(probs, src);
        const auto p = predict_counterfactual(model, src);
        double r = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            r += (p[i] - 0.3) * (probs[i] - 0.3);
            CHECK(p[i] > 0.0);
            CHECK(p[i] < 1.0);
        }
        CHECK(r > 0.0);
        CHECK(model.fit.r_squared > 0.0);
        CHECK(model.fit.r_squared <= 1.0);
    }
    SUBCASE("schema mismatch") {
        const auto model = fit_counterfactual_model({0.1, 0.2, 0.3}, table({"x"}, {{1}, {2}, {3}}));
        CHECK_THROWS_AS(predict_counterfactual(model, table({"z"}, {{1}})), SchemaError);
        CHECK_THROWS_AS(predict_counterfactual(model, table({"x", "z"}, {{1, 2}})), SchemaError);
    }
}

TEST_CASE("overlap estimation") {
    std::vector<OverlapRecord> none = {{"h1", Source::NAT, false}, {"h2", Source::RE, false}};
    CHECK(estimate_overlap(none) == 0.0);

    std::vector<OverlapRecord> some = {{"h1", Source::NAT, false},
                                       {"h1", Source::RE, true},
                                       {"h2", Source::NAT, false},
                                       {"h3", Source::RE, false},
                                       {"h4", Source::NAT, false}};
    CHECK(estimate_overlap(some) == doctest::Approx(0.25));

    std::vector<OverlapRecord> all = {{"h1", Source::NAT, false}, {"h1", Source::RE, true}};
    CHECK_THROWS_AS(estimate_overlap(all), IntegrityError);
}

TEST_CASE("source and scale names") {
    CHECK(to_string(Source::RE) == "RE");
    CHECK(parse_source("NAT") == Source::NAT);
    CHECK_THROWS(parse_source("XX"));
    CHECK(parse_overlap_scale(to_string(OverlapScale::Relative)) == OverlapScale::Relative);
}
