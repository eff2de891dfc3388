#include <doctest.h>

#include "oracles.hpp"

#include "surveyforge/error.hpp"
#include "surveyforge/glm.hpp"

#include <cmath>

using namespace surveyforge;
using namespace surveyforge::glm;

namespace {

struct Data {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Eigen::VectorXd w;
};

Data fixture(int n = 20) {
    Data d{Eigen::MatrixXd(n, 3), Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (int i = 0; i < n; ++i) {
        d.X.row(i) << 1.0, std::sin(0.9 * i), (i % 3) - 1.0 + 0.05 * i;
        d.y(i) = (i * 7 + 3) % 5 < 2 ? 1.0 : 0.0;
        d.w(i) = 1.0 + (i % 4) * 0.5;
    }
    return d;
}

std::vector<std::vector<double>> rows(const Eigen::MatrixXd &X) {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            out[static_cast<std::size_t>(i)].push_back(X(i, j));
        }
    }
    return out;
}

std::vector<double> vec(const Eigen::VectorXd &v) { return {v.data(), v.data() + v.size()}; }

} // namespace

TEST_CASE("intercept-only symmetric data") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(10, 1);
    Eigen::VectorXd y(10);
    y << 1, 0, 1, 0, 1, 0, 1, 0, 1, 0;
    const auto fit = fit_weighted_logit(X, y, Eigen::VectorXd::Ones(10), {"Constant"});
    CHECK(std::abs(fit.coefficients(0)) < 1e-12);
    CHECK(predict_prob(fit, X)(0) == doctest::Approx(0.5));
    CHECK(fit.converged);
}

TEST_CASE("weighted logit matches an independent optimizer") {
    const auto d = fixture();
    const auto fit = fit_weighted_logit(d.X, d.y, d.w, {"Constant", "a", "b"});
    const auto X = rows(d.X);
    const auto y = vec(d.y);
    const auto w = vec(d.w);
    const auto best =
        oracle::nelder_mead([&](const std::vector<double> &b) { return oracle::neg_loglik(X, y, w, b); }, {0, 0, 0});
    for (int j = 0; j < 3; ++j) {
        CHECK(fit.coefficients(j) == doctest::Approx(best[static_cast<std::size_t>(j)]).epsilon(1e-5));
    }
    CHECK(fit.log_likelihood == doctest::Approx(-oracle::neg_loglik(X, y, w, best)).epsilon(1e-10));
    CHECK(fit.aic() == doctest::Approx(2 * 3 - 2 * fit.log_likelihood));
    CHECK(fit.n_obs == 20);
}

TEST_CASE("score equations hold at the optimum") {
    const auto d = fixture(40);
    const auto fit = fit_weighted_logit(d.X, d.y, d.w);
    const Eigen::VectorXd p = predict_prob(fit, d.X);
    const Eigen::VectorXd score = d.X.transpose() * (d.w.array() * (d.y - p).array()).matrix();
    CHECK(score.cwiseAbs().maxCoeff() < 1e-8);
    // Weighted mean prediction equals the weighted response rate.
    CHECK(d.w.dot(p) / d.w.sum() == doctest::Approx(d.w.dot(d.y) / d.w.sum()).epsilon(1e-10));
}

TEST_CASE("rescaling the weights") {
    const auto d = fixture();
    const auto a = fit_weighted_logit(d.X, d.y, d.w);
    const auto b = fit_weighted_logit(d.X, d.y, 2.0 * d.w);
    const auto c = fit_weighted_logit(d.X, d.y, 0.37 * d.w);
    for (int j = 0; j < 3; ++j) {
        CHECK(b.coefficients(j) == doctest::Approx(a.coefficients(j)).epsilon(1e-10));
        CHECK(c.coefficients(j) == doctest::Approx(a.coefficients(j)).epsilon(1e-10));
    }
    CHECK(b.log_likelihood == doctest::Approx(2.0 * a.log_likelihood).epsilon(1e-12));
}

TEST_CASE("prediction clipping") {
    LogitFit fit;
    fit.coefficients = Eigen::VectorXd::Zero(2);
    Eigen::MatrixXd X(2, 2);
    X << 1, 0, 1, 5;
    CHECK(predict_prob(fit, X)(1) == 0.5);
    fit.coefficients << 0, 1000;
    CHECK(predict_prob(fit, X)(1) == 1.0 - 1e-6);
    fit.coefficients << 0, -1000;
    CHECK(predict_prob(fit, X)(1) == 1e-6);
}

TEST_CASE("rank deficiency and separation") {
    auto d = fixture();
    Eigen::MatrixXd X(20, 4);
    X << d.X, 2.0 * d.X.col(1);
    try {
        fit_weighted_logit(X, d.y, d.w, {"Constant", "a", "b", "a2"});
        FAIL("expected a rank error");
    } catch (const RankError &e) {
        CHECK_FALSE(e.columns().empty());
    }

    Eigen::MatrixXd Xs(8, 2);
    Eigen::VectorXd ys(8);
    for (int i = 0; i < 8; ++i) {
        Xs.row(i) << 1.0, i - 3.5;
        ys(i) = i >= 4 ? 1.0 : 0.0;
    }
    try {
        fit_weighted_logit(Xs, ys, Eigen::VectorXd::Ones(8), {"Constant", "x"});
        FAIL("expected separation");
    } catch (const ConvergenceError &e) {
        CHECK(std::string(e.what()).find("'x'") != std::string::npos);
    }
    CHECK_THROWS_AS(fit_weighted_logit(d.X, Eigen::VectorXd::Ones(20), d.w), PreconditionError);
}

TEST_CASE("weighted least squares") {
    // y = 1 + 2x with weights, n = 5: normal equations solved by hand.
    Eigen::MatrixXd X(5, 2);
    Eigen::VectorXd y(5), w(5);
    X << 1, 0, 1, 1, 1, 2, 1, 3, 1, 4;
    y << 1.2, 2.7, 5.1, 7.4, 8.6;
    w << 1, 2, 1, 3, 1;
    double sw = 0, swx = 0, swxx = 0, swy = 0, swxy = 0;
    for (int i = 0; i < 5; ++i) {
        sw += w(i);
        swx += w(i) * X(i, 1);
        swxx += w(i) * X(i, 1) * X(i, 1);
        swy += w(i) * y(i);
        swxy += w(i) * X(i, 1) * y(i);
    }
    const double det = sw * swxx - swx * swx;
    const double b0 = (swxx * swy - swx * swxy) / det;
    const double b1 = (sw * swxy - swx * swy) / det;
    const auto fit = fit_weighted_linear(X, y, w, {"Constant", "x"});
    CHECK(fit.coefficients(0) == doctest::Approx(b0).epsilon(1e-10));
    CHECK(fit.coefficients(1) == doctest::Approx(b1).epsilon(1e-10));
    const Eigen::VectorXd r = y - predict_linear(fit, X);
    CHECK(std::abs((X.transpose() * (w.array() * r.array()).matrix()).maxCoeff()) < 1e-10);
    CHECK(fit.residual_variance >= 0.0);

    const Eigen::VectorXd exact = X * Eigen::Vector2d(3.0, -0.5);
    CHECK(fit_weighted_linear(X, exact, w).residual_variance < 1e-20);

    const auto flat = fit_weighted_linear(X, Eigen::VectorXd::Constant(5, 4.2), w);
    CHECK(flat.coefficients(0) == doctest::Approx(4.2).epsilon(1e-12));
    CHECK(std::abs(flat.coefficients(1)) < 1e-12);

    Eigen::MatrixXd Xd(5, 3);
    Xd << X, X.col(1) * 3.0;
    CHECK_THROWS_AS(fit_weighted_linear(Xd, y, w, {"Constant", "x", "x3"}), RankError);
}

TEST_CASE("logit report table layout") {
    const auto d = fixture();
    const auto fit = fit_weighted_logit(d.X, d.y, d.w, {"Constant", "cohab", "children"});
    const auto text = format_logit_table("Section response", {{"CityA", fit}, {"CityB", fit}});
    for (const char *needle : {"Section response", "CityA", "CityB", "Constant", "cohab", "Observations",
                               "Log Likelihood", "Akaike Inf. Crit."}) {
        CHECK(text.find(needle) != std::string::npos);
    }
}
