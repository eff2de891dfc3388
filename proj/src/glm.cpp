#include "surveyforge/glm.hpp"

#include "surveyforge/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace surveyforge::glm {

namespace {

void check_inputs(const Eigen::MatrixXd &X, const Eigen::VectorXd &y, const Eigen::VectorXd &w, const char *what) {
    if (X.rows() != y.size() || X.rows() != w.size()) {
        throw PreconditionError(std::string(what) + ": X, y and w must have the same number of rows");
    }
    if (X.cols() == 0 || X.rows() <= X.cols()) {
        throw PreconditionError(std::string(what) + ": need more observations than columns");
    }
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (!(w[i] > 0.0) || !std::isfinite(w[i])) {
            throw PreconditionError(std::string(what) + ": weights must be positive and finite");
        }
    }
}

std::vector<std::string> default_names(std::vector<std::string> names, Eigen::Index p) {
    if (names.empty()) {
        for (Eigen::Index j = 0; j < p; ++j) {
            names.push_back("x" + std::to_string(j));
        }
    }
    if (static_cast<Eigen::Index>(names.size()) != p) {
        throw PreconditionError("column names do not match the number of columns");
    }
    return names;
}

/// Column-pivoted QR rank check; throws RankError listing dependent columns.
void check_rank(const Eigen::MatrixXd &A, const std::vector<std::string> &names) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    const Eigen::Index rank = qr.rank();
    if (rank == A.cols()) {
        return;
    }
    std::vector<std::string> dependent;
    const auto &perm = qr.colsPermutation().indices();
    for (Eigen::Index k = rank; k < A.cols(); ++k) {
        dependent.push_back(names[static_cast<std::size_t>(perm[k])]);
    }
    std::sort(dependent.begin(), dependent.end());
    std::string list;
    for (const auto &d : dependent) {
        list += (list.empty() ? "" : ", ") + d;
    }
    throw RankError("design matrix is rank deficient; collinear columns: " + list, dependent);
}

double log_sigmoid(double x) noexcept { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

double sigmoid(double x) noexcept {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace

double LogitFit::aic() const noexcept { return 2.0 * static_cast<double>(coefficients.size()) - 2.0 * log_likelihood; }

double logit_log_likelihood(const Eigen::MatrixXd &X, const Eigen::VectorXd &y, const Eigen::VectorXd &w,
                            const Eigen::VectorXd &beta) {
    const Eigen::VectorXd eta = X * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        ll += w[i] * (y[i] * log_sigmoid(eta[i]) + (1.0 - y[i]) * log_sigmoid(-eta[i]));
    }
    return ll;
}

LogitFit fit_weighted_logit(const Eigen::MatrixXd &X, const Eigen::VectorXd &y, const Eigen::VectorXd &w,
                            std::vector<std::string> names, const LogitOptions &options) {
    check_inputs(X, y, w, "fit_weighted_logit");
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    names = default_names(std::move(names), p);
    bool any0 = false;
    bool any1 = false;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (y[i] != 0.0 && y[i] != 1.0) {
            throw PreconditionError("fit_weighted_logit: responses must be 0 or 1");
        }
        (y[i] == 1.0 ? any1 : any0) = true;
    }
    if (!any0 || !any1) {
        throw PreconditionError("fit_weighted_logit: response is constant");
    }
    check_rank(w.cwiseSqrt().asDiagonal() * X, names);

    const double tol = options.tolerance * std::max(1.0, w.mean());
    const double ridge = options.ridge;
    auto objective = [&](const Eigen::VectorXd &beta) {
        return logit_log_likelihood(X, y, w, beta) - 0.5 * ridge * beta.squaredNorm();
    };

    LogitFit fit;
    fit.names = names;
    fit.n_obs = static_cast<long>(n);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    double obj = objective(beta);
    Eigen::VectorXd prob(n);
    Eigen::VectorXd score(p);

    auto compute_score = [&](const Eigen::VectorXd &b) {
        const Eigen::VectorXd eta = X * b;
        for (Eigen::Index i = 0; i < n; ++i) {
            prob[i] = sigmoid(eta[i]);
        }
        score = X.transpose() * (w.array() * (y - prob).array()).matrix() - ridge * b;
    };

    int iter = 0;
    compute_score(beta);
    while (score.cwiseAbs().maxCoeff() >= tol && iter < options.max_iter) {
        ++iter;
        const Eigen::VectorXd v = (w.array() * prob.array() * (1.0 - prob.array())).matrix();
        Eigen::MatrixXd info = X.transpose() * v.asDiagonal() * X;
        info.diagonal().array() += ridge;
        const Eigen::VectorXd step = info.ldlt().solve(score);

        double t = 1.0;
        Eigen::VectorXd candidate = beta + step;
        double cand_obj = objective(candidate);
        int halvings = 0;
        while (!(cand_obj >= obj - 1e-12 * (1.0 + std::abs(obj))) && halvings < 40) {
            t *= 0.5;
            candidate = beta + t * step;
            cand_obj = objective(candidate);
            ++halvings;
        }
        if (halvings == 40) {
            break; // no ascent direction left at machine precision
        }
        Eigen::Index culprit = 0;
        const double largest = candidate.cwiseAbs().maxCoeff(&culprit);
        if (largest > options.separation_bound && cand_obj > obj + 1e-10 * (1.0 + std::abs(obj))) {
            throw ConvergenceError("fit_weighted_logit: separation detected, coefficient of '" +
                                   names[static_cast<std::size_t>(culprit)] + "' diverges (|beta| = " +
                                   std::to_string(largest) + ")");
        }
        beta = candidate;
        obj = cand_obj;
        compute_score(beta);
    }
    // One polishing Newton step: near the optimum it squares the score.
    if (iter > 0 && score.cwiseAbs().maxCoeff() < tol) {
        const Eigen::VectorXd v = (w.array() * prob.array() * (1.0 - prob.array())).matrix();
        Eigen::MatrixXd info = X.transpose() * v.asDiagonal() * X;
        info.diagonal().array() += ridge;
        const Eigen::VectorXd before = beta;
        const double before_score = score.cwiseAbs().maxCoeff();
        beta += info.ldlt().solve(score);
        compute_score(beta);
        if (!(score.cwiseAbs().maxCoeff() < before_score)) {
            beta = before;
            compute_score(beta);
        }
    }

    fit.coefficients = beta;
    fit.n_iter = iter;
    fit.max_score = score.cwiseAbs().maxCoeff();
    fit.converged = fit.max_score < tol;
    fit.log_likelihood = logit_log_likelihood(X, y, w, beta);

    const Eigen::VectorXd v = (w.array() * prob.array() * (1.0 - prob.array())).matrix();
    const Eigen::MatrixXd info = X.transpose() * v.asDiagonal() * X;
    const Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    fit.standard_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    return fit;
}

Eigen::VectorXd predict_prob(const LogitFit &fit, const Eigen::MatrixXd &X) {
    if (X.cols() != fit.coefficients.size()) {
        throw PreconditionError("predict_prob: column count does not match the fit");
    }
    const Eigen::VectorXd eta = X * fit.coefficients;
    Eigen::VectorXd out(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        out[i] = std::clamp(sigmoid(eta[i]), 1e-6, 1.0 - 1e-6);
    }
    return out;
}

LinearFit fit_weighted_linear(const Eigen::MatrixXd &X, const Eigen::VectorXd &y, const Eigen::VectorXd &w,
                              std::vector<std::string> names) {
    if (X.rows() != y.size() || X.rows() != w.size() || X.cols() == 0 || X.rows() < X.cols()) {
        throw PreconditionError("fit_weighted_linear: need matching rows and at least as many rows as columns");
    }
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (!(w[i] > 0.0) || !std::isfinite(w[i])) {
            throw PreconditionError("fit_weighted_linear: weights must be positive and finite");
        }
    }
    names = default_names(std::move(names), X.cols());
    const Eigen::VectorXd sw = w.cwiseSqrt();
    const Eigen::MatrixXd A = sw.asDiagonal() * X;
    check_rank(A, names);
    const Eigen::VectorXd b = sw.cwiseProduct(y);

    LinearFit fit;
    fit.names = names;
    fit.n_obs = static_cast<long>(X.rows());
    fit.coefficients = A.colPivHouseholderQr().solve(b);
    const Eigen::VectorXd resid = y - X * fit.coefficients;
    const double ssr = (w.array() * resid.array().square()).sum();
    const double dof = static_cast<double>(X.rows() - X.cols());
    fit.residual_variance = dof > 0 ? ssr / dof : 0.0;
    const double ybar = w.dot(y) / w.sum();
    const double sst = (w.array() * (y.array() - ybar).square()).sum();
    fit.r_squared = sst > 0.0 ? 1.0 - ssr / sst : 1.0;
    return fit;
}

Eigen::VectorXd predict_linear(const LinearFit &fit, const Eigen::MatrixXd &X) {
    if (X.cols() != fit.coefficients.size()) {
        throw PreconditionError("predict_linear: column count does not match the fit");
    }
    return X * fit.coefficients;
}

namespace {

std::string fixed3(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string stars(double coef, double se) {
    if (!(se > 0.0)) {
        return "";
    }
    const double pval = std::erfc(std::abs(coef / se) / std::sqrt(2.0));
    if (pval < 0.01) {
        return "***";
    }
    if (pval < 0.05) {
        return "**";
    }
    if (pval < 0.1) {
        return "*";
    }
    return "";
}

std::string pad_right(const std::string &s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string pad_left(const std::string &s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

} // namespace

std::string format_logit_table(const std::string &title,
                               const std::vector<std::pair<std::string, LogitFit>> &columns) {
    std::vector<std::string> rows;
    for (const auto &[label, fit] : columns) {
        for (const auto &name : fit.names) {
            if (std::find(rows.begin(), rows.end(), name) == rows.end()) {
                rows.push_back(name);
            }
        }
    }
    const std::size_t label_w = 20;
    const std::size_t col_w = 16;
    const std::size_t total_w = label_w + col_w * columns.size();
    std::ostringstream out;
    out << title << '\n' << std::string(total_w, '=') << '\n' << pad_right("", label_w);
    for (const auto &[label, fit] : columns) {
        out << pad_left(label, col_w);
    }
    out << '\n' << std::string(total_w, '-') << '\n';
    for (const auto &name : rows) {
        std::string coef_line = pad_right(name, label_w);
        std::string se_line = pad_right("", label_w);
        for (const auto &[label, fit] : columns) {
            auto it = std::find(fit.names.begin(), fit.names.end(), name);
            if (it == fit.names.end()) {
                coef_line += pad_left("", col_w);
                se_line += pad_left("", col_w);
                continue;
            }
            const auto j = static_cast<Eigen::Index>(it - fit.names.begin());
            coef_line += pad_left(fixed3(fit.coefficients[j]) + stars(fit.coefficients[j], fit.standard_errors[j]),
                                  col_w);
            se_line += pad_left("(" + fixed3(fit.standard_errors[j]) + ")", col_w);
        }
        out << coef_line << '\n' << se_line << '\n';
    }
    out << std::string(total_w, '-') << '\n';
    std::string obs_line = pad_right("Observations", label_w);
    std::string ll_line = pad_right("Log Likelihood", label_w);
    std::string aic_line = pad_right("Akaike Inf. Crit.", label_w);
    for (const auto &[label, fit] : columns) {
        obs_line += pad_left(std::to_string(fit.n_obs), col_w);
        ll_line += pad_left(fixed3(fit.log_likelihood), col_w);
        aic_line += pad_left(fixed3(fit.aic()), col_w);
    }
    out << obs_line << '\n' << ll_line << '\n' << aic_line << '\n' << std::string(total_w, '=') << '\n';
    out << "Note: *p<0.1; **p<0.05; ***p<0.01\n";
    return out.str();
}

} // namespace surveyforge::glm
