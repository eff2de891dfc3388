#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

namespace surveyforge::glm {

struct LogitOptions {
    int max_iter = 50;
    /// Converged when max |score| < tolerance * max(1, mean weight).
    double tolerance = 1e-8;
    /// Coefficients beyond this magnitude with a rising likelihood signal separation.
    double separation_bound = 15.0;
    /// Optional ridge penalty added to the information matrix (0 disables).
    double ridge = 0.0;
};

struct LogitFit {
    std::vector<std::string> names;
    Eigen::VectorXd coefficients;
    Eigen::VectorXd standard_errors;
    double log_likelihood = 0.0;
    long n_obs = 0;
    bool converged = false;
    int n_iter = 0;
    /// Largest absolute score component at the returned coefficients.
    double max_score = 0.0;

    /// 2p - 2 loglik.
    double aic() const noexcept;
};

/// Weighted Bernoulli maximum likelihood by IRLS with step-halving, starting
/// from zero. X includes the intercept column. Standard errors come from the
/// inverse weighted information matrix (model-based).
///
/// Throws RankError when X is rank deficient under the weights and
/// ConvergenceError on separation.
LogitFit fit_weighted_logit(const Eigen::MatrixXd &X, const Eigen::VectorXd &y, const Eigen::VectorXd &w,
                            std::vector<std::string> names = {}, const LogitOptions &options = {});

/// Weighted log-likelihood of coefficients beta.
double logit_log_likelihood(const Eigen::MatrixXd &X, const Eigen::VectorXd &y, const Eigen::VectorXd &w,
                            const Eigen::VectorXd &beta);

/// Inverse logit of X beta, clipped to [1e-6, 1 - 1e-6].
Eigen::VectorXd predict_prob(const LogitFit &fit, const Eigen::MatrixXd &X);

struct LinearFit {
    std::vector<std::string> names;
    Eigen::VectorXd coefficients;
    double residual_variance = 0.0;
    double r_squared = 0.0;
    long n_obs = 0;
};

/// Weighted least squares through a column-pivoted QR of sqrt(w) X.
/// Throws RankError listing the collinear columns.
LinearFit fit_weighted_linear(const Eigen::MatrixXd &X, const Eigen::VectorXd &y, const Eigen::VectorXd &w,
                              std::vector<std::string> names = {});

Eigen::VectorXd predict_linear(const LinearFit &fit, const Eigen::MatrixXd &X);

/// Side-by-side text table of logit fits, one column per label: coefficient
/// with significance stars (p < 0.1, 0.05, 0.01), standard error in
/// parentheses, then Observations, Log Likelihood and Akaike Inf. Crit.
std::string format_logit_table(const std::string &title,
                               const std::vector<std::pair<std::string, LogitFit>> &columns);

} // namespace surveyforge::glm
