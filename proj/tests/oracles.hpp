#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library under test.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <vector>

namespace oracle {

/// Nelder-Mead minimizer with restarts from the best vertex.
inline std::vector<double> nelder_mead(const std::function<double(const std::vector<double> &)> &f,
                                       std::vector<double> start, double step = 1.0, int restarts = 6) {
    const std::size_t n = start.size();
    std::vector<double> best = start;
    for (int round = 0; round < restarts; ++round) {
        std::vector<std::vector<double>> s(n + 1, best);
        for (std::size_t i = 0; i < n; ++i) {
            s[i + 1][i] += step;
        }
        std::vector<double> fs(n + 1);
        for (std::size_t i = 0; i <= n; ++i) {
            fs[i] = f(s[i]);
        }
        for (int iter = 0; iter < 200000; ++iter) {
            std::vector<std::size_t> order(n + 1);
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
            std::vector<std::vector<double>> s2;
            std::vector<double> f2;
            for (auto o : order) {
                s2.push_back(s[o]);
                f2.push_back(fs[o]);
            }
            s = s2;
            fs = f2;
            double size = 0.0;
            for (std::size_t i = 1; i <= n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    size = std::max(size, std::abs(s[i][j] - s[0][j]));
                }
            }
            if (size < 1e-11 && fs[n] - fs[0] < 1e-15) {
                break;
            }
            std::vector<double> centroid(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    centroid[j] += s[i][j] / static_cast<double>(n);
                }
            }
            auto along = [&](double t) {
                std::vector<double> p(n);
                for (std::size_t j = 0; j < n; ++j) {
                    p[j] = centroid[j] + t * (s[n][j] - centroid[j]);
                }
                return p;
            };
            const auto xr = along(-1.0);
            const double fr = f(xr);
            if (fr < fs[0]) {
                const auto xe = along(-2.0);
                const double fe = f(xe);
                if (fe < fr) {
                    s[n] = xe;
                    fs[n] = fe;
                } else {
                    s[n] = xr;
                    fs[n] = fr;
                }
            } else if (fr < fs[n - 1]) {
                s[n] = xr;
                fs[n] = fr;
            } else {
                const bool outside = fr < fs[n];
                const auto xc = along(outside ? -0.5 : 0.5);
                const double fc = f(xc);
                if (fc < (outside ? fr : fs[n])) {
                    s[n] = xc;
                    fs[n] = fc;
                } else {
                    for (std::size_t i = 1; i <= n; ++i) {
                        for (std::size_t j = 0; j < n; ++j) {
                            s[i][j] = s[0][j] + 0.5 * (s[i][j] - s[0][j]);
                        }
                        fs[i] = f(s[i]);
                    }
                }
            }
        }
        best = s[0];
        step = std::max(step * 0.1, 1e-4);
    }
    return best;
}

/// Negative weighted Bernoulli log-likelihood, written out directly.
inline double neg_loglik(const std::vector<std::vector<double>> &X, const std::vector<double> &y,
                         const std::vector<double> &w, const std::vector<double> &beta) {
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double eta = 0.0;
        for (std::size_t j = 0; j < beta.size(); ++j) {
            eta += X[i][j] * beta[j];
        }
        // log(1 + e^eta) computed stably
        const double softplus = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
        total -= w[i] * (y[i] * eta - softplus);
    }
    return total;
}

/// Systematic PPS with start u: unit i is hit when u + j lies in
/// [cum_{i-1}, cum_i) for some integer j.
inline std::vector<std::size_t> systematic_select(const std::vector<double> &pi, double u) {
    std::vector<std::size_t> out;
    double lo = 0.0;
    for (std::size_t i = 0; i < pi.size(); ++i) {
        const double hi = lo + pi[i];
        const double first = std::ceil(lo - u);
        if (u + first < hi) {
            out.push_back(i);
        }
        lo = hi;
    }
    return out;
}

/// Every distinct systematic selection with the measure of starts producing it.
inline std::map<std::vector<std::size_t>, double> systematic_space(const std::vector<double> &pi) {
    std::vector<double> cuts = {0.0, 1.0};
    double cum = 0.0;
    for (double p : pi) {
        cum += p;
        cuts.push_back(cum - std::floor(cum));
    }
    std::sort(cuts.begin(), cuts.end());
    std::map<std::vector<std::size_t>, double> out;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double len = cuts[i + 1] - cuts[i];
        if (len > 1e-14) {
            out[systematic_select(pi, 0.5 * (cuts[i] + cuts[i + 1]))] += len;
        }
    }
    return out;
}

/// All size-m subsets of {0..n-1}.
inline std::vector<std::vector<std::size_t>> subsets(std::size_t n, std::size_t m) {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> cur;
    std::function<void(std::size_t)> rec = [&](std::size_t start) {
        if (cur.size() == m) {
            out.push_back(cur);
            return;
        }
        for (std::size_t i = start; i < n; ++i) {
            cur.push_back(i);
            rec(i + 1);
            cur.pop_back();
        }
    };
    rec(0);
    return out;
}

} // namespace oracle
