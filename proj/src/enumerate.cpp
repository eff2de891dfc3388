#include "surveyforge/error.hpp"
#include "surveyforge/sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

namespace surveyforge::sim {

namespace {

/// Distinct selections of systematic PPS with their probabilities, found by
/// walking the start u over the intervals between sorted breakpoints.
std::map<std::vector<std::size_t>, double> systematic_outcomes(const std::vector<double> &pi) {
    std::vector<double> cuts = {0.0, 1.0};
    double cum = 0.0;
    for (double p : pi) {
        cum += p;
        const double f = cum - std::floor(cum);
        cuts.push_back(f);
    }
    std::sort(cuts.begin(), cuts.end());
    std::map<std::vector<std::size_t>, double> out;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double len = cuts[i + 1] - cuts[i];
        if (len <= 1e-12) {
            continue;
        }
        out[systematic_pps(pi, 0.5 * (cuts[i] + cuts[i + 1]))] += len;
    }
    return out;
}

/// Sums over one PSU's sampled women: weighted outcome and weight.
struct Partial {
    double prob = 0.0;
    double sy = 0.0;
    double sw = 0.0;
};

using PartialMap = std::map<std::pair<double, double>, double>;

std::vector<Partial> to_list(const PartialMap &m) {
    std::vector<Partial> out;
    out.reserve(m.size());
    for (const auto &[key, p] : m) {
        out.push_back({p, key.first, key.second});
    }
    return out;
}

std::vector<Partial> convolve(const std::vector<Partial> &a, const std::vector<Partial> &b) {
    PartialMap m;
    for (const auto &x : a) {
        for (const auto &y : b) {
            m[{x.sy + y.sy, x.sw + y.sw}] += x.prob * y.prob;
        }
    }
    return to_list(m);
}

double binomial(long n, long k) {
    double r = 1.0;
    for (long i = 1; i <= k; ++i) {
        r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    }
    return r;
}

} // namespace

EnumerationResult enumerate_exact(const frame::SamplingFrame &frame, const DesignConfig &config, std::size_t cell,
                                  std::size_t max_outcomes) {
    config.validate();
    if (frame.cities.size() != 1) {
        throw PreconditionError("enumerate_exact needs a frame with exactly one city");
    }
    if (!frame.synthetic) {
        throw PreconditionError("enumerate_exact needs a synthetic frame with resident women");
    }
    if (config.psu_method != PsuMethod::Systematic) {
        throw PreconditionError("enumerate_exact supports systematic PSU selection only");
    }
    if (config.household_response < 1.0) {
        throw PreconditionError("enumerate_exact assumes full household response");
    }
    if (cell >= kNumCells) {
        throw PreconditionError("enumerate_exact: cell index out of range");
    }
    const auto &city = frame.cities.front();
    EnumerationResult result;
    std::unordered_map<std::string, std::size_t> woman_index;

    for (const auto &stratum : city.strata) {
        for (const auto &nb : stratum.neighborhoods) {
            for (const auto &tract : nb.tracts) {
                for (const auto &hh : tract.households) {
                    if (hh.n_eligible_women < 1) {
                        throw PreconditionError("enumerate_exact: household " + hh.id + " has no eligible woman");
                    }
                    for (const auto &w : hh.women) {
                        woman_index[w.id] = result.women.size();
                        result.women.push_back({w.id, 0.0, 0.0, w.victim(cell) ? 1.0 : 0.0});
                        result.population_total += w.victim(cell) ? 1.0 : 0.0;
                    }
                }
            }
        }
    }
    if (result.women.empty()) {
        throw PreconditionError("enumerate_exact: frame has no women");
    }
    result.population_mean = result.population_total / static_cast<double>(result.women.size());

    // Per stratum: list of outcomes, each a probability and per-PSU partial sums.
    struct StratumOutcome {
        double prob = 0.0;
        std::vector<std::pair<double, double>> psus;
    };
    std::vector<std::vector<StratumOutcome>> strata_outcomes;

    for (const auto &stratum : city.strata) {
        std::vector<long> sizes;
        for (const auto &nb : stratum.neighborhoods) {
            sizes.push_back(nb.n_households);
        }
        const long n = config.psus_per_stratum;
        if (static_cast<std::size_t>(n) > sizes.size()) {
            throw PreconditionError("enumerate_exact: stratum " + stratum.id + " has fewer neighborhoods than draws");
        }
        const auto psu_pi = design::pps_inclusion_probabilities(sizes, n);
        const auto psu_outcomes = systematic_outcomes(psu_pi);

        std::vector<double> psu_exact(sizes.size(), 0.0);
        for (const auto &[set, p] : psu_outcomes) {
            for (std::size_t i : set) {
                psu_exact[i] += p;
            }
        }

        // Outcome distribution of each neighborhood conditional on selection.
        std::vector<std::vector<Partial>> nb_dist(stratum.neighborhoods.size());
        for (std::size_t k = 0; k < stratum.neighborhoods.size(); ++k) {
            const auto &nb = stratum.neighborhoods[k];
            std::vector<long> tsizes;
            for (const auto &t : nb.tracts) {
                tsizes.push_back(t.n_households);
            }
            const long s = std::min<long>(config.tracts_per_psu, static_cast<long>(tsizes.size()));
            const auto tract_pi = design::pps_inclusion_probabilities(tsizes, s);
            const auto tract_outcomes = systematic_outcomes(tract_pi);
            std::vector<double> tract_exact(tsizes.size(), 0.0);
            for (const auto &[set, p] : tract_outcomes) {
                for (std::size_t t : set) {
                    tract_exact[t] += p;
                }
            }

            std::vector<std::vector<Partial>> tract_dist(nb.tracts.size());
            for (std::size_t t = 0; t < nb.tracts.size(); ++t) {
                const auto &tract = nb.tracts[t];
                const long nh = tract.n_households;
                if (nh > 24) {
                    throw PreconditionError("enumerate_exact: tract " + tract.id + " is too large to enumerate");
                }
                const long m = effective_visits(config, nh);
                const double p_subset = 1.0 / binomial(nh, m);
                const double p_hh = static_cast<double>(m) / static_cast<double>(nh);
                PartialMap dist;
                std::vector<double> hh_exact(static_cast<std::size_t>(nh), 0.0);
                for (std::uint32_t mask = 0; mask < (1u << nh); ++mask) {
                    if (__builtin_popcount(mask) != m) {
                        continue;
                    }
                    std::vector<Partial> acc = {{p_subset, 0.0, 0.0}};
                    for (long h = 0; h < nh; ++h) {
                        if (!(mask & (1u << h))) {
                            continue;
                        }
                        hh_exact[static_cast<std::size_t>(h)] += p_subset;
                        const auto &hh = tract.households[static_cast<std::size_t>(h)];
                        const double e = hh.n_eligible_women;
                        const double w = 1.0 / (psu_pi[k] * tract_pi[t] * p_hh / e);
                        std::vector<Partial> choice;
                        for (const auto &woman : hh.women) {
                            choice.push_back({1.0 / e, w * (woman.victim(cell) ? 1.0 : 0.0), w});
                        }
                        acc = convolve(acc, choice);
                    }
                    for (const auto &a : acc) {
                        dist[{a.sy, a.sw}] += a.prob;
                    }
                }
                tract_dist[t] = to_list(dist);

                for (long h = 0; h < nh; ++h) {
                    const auto &hh = tract.households[static_cast<std::size_t>(h)];
                    const double e = hh.n_eligible_women;
                    for (const auto &woman : hh.women) {
                        auto &ew = result.women[woman_index.at(woman.id)];
                        ew.inclusion = psu_exact[k] * tract_exact[t] * hh_exact[static_cast<std::size_t>(h)] / e;
                        ew.eq6 = psu_pi[k] * tract_pi[t] * p_hh / e;
                    }
                }
            }

            PartialMap nb_map;
            for (const auto &[set, p] : tract_outcomes) {
                std::vector<Partial> acc = {{p, 0.0, 0.0}};
                for (std::size_t t : set) {
                    acc = convolve(acc, tract_dist[t]);
                }
                for (const auto &a : acc) {
                    nb_map[{a.sy, a.sw}] += a.prob;
                }
            }
            nb_dist[k] = to_list(nb_map);
        }

        std::vector<StratumOutcome> outcomes;
        for (const auto &[set, p] : psu_outcomes) {
            std::vector<StratumOutcome> acc = {{p, {}}};
            for (std::size_t k : set) {
                std::vector<StratumOutcome> next;
                for (const auto &a : acc) {
                    for (const auto &d : nb_dist[k]) {
                        StratumOutcome o = a;
                        o.prob *= d.prob;
                        o.psus.emplace_back(d.sy, d.sw);
                        next.push_back(std::move(o));
                    }
                }
                acc = std::move(next);
                if (acc.size() > max_outcomes) {
                    throw PreconditionError("enumerate_exact: sample space of stratum " + stratum.id +
                                            " exceeds the outcome limit");
                }
            }
            outcomes.insert(outcomes.end(), acc.begin(), acc.end());
        }
        strata_outcomes.push_back(std::move(outcomes));
    }

    double space = 1.0;
    for (const auto &s : strata_outcomes) {
        space *= static_cast<double>(s.size());
    }
    if (space > static_cast<double>(max_outcomes)) {
        throw PreconditionError("enumerate_exact: " + std::to_string(static_cast<long long>(space)) +
                                " sample outcomes exceed the limit of " + std::to_string(max_outcomes));
    }
    result.n_outcomes = static_cast<std::size_t>(space);

    const double n_women = static_cast<double>(result.women.size());
    double m1_total = 0.0;
    double m2_total = 0.0;
    double m1_ratio = 0.0;
    double m2_ratio = 0.0;
    double lin = 0.0;
    std::vector<std::size_t> pos(strata_outcomes.size(), 0);
    std::vector<std::vector<double>> totals(strata_outcomes.size());
    for (std::size_t step = 0; step < result.n_outcomes; ++step) {
        double prob = 1.0;
        double x = 0.0;
        double w = 0.0;
        for (std::size_t h = 0; h < strata_outcomes.size(); ++h) {
            const auto &o = strata_outcomes[h][pos[h]];
            prob *= o.prob;
            for (const auto &[sy, sw] : o.psus) {
                x += sy;
                w += sw;
            }
        }
        const double ratio = x / w;
        for (std::size_t h = 0; h < strata_outcomes.size(); ++h) {
            const auto &o = strata_outcomes[h][pos[h]];
            totals[h].clear();
            for (const auto &[sy, sw] : o.psus) {
                totals[h].push_back((sy - ratio * sw) / w);
            }
        }
        result.total_probability += prob;
        m1_total += prob * x;
        m2_total += prob * x * x;
        m1_ratio += prob * ratio;
        m2_ratio += prob * ratio * ratio;
        lin += prob * estimate::stratified_cluster_variance(totals);

        for (std::size_t h = 0; h < pos.size(); ++h) {
            if (++pos[h] < strata_outcomes[h].size()) {
                break;
            }
            pos[h] = 0;
        }
    }
    result.ht_total_mean = m1_total;
    result.ht_total_variance = m2_total - m1_total * m1_total;
    result.ht_mean_mean = m1_total / n_women;
    result.ht_mean_variance = result.ht_total_variance / (n_women * n_women);
    result.ratio_mean = m1_ratio;
    result.ratio_variance = m2_ratio - m1_ratio * m1_ratio;
    result.expected_linearization_variance = lin;
    return result;
}

} // namespace surveyforge::sim
