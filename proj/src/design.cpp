#include "surveyforge/design.hpp"

#include "surveyforge/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

namespace surveyforge::design {

bool nearly_equal(double a, double b, double rel) noexcept {
    return std::abs(a - b) <= rel * std::max({1e-300, std::abs(a), std::abs(b)});
}

namespace {

double pps_prob(long n, long size, long total, const char *what) {
    if (n < 1 || size <= 0 || size > total) {
        throw PreconditionError(std::string(what) + ": need n >= 1 and 0 < unit size <= total (n=" +
                                std::to_string(n) + ", size=" + std::to_string(size) + ", total=" +
                                std::to_string(total) + ")");
    }
    if (n * size > total) {
        throw CertaintyUnitError(std::string(what) + ": probability " + std::to_string(n) + "*" +
                                 std::to_string(size) + "/" + std::to_string(total) +
                                 " exceeds 1; treat the unit as a certainty selection");
    }
    return static_cast<double>(n) * static_cast<double>(size) / static_cast<double>(total);
}

} // namespace

double psu_prob(long n_k, long nh_ki, long nh_k) { return pps_prob(n_k, nh_ki, nh_k, "psu_prob"); }

double ssu_prob(long s_ik, long nh_kij, long nh_ki) { return pps_prob(s_ik, nh_kij, nh_ki, "ssu_prob"); }

double household_prob(long nv_households, long nh_kij) {
    if (nh_kij <= 0 || nv_households < 0) {
        throw PreconditionError("household_prob: counts must be nonnegative with a positive tract total");
    }
    if (nv_households > nh_kij) {
        throw IntegrityError("household_prob: " + std::to_string(nv_households) + " visited households exceed the " +
                             std::to_string(nh_kij) + " in the tract");
    }
    return static_cast<double>(nv_households) / static_cast<double>(nh_kij);
}

double nonresponse_prob(long nv_questionnaires, long nv_households) {
    if (nv_households <= 0) {
        throw IntegrityError("nonresponse_prob: no visited households in a tract with observations");
    }
    if (nv_questionnaires <= 0) {
        throw IntegrityError("nonresponse_prob: zero valid questionnaires in a tract with observations");
    }
    if (nv_questionnaires > nv_households) {
        throw IntegrityError("nonresponse_prob: " + std::to_string(nv_questionnaires) +
                             " questionnaires exceed " + std::to_string(nv_households) + " visited households");
    }
    return static_cast<double>(nv_questionnaires) / static_cast<double>(nv_households);
}

double woman_prob(long e_kijh) {
    if (e_kijh < 1) {
        throw PreconditionError("woman_prob: a household with an interview needs at least one eligible woman");
    }
    return 1.0 / static_cast<double>(e_kijh);
}

void StageCounts::validate() const {
    if (n_k < 0 || s_ik < 0 || nv_households < 0 || nv_questionnaires < 0 || e < 0) {
        throw IntegrityError("stage counts must be nonnegative");
    }
    if (nv_questionnaires > nv_households) {
        throw IntegrityError("more valid questionnaires than visited households");
    }
}

double overall_prob(const InclusionProbabilities &p) {
    return p.p_psu * p.p_ssu_given_psu * p.p_household_given_ssu * p.p_nonresponse * p.p_woman_given_household;
}

InclusionProbabilities inclusion_from_counts(const StageCounts &c, long nh_ki, long nh_k, long nh_kij) {
    c.validate();
    InclusionProbabilities p;
    p.p_psu = psu_prob(c.n_k, nh_ki, nh_k);
    p.p_ssu_given_psu = ssu_prob(c.s_ik, nh_kij, nh_ki);
    p.p_household_given_ssu = household_prob(c.nv_households, nh_kij);
    p.p_nonresponse = nonresponse_prob(c.nv_questionnaires, c.nv_households);
    p.p_woman_given_household = woman_prob(c.e);
    p.p_overall = overall_prob(p);
    return p;
}

double base_weight(double p_overall) {
    if (!(p_overall > 0.0 && p_overall <= 1.0 + kRelTol)) {
        throw IntegrityError("base_weight: inclusion probability " + std::to_string(p_overall) +
                             " is outside (0, 1]");
    }
    return 1.0 / p_overall;
}

std::vector<double> pps_inclusion_probabilities(const std::vector<long> &sizes, long n,
                                                std::vector<bool> *certainty) {
    const std::size_t units = sizes.size();
    if (n < 0 || static_cast<std::size_t>(n) > units) {
        throw PreconditionError("pps_inclusion_probabilities: sample size " + std::to_string(n) +
                                " outside [0, " + std::to_string(units) + "]");
    }
    for (long s : sizes) {
        if (s <= 0) {
            throw PreconditionError("pps_inclusion_probabilities: sizes must be positive");
        }
    }
    std::vector<bool> fixed(units, false);
    std::vector<double> pi(units, 0.0);
    long remaining = n;
    for (;;) {
        long total = 0;
        for (std::size_t i = 0; i < units; ++i) {
            if (!fixed[i]) {
                total += sizes[i];
            }
        }
        bool capped = false;
        for (std::size_t i = 0; i < units; ++i) {
            if (!fixed[i] && remaining * sizes[i] >= total && remaining > 0) {
                fixed[i] = true;
                capped = true;
            }
        }
        if (!capped) {
            for (std::size_t i = 0; i < units; ++i) {
                pi[i] = fixed[i] ? 1.0
                                 : static_cast<double>(remaining) * static_cast<double>(sizes[i]) /
                                       static_cast<double>(total);
            }
            break;
        }
        remaining = n - static_cast<long>(std::count(fixed.begin(), fixed.end(), true));
        if (remaining <= 0) {
            for (std::size_t i = 0; i < units; ++i) {
                pi[i] = fixed[i] ? 1.0 : 0.0;
            }
            break;
        }
    }
    if (certainty) {
        *certainty = fixed;
    }
    return pi;
}

namespace {

struct NeighborhoodRef {
    std::size_t stratum = 0;
    const frame::Neighborhood *nb = nullptr;
};

std::string key2(const std::string &a, const std::string &b) { return a + '\x1f' + b; }
std::string key3(const std::string &a, const std::string &b, const std::string &c) {
    return a + '\x1f' + b + '\x1f' + c;
}

} // namespace

std::vector<InclusionProbabilities> observation_probabilities(const frame::SamplingFrame &frame,
                                                              const std::vector<Observation> &observations,
                                                              const std::vector<TractVisit> &visits,
                                                              DesignDiagnostics *diagnostics) {
    DesignDiagnostics local;
    DesignDiagnostics &diag = diagnostics ? *diagnostics : local;

    std::unordered_map<std::string, const frame::City *> cities;
    std::unordered_map<std::string, NeighborhoodRef> neighborhoods; // key: city|nb
    for (const auto &city : frame.cities) {
        cities.emplace(city.id, &city);
        for (std::size_t s = 0; s < city.strata.size(); ++s) {
            for (const auto &nb : city.strata[s].neighborhoods) {
                neighborhoods.emplace(key2(city.id, nb.id), NeighborhoodRef{s, &nb});
            }
        }
    }

    auto find_nb = [&](const std::string &city, const std::string &stratum, const std::string &nb,
                       const char *source) -> const NeighborhoodRef & {
        auto it = neighborhoods.find(key2(city, nb));
        if (it == neighborhoods.end()) {
            throw IntegrityError(std::string(source) + ": neighborhood " + nb + " of city " + city +
                                 " is not in the frame");
        }
        const auto &st = cities.at(city)->strata[it->second.stratum];
        if (st.id != stratum) {
            throw IntegrityError(std::string(source) + ": neighborhood " + nb + " of city " + city +
                                 " belongs to stratum " + st.id + ", not " + stratum);
        }
        return it->second;
    };

    auto find_tract = [](const frame::Neighborhood &nb, const std::string &tract) -> const frame::Tract & {
        for (const auto &t : nb.tracts) {
            if (t.id == tract) {
                return t;
            }
        }
        throw IntegrityError("tract " + tract + " is not in neighborhood " + nb.id);
    };

    // Visit log aggregation.
    std::map<std::string, std::set<std::string>> stratum_psus;   // city|stratum -> neighborhoods
    std::map<std::string, std::set<std::string>> psu_tracts;     // city|nb -> tracts
    std::unordered_map<std::string, long> visited;               // city|nb|tract -> NVH
    for (const auto &v : visits) {
        find_nb(v.city, v.stratum, v.neighborhood, "visit log");
        const std::string tk = key3(v.city, v.neighborhood, v.tract);
        if (!visited.emplace(tk, v.n_visited_households).second) {
            throw IntegrityError("visit log lists tract " + v.tract + " of neighborhood " + v.neighborhood +
                                 " twice");
        }
        stratum_psus[key2(v.city, v.stratum)].insert(v.neighborhood);
        psu_tracts[key2(v.city, v.neighborhood)].insert(v.tract);
    }

    std::unordered_map<std::string, long> questionnaires;
    for (const auto &o : observations) {
        ++questionnaires[key3(o.city, o.neighborhood, o.tract)];
    }

    std::map<std::string, std::vector<double>> psu_pi_cache;
    std::map<std::string, std::vector<double>> ssu_pi_cache;

    std::vector<InclusionProbabilities> out;
    out.reserve(observations.size());
    for (const auto &o : observations) {
        if (!cities.count(o.city)) {
            throw IntegrityError("observation " + o.woman_id + ": city " + o.city + " is not in the frame");
        }
        const auto &ref = find_nb(o.city, o.stratum, o.neighborhood, "observation");
        const frame::City &city = *cities.at(o.city);
        const frame::Stratum &stratum = city.strata[ref.stratum];
        const frame::Tract &tract = find_tract(*ref.nb, o.tract);
        const std::string tk = key3(o.city, o.neighborhood, o.tract);
        auto vit = visited.find(tk);
        if (vit == visited.end()) {
            throw IntegrityError("observation " + o.woman_id + ": tract " + o.tract + " of neighborhood " +
                                 o.neighborhood + " is missing from the visit log");
        }

        const std::string sk = key2(o.city, o.stratum);
        auto pit = psu_pi_cache.find(sk);
        if (pit == psu_pi_cache.end()) {
            std::vector<long> sizes;
            for (const auto &nb : stratum.neighborhoods) {
                sizes.push_back(nb.n_households);
            }
            std::vector<bool> certain;
            auto pi = pps_inclusion_probabilities(sizes, static_cast<long>(stratum_psus[sk].size()), &certain);
            for (std::size_t i = 0; i < certain.size(); ++i) {
                if (certain[i]) {
                    diag.warnings.push_back("city " + o.city + " stratum " + o.stratum + ": neighborhood " +
                                            stratum.neighborhoods[i].id + " taken with certainty");
                }
            }
            pit = psu_pi_cache.emplace(sk, std::move(pi)).first;
        }
        const std::size_t nb_pos = static_cast<std::size_t>(ref.nb - stratum.neighborhoods.data());

        const std::string nk = key2(o.city, o.neighborhood);
        auto sit = ssu_pi_cache.find(nk);
        if (sit == ssu_pi_cache.end()) {
            std::vector<long> sizes;
            for (const auto &t : ref.nb->tracts) {
                sizes.push_back(t.n_households);
            }
            std::vector<bool> certain;
            auto pi = pps_inclusion_probabilities(sizes, static_cast<long>(psu_tracts[nk].size()), &certain);
            for (std::size_t i = 0; i < certain.size(); ++i) {
                if (certain[i]) {
                    diag.warnings.push_back("city " + o.city + " neighborhood " + o.neighborhood + ": tract " +
                                            ref.nb->tracts[i].id + " taken with certainty");
                }
            }
            sit = ssu_pi_cache.emplace(nk, std::move(pi)).first;
        }
        const std::size_t tract_pos = static_cast<std::size_t>(&tract - ref.nb->tracts.data());

        InclusionProbabilities p;
        p.p_psu = pit->second[nb_pos];
        p.p_ssu_given_psu = sit->second[tract_pos];
        p.p_household_given_ssu = household_prob(vit->second, tract.n_households);
        p.p_nonresponse = nonresponse_prob(questionnaires.at(tk), vit->second);
        p.p_woman_given_household = woman_prob(o.n_eligible);
        p.p_overall = overall_prob(p);
        out.push_back(p);
    }

    std::set<std::string> thin;
    for (const auto &[tk, count] : questionnaires) {
        if (count < 2) {
            std::string label = tk;
            std::replace(label.begin(), label.end(), '\x1f', '/');
            thin.insert(label);
        }
    }
    diag.thin_tracts.assign(thin.begin(), thin.end());
    return out;
}

} // namespace surveyforge::design
