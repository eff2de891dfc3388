#include "surveyforge/frame.hpp"

#include "surveyforge/csv.hpp"
#include "surveyforge/error.hpp"
#include "surveyforge/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <unordered_map>

namespace surveyforge::frame {

std::string_view to_string(AgeGroup v) noexcept { return v == AgeGroup::Young ? "Young" : "Adult"; }

std::string_view to_string(Race v) noexcept { return v == Race::White ? "White" : "NonWhite"; }

std::string_view to_string(Education v) noexcept {
    switch (v) {
    case Education::Elementary:
        return "Elementary";
    case Education::HighSchool:
        return "HighSchool";
    case Education::Undergraduate:
        return "Undergraduate";
    }
    return "?";
}

long Stratum::n_households() const noexcept {
    long total = 0;
    for (const auto &n : neighborhoods) {
        total += n.n_households;
    }
    return total;
}

namespace {

template <class Units>
void require_unique_ids(const Units &units, const std::string &scope) {
    std::set<std::string> seen;
    for (const auto &u : units) {
        if (!seen.insert(u.id).second) {
            throw IntegrityError("duplicate id '" + u.id + "' within " + scope);
        }
    }
}

} // namespace

void SamplingFrame::validate() const {
    require_unique_ids(cities, "frame");
    for (const auto &city : cities) {
        require_unique_ids(city.strata, "city " + city.id);
        std::set<std::string> city_neighborhoods;
        for (const auto &stratum : city.strata) {
            const std::string sscope = "city " + city.id + " stratum " + stratum.id;
            if (stratum.neighborhoods.empty()) {
                throw IntegrityError(sscope + " has no neighborhoods");
            }
            require_unique_ids(stratum.neighborhoods, sscope);
            for (const auto &nb : stratum.neighborhoods) {
                if (!city_neighborhoods.insert(nb.id).second) {
                    throw IntegrityError("neighborhood '" + nb.id + "' appears in two strata of city " + city.id);
                }
                const std::string nscope = sscope + " neighborhood " + nb.id;
                require_unique_ids(nb.tracts, nscope);
                long tract_sum = 0;
                for (const auto &tract : nb.tracts) {
                    const std::string tscope = nscope + " tract " + tract.id;
                    if (tract.n_households <= 0) {
                        throw IntegrityError(tscope + " has no households");
                    }
                    if (!tract.households.empty() &&
                        static_cast<long>(tract.households.size()) != tract.n_households) {
                        throw IntegrityError(tscope + " lists " + std::to_string(tract.households.size()) +
                                             " households but its total is " + std::to_string(tract.n_households));
                    }
                    require_unique_ids(tract.households, tscope);
                    for (const auto &hh : tract.households) {
                        if (hh.n_eligible_women < 0) {
                            throw IntegrityError(tscope + " household " + hh.id + " has a negative eligible count");
                        }
                        if (synthetic && static_cast<int>(hh.women.size()) != hh.n_eligible_women) {
                            throw IntegrityError(tscope + " household " + hh.id +
                                                 " women listed differ from its eligible count");
                        }
                    }
                    tract_sum += tract.n_households;
                }
                if (tract_sum != nb.n_households) {
                    throw IntegrityError(nscope + " total " + std::to_string(nb.n_households) +
                                         " differs from the sum of its tracts " + std::to_string(tract_sum));
                }
            }
        }
    }
}

bool structurally_equal(const SamplingFrame &a, const SamplingFrame &b) {
    if (a.cities.size() != b.cities.size()) {
        return false;
    }
    for (std::size_t c = 0; c < a.cities.size(); ++c) {
        const auto &ca = a.cities[c];
        const auto &cb = b.cities[c];
        if (ca.id != cb.id || ca.strata.size() != cb.strata.size()) {
            return false;
        }
        for (std::size_t s = 0; s < ca.strata.size(); ++s) {
            const auto &sa = ca.strata[s];
            const auto &sb = cb.strata[s];
            if (sa.id != sb.id || sa.neighborhoods.size() != sb.neighborhoods.size()) {
                return false;
            }
            for (std::size_t n = 0; n < sa.neighborhoods.size(); ++n) {
                const auto &na = sa.neighborhoods[n];
                const auto &nb = sb.neighborhoods[n];
                if (na.id != nb.id || na.n_households != nb.n_households || na.tracts.size() != nb.tracts.size()) {
                    return false;
                }
                for (std::size_t t = 0; t < na.tracts.size(); ++t) {
                    const auto &ta = na.tracts[t];
                    const auto &tb = nb.tracts[t];
                    if (ta.id != tb.id || ta.n_households != tb.n_households ||
                        ta.households.size() != tb.households.size()) {
                        return false;
                    }
                    for (std::size_t h = 0; h < ta.households.size(); ++h) {
                        if (ta.households[h].id != tb.households[h].id ||
                            ta.households[h].n_eligible_women != tb.households[h].n_eligible_women) {
                            return false;
                        }
                    }
                }
            }
        }
    }
    return true;
}

std::array<std::vector<std::size_t>, 4>
build_strata(const std::vector<std::pair<std::string, long>> &neighborhoods) {
    if (neighborhoods.size() < 4) {
        throw ConfigError("build_strata needs at least 4 neighborhoods, got " + std::to_string(neighborhoods.size()));
    }
    long total = 0;
    for (const auto &[id, count] : neighborhoods) {
        if (count <= 0) {
            throw ConfigError("neighborhood '" + id + "' has a nonpositive household count");
        }
        total += count;
    }

    std::vector<std::size_t> order(neighborhoods.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (neighborhoods[a].second != neighborhoods[b].second) {
            return neighborhoods[a].second > neighborhoods[b].second;
        }
        return neighborhoods[a].first < neighborhoods[b].first;
    });

    // Integer comparison of 4 * cumulative against the total avoids rounding at the boundary.
    std::array<std::vector<std::size_t>, 4> strata;
    std::size_t current = 0;
    long cumulative = 0;
    const std::size_t n = order.size();
    for (std::size_t pos = 0; pos < n; ++pos) {
        const std::size_t idx = order[pos];
        const long count = neighborhoods[idx].second;
        if (!strata[current].empty() && current < 3) {
            const bool overflows = 4 * (cumulative + count) > total;
            const bool must_open = n - pos <= 3 - current;
            if (overflows || must_open) {
                ++current;
                cumulative = 0;
            }
        }
        strata[current].push_back(idx);
        cumulative += count;
    }
    return strata;
}

SamplingFrame read_frame(std::istream &in, const std::string &source_name) {
    const auto table = csv::Table::parse(in, source_name);
    const std::size_t c_city = table.require_column("city");
    const std::size_t c_stratum = table.require_column("stratum");
    const std::size_t c_nb = table.require_column("neighborhood");
    const std::size_t c_tract = table.require_column("tract");
    const std::size_t c_hh = table.require_column("household");
    const std::size_t c_nh_nb = table.require_column("n_households_neighborhood");
    const std::size_t c_nh_tract = table.require_column("n_households_tract");
    const std::size_t c_elig = table.require_column("n_eligible_women");
    const auto c_nh_stratum = table.column("n_households_stratum");

    // Collect per-city neighborhood records first; strata may need to be built.
    struct TractRec {
        std::string id;
        long total = -1;
        std::size_t first_line = 0;
        std::vector<Household> households;
        std::set<std::string> ids;
    };
    struct NbRec {
        std::string id;
        std::string stratum;
        long total = -1;
        std::size_t first_line = 0;
        std::vector<TractRec> tracts;
        std::unordered_map<std::string, std::size_t> tract_index;
    };
    struct CityRec {
        std::string id;
        std::vector<NbRec> neighborhoods;
        std::unordered_map<std::string, std::size_t> nb_index;
        std::map<std::string, long> stratum_total;
        std::size_t blank_strata = 0;
        std::size_t rows = 0;
    };
    std::vector<CityRec> cities;
    std::unordered_map<std::string, std::size_t> city_index;

    for (std::size_t r = 0; r < table.rows(); ++r) {
        const std::size_t line = table.line(r);
        const std::string &city_id = table.at(r, c_city);
        const std::string &stratum_id = table.at(r, c_stratum);
        const std::string &nb_id = table.at(r, c_nb);
        const std::string &tract_id = table.at(r, c_tract);
        const std::string &hh_id = table.at(r, c_hh);
        if (city_id.empty() || nb_id.empty() || tract_id.empty() || hh_id.empty()) {
            throw ParseError(source_name, line, "empty unit identifier");
        }
        const long nh_nb = table.as_long(r, c_nh_nb);
        const long nh_tract = table.as_long(r, c_nh_tract);
        const long elig = table.as_long(r, c_elig);
        if (nh_nb <= 0 || nh_tract <= 0) {
            throw ParseError(source_name, line, "household totals must be positive");
        }
        if (elig < 0) {
            throw ParseError(source_name, line, "n_eligible_women must be nonnegative");
        }

        auto [cit, cnew] = city_index.emplace(city_id, cities.size());
        if (cnew) {
            cities.push_back(CityRec{city_id, {}, {}, {}, 0, 0});
        }
        CityRec &city = cities[cit->second];
        ++city.rows;
        if (stratum_id.empty()) {
            ++city.blank_strata;
        }
        if (c_nh_stratum && !stratum_id.empty()) {
            const long st = table.as_long(r, *c_nh_stratum);
            auto [sit, snew] = city.stratum_total.emplace(stratum_id, st);
            if (!snew && sit->second != st) {
                throw IntegrityError("city " + city_id + " stratum " + stratum_id +
                                     ": inconsistent n_households_stratum at line " + std::to_string(line));
            }
        }

        auto [nit, nnew] = city.nb_index.emplace(nb_id, city.neighborhoods.size());
        if (nnew) {
            city.neighborhoods.push_back(NbRec{nb_id, stratum_id, nh_nb, line, {}, {}});
        }
        NbRec &nb = city.neighborhoods[nit->second];
        if (nb.stratum != stratum_id) {
            throw IntegrityError("city " + city_id + " neighborhood " + nb_id + " assigned to strata '" + nb.stratum +
                                 "' and '" + stratum_id + "' (line " + std::to_string(line) + ")");
        }
        if (nb.total != nh_nb) {
            throw IntegrityError("city " + city_id + " neighborhood " + nb_id +
                                 ": inconsistent n_households_neighborhood at line " + std::to_string(line));
        }

        auto [tit, tnew] = nb.tract_index.emplace(tract_id, nb.tracts.size());
        if (tnew) {
            nb.tracts.push_back(TractRec{tract_id, nh_tract, line, {}, {}});
        }
        TractRec &tract = nb.tracts[tit->second];
        if (tract.total != nh_tract) {
            throw IntegrityError("city " + city_id + " neighborhood " + nb_id + " tract " + tract_id +
                                 ": inconsistent n_households_tract at line " + std::to_string(line));
        }
        if (!tract.ids.insert(hh_id).second) {
            throw IntegrityError("city " + city_id + " tract " + tract_id + ": duplicate household '" + hh_id +
                                 "' at line " + std::to_string(line));
        }
        Household hh;
        hh.id = hh_id;
        hh.n_eligible_women = static_cast<int>(elig);
        tract.households.push_back(std::move(hh));
    }

    SamplingFrame frame;
    for (auto &crec : cities) {
        // Unit totals first, so errors name the lowest inconsistent unit.
        for (const auto &nb : crec.neighborhoods) {
            long sum = 0;
            for (const auto &tract : nb.tracts) {
                if (static_cast<long>(tract.households.size()) != tract.total) {
                    throw IntegrityError("city " + crec.id + " neighborhood " + nb.id + " tract " + tract.id +
                                         ": total " + std::to_string(tract.total) + " but " +
                                         std::to_string(tract.households.size()) + " household rows");
                }
                sum += tract.total;
            }
            if (sum != nb.total) {
                throw IntegrityError("city " + crec.id + " neighborhood " + nb.id + ": total " +
                                     std::to_string(nb.total) + " differs from the sum of its tracts " +
                                     std::to_string(sum));
            }
        }

        City city;
        city.id = crec.id;
        auto to_neighborhood = [](NbRec &rec) {
            Neighborhood nb;
            nb.id = rec.id;
            nb.n_households = rec.total;
            for (auto &t : rec.tracts) {
                nb.tracts.push_back(Tract{t.id, t.total, std::move(t.households)});
            }
            return nb;
        };

        if (crec.blank_strata == crec.rows) {
            std::vector<std::pair<std::string, long>> sizes;
            for (const auto &nb : crec.neighborhoods) {
                sizes.emplace_back(nb.id, nb.total);
            }
            const auto groups = build_strata(sizes);
            for (std::size_t k = 0; k < groups.size(); ++k) {
                Stratum stratum;
                stratum.id = std::to_string(k + 1);
                for (std::size_t idx : groups[k]) {
                    stratum.neighborhoods.push_back(to_neighborhood(crec.neighborhoods[idx]));
                }
                city.strata.push_back(std::move(stratum));
            }
        } else if (crec.blank_strata != 0) {
            throw ParseError(source_name, 0, "city " + crec.id + " mixes blank and assigned strata");
        } else {
            std::map<std::string, std::size_t> sidx;
            for (auto &nb : crec.neighborhoods) {
                auto [it, fresh] = sidx.emplace(nb.stratum, city.strata.size());
                if (fresh) {
                    city.strata.push_back(Stratum{nb.stratum, {}});
                }
                city.strata[it->second].neighborhoods.push_back(to_neighborhood(nb));
            }
            for (const auto &[sid, declared] : crec.stratum_total) {
                const auto &stratum = city.strata[sidx.at(sid)];
                if (stratum.n_households() != declared) {
                    throw IntegrityError("city " + crec.id + " stratum " + sid + ": total " +
                                         std::to_string(declared) + " differs from the sum of its neighborhoods " +
                                         std::to_string(stratum.n_households()));
                }
            }
        }
        frame.cities.push_back(std::move(city));
    }
    frame.validate();
    return frame;
}

SamplingFrame load_frame(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path, 0, "cannot open frame file");
    }
    return read_frame(in, path);
}

void write_frame(std::ostream &out, const SamplingFrame &frame) {
    csv::Writer writer(out);
    writer.row({"city", "stratum", "neighborhood", "tract", "household", "n_households_neighborhood",
                "n_households_tract", "n_eligible_women"});
    for (const auto &city : frame.cities) {
        for (const auto &stratum : city.strata) {
            for (const auto &nb : stratum.neighborhoods) {
                for (const auto &tract : nb.tracts) {
                    for (const auto &hh : tract.households) {
                        writer.row({city.id, stratum.id, nb.id, tract.id, hh.id, std::to_string(nb.n_households),
                                    std::to_string(tract.n_households), std::to_string(hh.n_eligible_women)});
                    }
                }
            }
        }
    }
}

void FrameGenConfig::validate() const {
    auto prob = [](double p, const char *name) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ConfigError(std::string("frame config: ") + name + " must lie in [0,1]");
        }
    };
    if (n_cities < 1 || neighborhoods_per_city < 4) {
        throw ConfigError("frame config: need at least 1 city and 4 neighborhoods per city");
    }
    if (tracts_min < 1 || tracts_max < tracts_min) {
        throw ConfigError("frame config: invalid tract count range");
    }
    if (households_min < 1 || households_max < households_min) {
        throw ConfigError("frame config: invalid household count range");
    }
    if (eligible_women_probs.empty()) {
        throw ConfigError("frame config: eligible_women_probs is empty");
    }
    double total = 0.0;
    for (double p : eligible_women_probs) {
        prob(p, "eligible_women_probs entry");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw ConfigError("frame config: eligible_women_probs must sum to 1");
    }
    if (eligible_women_probs.size() == 1) {
        throw ConfigError("frame config: every household would have zero eligible women");
    }
    prob(p_young, "p_young");
    prob(p_white, "p_white");
    prob(p_cohab, "p_cohab");
    prob(p_know_victim, "p_know_victim");
    prob(p_children, "p_children");
    prob(extra_item_prob, "extra_item_prob");
    double edu = 0.0;
    for (double p : education_probs) {
        prob(p, "education_probs entry");
        edu += p;
    }
    if (std::abs(edu - 1.0) > 1e-9) {
        throw ConfigError("frame config: education_probs must sum to 1");
    }
    for (std::size_t c = 0; c < kNumCells; ++c) {
        prob(prevalence[c], "prevalence");
    }
    for (auto type : kViolenceTypes) {
        if (prevalence[cell_index(type, Window::Last12Months)] > prevalence[cell_index(type, Window::Lifetime)]) {
            throw ConfigError("frame config: 12-month prevalence exceeds lifetime prevalence for " +
                              std::string(to_string(type)));
        }
    }
}

namespace {

double logistic(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

double linear_effect(const FrameGenConfig &cfg, const Covariates &cov) noexcept {
    return cfg.effect_cohab * cov.cohab + cfg.effect_know_victim * cov.know_victim +
           cfg.effect_children * cov.children + cfg.effect_young * (cov.age == AgeGroup::Young) +
           cfg.effect_nonwhite * (cov.race == Race::NonWhite);
}

/// Intercept b with mean_i logistic(b + eta_i) == target; eta summarised as
/// (value, multiplicity) pairs.
double solve_intercept(const std::map<double, long> &etas, long n, double target) {
    auto mean_prob = [&](double b) {
        double s = 0.0;
        for (const auto &[eta, count] : etas) {
            s += static_cast<double>(count) * logistic(b + eta);
        }
        return s / static_cast<double>(n);
    };
    double lo = -40.0;
    double hi = 40.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mean_prob(mid) < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

char *format_id(char *buf, std::size_t size, const char *fmt, int value) {
    std::snprintf(buf, size, fmt, value);
    return buf;
}

} // namespace

SamplingFrame generate_synthetic_frame(const FrameGenConfig &config) {
    config.validate();
    SamplingFrame frame;
    frame.synthetic = true;
    const rng::Stream root(config.seed);
    char buf[32];

    for (int c = 0; c < config.n_cities; ++c) {
        const rng::Stream city_stream = root.substream(static_cast<std::uint64_t>(c + 1));
        City city;
        city.id = format_id(buf, sizeof buf, "C%02d", c + 1);

        std::vector<Neighborhood> neighborhoods;
        for (int n = 0; n < config.neighborhoods_per_city; ++n) {
            rng::Stream nb_stream = city_stream.substream(static_cast<std::uint64_t>(n + 1));
            Neighborhood nb;
            nb.id = city.id + format_id(buf, sizeof buf, "-N%03d", n + 1);
            const long n_tracts = nb_stream.between(config.tracts_min, config.tracts_max);
            for (long t = 0; t < n_tracts; ++t) {
                rng::Stream tract_stream = nb_stream.substream(static_cast<std::uint64_t>(t + 1));
                Tract tract;
                tract.id = nb.id + format_id(buf, sizeof buf, "-T%02d", static_cast<int>(t + 1));
                tract.n_households = tract_stream.between(config.households_min, config.households_max);
                tract.households.reserve(static_cast<std::size_t>(tract.n_households));
                for (long h = 0; h < tract.n_households; ++h) {
                    rng::Stream hh_stream = tract_stream.substream(static_cast<std::uint64_t>(h + 1));
                    Household hh;
                    hh.id = tract.id + format_id(buf, sizeof buf, "-H%04d", static_cast<int>(h + 1));
                    hh.n_eligible_women = static_cast<int>(hh_stream.categorical(config.eligible_women_probs));
                    hh.traits.size = hh.n_eligible_women + static_cast<int>(hh_stream.between(0, 3));
                    hh.traits.size = std::max(hh.traits.size, 1);
                    hh.traits.head_age = static_cast<int>(hh_stream.between(20, 75));
                    hh.traits.head_education = static_cast<int>(hh_stream.categorical(config.education_probs));
                    hh.traits.head_female = hh_stream.bernoulli(0.4);
                    for (int w = 0; w < hh.n_eligible_women; ++w) {
                        rng::Stream ws = hh_stream.substream(static_cast<std::uint64_t>(w + 1));
                        Woman woman;
                        woman.id = hh.id + "-W" + std::to_string(w + 1);
                        auto &cov = woman.covariates;
                        cov.age = ws.bernoulli(config.p_young) ? AgeGroup::Young : AgeGroup::Adult;
                        cov.race = ws.bernoulli(config.p_white) ? Race::White : Race::NonWhite;
                        cov.education = static_cast<Education>(ws.categorical(config.education_probs));
                        cov.cohab = ws.bernoulli(config.p_cohab);
                        cov.know_victim = ws.bernoulli(config.p_know_victim);
                        cov.children = ws.bernoulli(config.p_children);
                        hh.women.push_back(std::move(woman));
                    }
                    tract.households.push_back(std::move(hh));
                }
                nb.n_households += tract.n_households;
                nb.tracts.push_back(std::move(tract));
            }
            neighborhoods.push_back(std::move(nb));
        }

        std::vector<std::pair<std::string, long>> sizes;
        for (const auto &nb : neighborhoods) {
            sizes.emplace_back(nb.id, nb.n_households);
        }
        const auto groups = build_strata(sizes);
        for (std::size_t k = 0; k < groups.size(); ++k) {
            Stratum stratum;
            stratum.id = std::to_string(k + 1);
            for (std::size_t idx : groups[k]) {
                stratum.neighborhoods.push_back(std::move(neighborhoods[idx]));
            }
            city.strata.push_back(std::move(stratum));
        }

        // Outcome intercepts: calibrate expected prevalence to the targets.
        std::map<double, long> etas;
        long n_women = 0;
        for (const auto &stratum : city.strata) {
            for (const auto &nb : stratum.neighborhoods) {
                for (const auto &tract : nb.tracts) {
                    for (const auto &hh : tract.households) {
                        for (const auto &woman : hh.women) {
                            ++etas[linear_effect(config, woman.covariates)];
                            ++n_women;
                        }
                    }
                }
            }
        }
        std::array<double, kNumCells> intercept{};
        for (std::size_t cell = 0; cell < kNumCells; ++cell) {
            const double target = config.prevalence[cell];
            if (n_women > 0 && target > 0.0 && target < 1.0) {
                intercept[cell] = solve_intercept(etas, n_women, target);
            }
        }

        auto cell_prob = [&](std::size_t cell, double eta) {
            const double target = config.prevalence[cell];
            if (target <= 0.0) {
                return 0.0;
            }
            if (target >= 1.0) {
                return 1.0;
            }
            return logistic(intercept[cell] + eta);
        };

        CityTruth truth;
        std::array<long, kNumCells> victims{};
        for (std::size_t k = 0; k < city.strata.size(); ++k) {
            for (auto &nb : city.strata[k].neighborhoods) {
                for (auto &tract : nb.tracts) {
                    for (auto &hh : tract.households) {
                        for (std::size_t w = 0; w < hh.women.size(); ++w) {
                            Woman &woman = hh.women[w];
                            rng::Stream os = city_stream.substream(rng::fnv1a(woman.id)).substream("outcomes");
                            const double eta = linear_effect(config, woman.covariates);
                            for (auto type : kViolenceTypes) {
                                const std::size_t life = cell_index(type, Window::Lifetime);
                                const std::size_t recent = cell_index(type, Window::Last12Months);
                                const int n_items = kItemsPerType[static_cast<std::size_t>(type)];
                                const double u = os.uniform();
                                std::uint16_t life_mask = 0;
                                std::uint16_t recent_mask = 0;
                                if (u < cell_prob(life, eta)) {
                                    const int forced = static_cast<int>(os.below(static_cast<std::size_t>(n_items)));
                                    life_mask = static_cast<std::uint16_t>(1u << forced);
                                    for (int i = 0; i < n_items; ++i) {
                                        if (i != forced && os.bernoulli(config.extra_item_prob)) {
                                            life_mask |= static_cast<std::uint16_t>(1u << i);
                                        }
                                    }
                                    if (u < cell_prob(recent, eta)) {
                                        std::vector<int> yes;
                                        for (int i = 0; i < n_items; ++i) {
                                            if (life_mask & (1u << i)) {
                                                yes.push_back(i);
                                            }
                                        }
                                        const int pick = yes[os.below(yes.size())];
                                        recent_mask = static_cast<std::uint16_t>(1u << pick);
                                        for (int i : yes) {
                                            if (i != pick && os.bernoulli(0.5)) {
                                                recent_mask |= static_cast<std::uint16_t>(1u << i);
                                            }
                                        }
                                    }
                                }
                                woman.latent_items[life] = life_mask;
                                woman.latent_items[recent] = recent_mask;
                            }
                            for (std::size_t cell = 0; cell < kNumCells; ++cell) {
                                victims[cell] += woman.victim(cell) ? 1 : 0;
                            }
                            const auto &cov = woman.covariates;
                            ++truth.age[static_cast<std::size_t>(cov.age)];
                            ++truth.race[static_cast<std::size_t>(cov.race)];
                            ++truth.education[static_cast<std::size_t>(cov.education)];
                        }
                    }
                }
            }
        }
        truth.n_women = n_women;
        for (std::size_t cell = 0; cell < kNumCells; ++cell) {
            truth.prevalence[cell] =
                n_women > 0 ? static_cast<double>(victims[cell]) / static_cast<double>(n_women) : 0.0;
        }
        city.truth = truth;
        frame.cities.push_back(std::move(city));
    }
    frame.validate();
    return frame;
}

} // namespace surveyforge::frame
