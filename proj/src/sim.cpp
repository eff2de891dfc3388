#include "surveyforge/sim.hpp"

#include "surveyforge/adjust.hpp"
#include "surveyforge/csv.hpp"
#include "surveyforge/error.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>
#include <unordered_set>

namespace surveyforge::sim {

std::uint64_t household_key(std::size_t city, std::size_t stratum, std::size_t nb, std::size_t tract,
                            std::size_t household) noexcept {
    return (static_cast<std::uint64_t>(city) << 56) ^ (static_cast<std::uint64_t>(stratum) << 52) ^
           (static_cast<std::uint64_t>(nb) << 36) ^ (static_cast<std::uint64_t>(tract) << 24) ^
           static_cast<std::uint64_t>(household);
}

std::vector<std::size_t> systematic_pps(const std::vector<double> &pi, double u) {
    std::vector<std::size_t> selected;
    double cum = 0.0;
    double point = u;
    for (std::size_t i = 0; i < pi.size(); ++i) {
        const double next = cum + pi[i];
        if (point >= cum && point < next) {
            selected.push_back(i);
            point += 1.0;
        }
        cum = next;
    }
    // A point lost to rounding at the very end belongs to the last positive unit.
    const double target = std::round(cum);
    if (static_cast<double>(selected.size()) < target && point < target) {
        for (std::size_t i = pi.size(); i-- > 0;) {
            if (pi[i] > 0.0) {
                if (selected.empty() || selected.back() != i) {
                    selected.push_back(i);
                }
                break;
            }
        }
    }
    return selected;
}

long effective_visits(const DesignConfig &config, long tract_households) noexcept {
    long m = std::max<long>(config.households_per_tract, config.min_questionnaires);
    m = std::min<long>(m, config.max_questionnaires);
    return std::min(m, tract_households);
}

double attrition_rate(const std::vector<AttritionRow> &rows) {
    long a = 0;
    long d = 0;
    for (const auto &r : rows) {
        a += r.a;
        d += r.d();
    }
    if (a == 0) {
        throw PreconditionError("attrition_rate: empty wave-one sample");
    }
    return static_cast<double>(d) / static_cast<double>(a);
}

namespace {

std::vector<std::size_t> visit_order(long n_households, bool skip_rule, rng::Stream &stream) {
    std::vector<std::size_t> order(static_cast<std::size_t>(n_households));
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (!skip_rule) {
        rng::shuffle(order, stream);
        return order;
    }
    const auto n = static_cast<std::size_t>(n_households);
    const std::size_t start = stream.below(n);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const std::size_t da = (a + n - start) % n;
        const std::size_t db = (b + n - start) % n;
        if (da % 5 != db % 5) {
            return da % 5 < db % 5;
        }
        return da < db;
    });
    return order;
}

Observation make_observation(const frame::City &city, const frame::Stratum &stratum, const frame::Neighborhood &nb,
                             const frame::Tract &tract, const frame::Household &hh, const frame::Woman &woman,
                             bool answered) {
    Observation o;
    o.city = city.id;
    o.stratum = stratum.id;
    o.neighborhood = nb.id;
    o.tract = tract.id;
    o.household = hh.id;
    o.woman_id = woman.id;
    o.n_eligible = hh.n_eligible_women;
    o.answered_violence = answered;
    o.covariates = woman.covariates;
    o.items = answered ? ItemAnswers::complete(woman.latent_items) : ItemAnswers::missing();
    o.traits = hh.traits;
    o.tract_households = tract.n_households;
    return o;
}

std::vector<double> tract_probabilities(const frame::Neighborhood &nb, int tracts_per_psu,
                                        std::vector<bool> *certain) {
    std::vector<long> sizes;
    for (const auto &t : nb.tracts) {
        sizes.push_back(t.n_households);
    }
    const long s = std::min<long>(tracts_per_psu, static_cast<long>(sizes.size()));
    return design::pps_inclusion_probabilities(sizes, s, certain);
}

} // namespace

Wave1Sample draw_wave1(const frame::SamplingFrame &frame, const ScenarioConfig &config, rng::Stream &stream) {
    const DesignConfig &dc = config.design;
    dc.validate();
    if (!frame.synthetic) {
        throw PreconditionError("draw_wave1 needs a synthetic frame with resident women");
    }
    Wave1Sample sample;
    for (std::size_t c = 0; c < frame.cities.size(); ++c) {
        const auto &city = frame.cities[c];
        const rng::Stream city_stream = stream.substream(static_cast<std::uint64_t>(c + 1));
        for (std::size_t k = 0; k < city.strata.size(); ++k) {
            const auto &stratum = city.strata[k];
            rng::Stream ks = city_stream.substream(static_cast<std::uint64_t>(k + 1));
            const long n = dc.psus_per_stratum;
            if (static_cast<std::size_t>(n) > stratum.neighborhoods.size()) {
                throw ConfigError("city " + city.id + " stratum " + stratum.id + " has only " +
                                  std::to_string(stratum.neighborhoods.size()) + " neighborhoods for " +
                                  std::to_string(n) + " PSU draws");
            }
            std::vector<long> sizes;
            for (const auto &nb : stratum.neighborhoods) {
                sizes.push_back(nb.n_households);
            }
            struct Hit {
                std::size_t nb;
                double p;
            };
            std::vector<Hit> hits;
            if (dc.psu_method == PsuMethod::Systematic) {
                std::vector<bool> certain;
                const auto pi = design::pps_inclusion_probabilities(sizes, n, &certain);
                for (std::size_t i : systematic_pps(pi, ks.uniform())) {
                    hits.push_back({i, pi[i]});
                    if (certain[i]) {
                        sample.warnings.push_back("neighborhood " + stratum.neighborhoods[i].id +
                                                  " taken with certainty");
                    }
                }
            } else {
                const long total = stratum.n_households();
                for (std::size_t i = 0; i < sizes.size(); ++i) {
                    if (n * sizes[i] > total) {
                        throw ConfigError("neighborhood " + stratum.neighborhoods[i].id +
                                          " would be a certainty unit; multinomial draws need n x size <= total");
                    }
                }
                std::vector<double> dsizes(sizes.begin(), sizes.end());
                for (long d = 0; d < n; ++d) {
                    const std::size_t i = ks.categorical(dsizes);
                    hits.push_back({i, static_cast<double>(n) * dsizes[i] / static_cast<double>(total)});
                }
            }

            for (std::size_t h = 0; h < hits.size(); ++h) {
                const auto &nb = stratum.neighborhoods[hits[h].nb];
                rng::Stream ps = ks.substream(static_cast<std::uint64_t>(1000 + h));
                const std::string label =
                    dc.psu_method == PsuMethod::Systematic ? nb.id : nb.id + "#" + std::to_string(h + 1);
                std::vector<bool> certain;
                const auto tpi = tract_probabilities(nb, dc.tracts_per_psu, &certain);
                for (std::size_t t : systematic_pps(tpi, ps.uniform())) {
                    const auto &tract = nb.tracts[t];
                    rng::Stream ts = ps.substream(static_cast<std::uint64_t>(t + 1));
                    const auto order = visit_order(tract.n_households, dc.skip_rule, ts);
                    long visited = 0;
                    long questionnaires = 0;
                    const std::size_t first = sample.women.size();
                    for (std::size_t pos : order) {
                        if (questionnaires >= dc.max_questionnaires) {
                            break;
                        }
                        if (visited >= dc.households_per_tract && questionnaires >= dc.min_questionnaires) {
                            break;
                        }
                        ++visited;
                        sample.visited_households.push_back(household_key(c, k, hits[h].nb, t, pos));
                        const auto &hh = tract.households[pos];
                        if (hh.n_eligible_women < 1 || !ts.bernoulli(dc.household_response)) {
                            continue;
                        }
                        ++questionnaires;
                        const std::size_t w = ts.below(static_cast<std::size_t>(hh.n_eligible_women));
                        const auto &woman = hh.women[w];
                        const bool answered = ts.bernoulli(config.section.probability(woman.covariates));
                        SampledWoman s;
                        s.obs = make_observation(city, stratum, nb, tract, hh, woman, answered);
                        if (dc.psu_method == PsuMethod::Multinomial) {
                            s.obs.woman_id += "#" + std::to_string(h + 1);
                        }
                        s.city = c;
                        s.stratum = k;
                        s.neighborhood = hits[h].nb;
                        s.tract = t;
                        s.household = pos;
                        s.woman = w;
                        s.psu_label = label;
                        sample.women.push_back(std::move(s));
                    }
                    sample.visits.push_back({city.id, stratum.id, nb.id, tract.id, visited});
                    for (std::size_t i = first; i < sample.women.size(); ++i) {
                        auto &p = sample.women[i].probs;
                        p.p_psu = hits[h].p;
                        p.p_ssu_given_psu = tpi[t];
                        p.p_household_given_ssu = design::household_prob(visited, tract.n_households);
                        p.p_nonresponse = design::nonresponse_prob(questionnaires, visited);
                        p.p_woman_given_household = design::woman_prob(sample.women[i].obs.n_eligible);
                        p.p_overall = design::overall_prob(p);
                    }
                }
            }
        }
    }
    return sample;
}

Wave1Sample draw_wave1(const frame::SamplingFrame &frame, const ScenarioConfig &config, std::uint64_t seed) {
    rng::Stream stream(seed);
    return draw_wave1(frame, config, stream);
}

Wave2Sample apply_attrition_and_refresh(const Wave1Sample &wave1, const frame::SamplingFrame &frame,
                                        const ScenarioConfig &config, rng::Stream &stream) {
    const AttritionConfig &ac = config.attrition;
    const DesignConfig &dc = config.design;
    Wave2Sample out;
    out.accounting.resize(frame.cities.size());
    for (std::size_t c = 0; c < frame.cities.size(); ++c) {
        out.accounting[c].label = frame.cities[c].id;
    }

    struct Pending {
        const SampledWoman *origin = nullptr;
        long count = 0;
    };
    std::map<std::string, Pending> pending; // PSU label -> attrited without replacement

    for (std::size_t i = 0; i < wave1.women.size(); ++i) {
        const SampledWoman &sw = wave1.women[i];
        AttritionRow &row = out.accounting[sw.city];
        ++row.a;
        rng::Stream ws = stream.substream(static_cast<std::uint64_t>(i + 1));
        if (!ws.bernoulli(ac.probability(sw.obs.covariates))) {
            out.members.push_back({sw, pool::Source::NAT, false, sw.probs.p_overall});
            continue;
        }
        const auto &city = frame.cities[sw.city];
        const auto &stratum = city.strata[sw.stratum];
        const auto &nb = stratum.neighborhoods[sw.neighborhood];
        const auto &tract = nb.tracts[sw.tract];
        const auto &hh = tract.households[sw.household];
        const int e = hh.n_eligible_women;
        if (ac.substitution && e >= 2 && ws.bernoulli(ac.substitute_accept)) {
            std::size_t w = ws.below(static_cast<std::size_t>(e - 1));
            if (w >= sw.woman) {
                ++w;
            }
            const auto &woman = hh.women[w];
            const bool answered = ws.bernoulli(config.section.probability(woman.covariates));
            SampledWoman s = sw;
            s.obs = make_observation(city, stratum, nb, tract, hh, woman, answered);
            s.obs.n_eligible = e - 1;
            s.woman = w;
            s.probs.p_woman_given_household = design::woman_prob(e - 1);
            s.probs.p_overall = design::overall_prob(s.probs);
            out.members.push_back({s, pool::Source::RE, true, s.probs.p_overall});
            ++row.c;
            continue;
        }
        ++row.b;
        auto &p = pending[sw.psu_label];
        p.origin = &sw;
        ++p.count;
    }

    if (!ac.refresh) {
        return out;
    }
    std::unordered_set<std::uint64_t> visited(wave1.visited_households.begin(), wave1.visited_households.end());
    const rng::Stream refresh_root = stream.substream("refresh");
    for (const auto &[label, p] : pending) {
        const SampledWoman &origin = *p.origin;
        const auto &city = frame.cities[origin.city];
        const auto &stratum = city.strata[origin.stratum];
        const auto &nb = stratum.neighborhoods[origin.neighborhood];
        rng::Stream ps = refresh_root.substream(label);
        const auto tpi = tract_probabilities(nb, dc.tracts_per_psu, nullptr);
        long needed = p.count;
        for (std::size_t t : systematic_pps(tpi, ps.uniform())) {
            if (needed == 0) {
                break;
            }
            const auto &tract = nb.tracts[t];
            rng::Stream ts = ps.substream(static_cast<std::uint64_t>(t + 1));
            const auto order = visit_order(tract.n_households, false, ts);
            long nv = 0;
            long nq = 0;
            const std::size_t first = out.members.size();
            for (std::size_t pos : order) {
                if (needed == 0) {
                    break;
                }
                const auto key = household_key(origin.city, origin.stratum, origin.neighborhood, t, pos);
                if (!visited.insert(key).second) {
                    continue;
                }
                ++nv;
                const auto &hh = tract.households[pos];
                if (hh.n_eligible_women < 1 || !ts.bernoulli(dc.household_response)) {
                    continue;
                }
                ++nq;
                --needed;
                const std::size_t w = ts.below(static_cast<std::size_t>(hh.n_eligible_women));
                const auto &woman = hh.women[w];
                const bool answered = ts.bernoulli(config.section.probability(woman.covariates));
                SampledWoman s;
                s.obs = make_observation(city, stratum, nb, tract, hh, woman, answered);
                s.city = origin.city;
                s.stratum = origin.stratum;
                s.neighborhood = origin.neighborhood;
                s.tract = t;
                s.household = pos;
                s.woman = w;
                s.psu_label = origin.psu_label;
                out.members.push_back({s, pool::Source::RE, false, 0.0});
                ++out.accounting[origin.city].f;
            }
            for (std::size_t i = first; i < out.members.size(); ++i) {
                auto &m = out.members[i];
                auto &pr = m.woman.probs;
                pr.p_psu = origin.probs.p_psu;
                pr.p_ssu_given_psu = tpi[t];
                pr.p_household_given_ssu = design::household_prob(nv, tract.n_households);
                pr.p_nonresponse = design::nonresponse_prob(nq, nv);
                pr.p_woman_given_household = design::woman_prob(m.woman.obs.n_eligible);
                pr.p_overall = design::overall_prob(pr);
                m.p_own = pr.p_overall;
            }
        }
    }
    return out;
}

Wave2Sample apply_attrition_and_refresh(const Wave1Sample &wave1, const frame::SamplingFrame &frame,
                                        const ScenarioConfig &config, std::uint64_t seed) {
    rng::Stream stream(seed);
    return apply_attrition_and_refresh(wave1, frame, config, stream);
}

adjust::RakingSpec truth_raking_spec(const frame::CityTruth &truth) {
    adjust::RakingSpec spec;
    spec.variables.push_back({"age_group",
                              {{"Young", static_cast<double>(truth.age[0])},
                               {"Adult", static_cast<double>(truth.age[1])}}});
    spec.variables.push_back({"race",
                              {{"White", static_cast<double>(truth.race[0])},
                               {"NonWhite", static_cast<double>(truth.race[1])}}});
    spec.variables.push_back({"education",
                              {{"Elementary", static_cast<double>(truth.education[0])},
                               {"HighSchool", static_cast<double>(truth.education[1])},
                               {"Undergraduate", static_cast<double>(truth.education[2])}}});
    return spec;
}

namespace {

pool::CovariateTable covariate_table(const std::vector<const Observation *> &obs,
                                     const std::vector<std::string> &names) {
    pool::CovariateTable t;
    t.names = names;
    t.values.resize(static_cast<Eigen::Index>(obs.size()), static_cast<Eigen::Index>(names.size()));
    for (std::size_t i = 0; i < obs.size(); ++i) {
        for (std::size_t j = 0; j < names.size(); ++j) {
            t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = covariate_value(*obs[i], names[j]);
        }
    }
    return t;
}

/// Counterfactual probabilities for `target` from a fit on `source`; falls
/// back to fewer covariates when the source is too small or collinear.
std::vector<double> counterfactual_or_fallback(const std::vector<double> &source_p,
                                               const std::vector<const Observation *> &source,
                                               const std::vector<const Observation *> &target,
                                               const std::vector<std::string> &covariates,
                                               std::vector<std::string> &warnings) {
    if (target.empty()) {
        return {};
    }
    if (source.empty()) {
        return std::vector<double>(target.size(), 0.0);
    }
    std::vector<std::string> names = covariates;
    if (source.size() > names.size() + 1) {
        try {
            return pool::fit_counterfactual(source_p, covariate_table(source, names), covariate_table(target, names));
        } catch (const RankError &e) {
            warnings.push_back(std::string("counterfactual fit reduced to an intercept: ") + e.what());
        }
    } else {
        warnings.push_back("counterfactual fit reduced to an intercept: too few source members");
    }
    double mean_logit = 0.0;
    for (double p : source_p) {
        const double q = std::clamp(p, pool::kProbClip, 1.0 - pool::kProbClip);
        mean_logit += std::log(q / (1.0 - q));
    }
    mean_logit /= static_cast<double>(source_p.size());
    return std::vector<double>(target.size(), 1.0 / (1.0 + std::exp(-mean_logit)));
}

double median(std::vector<double> v) {
    if (v.empty()) {
        return std::nan("");
    }
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

ReplicateResult run_replicate(const frame::SamplingFrame &frame, const ScenarioConfig &config, int replicate) {
    ReplicateResult result;
    result.replicate = replicate;
    const rng::Stream root = rng::Stream(config.seed).substream(static_cast<std::uint64_t>(replicate) + 1);
    rng::Stream s1 = root.substream("wave1");
    Wave1Sample wave1 = draw_wave1(frame, config, s1);
    result.warnings = wave1.warnings;

    struct Unit {
        const SampledWoman *woman;
        double weight;
    };
    std::vector<std::vector<Unit>> by_city(frame.cities.size());
    Wave2Sample wave2;
    if (config.attrition.enabled) {
        rng::Stream s2 = root.substream("wave2");
        wave2 = apply_attrition_and_refresh(wave1, frame, config, s2);
        result.accounting = wave2.accounting;
        for (std::size_t c = 0; c < frame.cities.size(); ++c) {
            std::vector<std::size_t> nat;
            std::vector<std::size_t> re;
            for (std::size_t i = 0; i < wave2.members.size(); ++i) {
                if (wave2.members[i].woman.city == c) {
                    (wave2.members[i].source == pool::Source::NAT ? nat : re).push_back(i);
                }
            }
            auto collect = [&](const std::vector<std::size_t> &idx, std::vector<double> &p) {
                std::vector<const Observation *> obs;
                for (std::size_t i : idx) {
                    obs.push_back(&wave2.members[i].woman.obs);
                    p.push_back(wave2.members[i].p_own);
                }
                return obs;
            };
            std::vector<double> p_nat;
            std::vector<double> p_re;
            const auto obs_nat = collect(nat, p_nat);
            const auto obs_re = collect(re, p_re);
            const auto hat_re_for_nat =
                counterfactual_or_fallback(p_re, obs_re, obs_nat, config.attrition.covariates, result.warnings);
            const auto hat_nat_for_re =
                counterfactual_or_fallback(p_nat, obs_nat, obs_re, config.attrition.covariates, result.warnings);

            std::vector<pool::PooledSampleMember> members;
            std::vector<pool::OverlapRecord> records;
            std::vector<std::size_t> order;
            for (std::size_t k = 0; k < nat.size(); ++k) {
                const auto &m = wave2.members[nat[k]];
                members.push_back({m.woman.obs.woman_id, m.woman.obs.household, pool::Source::NAT, m.p_own,
                                   hat_re_for_nat[k], 0.0, 0.0});
                order.push_back(nat[k]);
            }
            for (std::size_t k = 0; k < re.size(); ++k) {
                const auto &m = wave2.members[re[k]];
                members.push_back({m.woman.obs.woman_id, m.woman.obs.household, pool::Source::RE, m.p_own,
                                   hat_nat_for_re[k], 0.0, 0.0});
                order.push_back(re[k]);
            }
            for (std::size_t k = 0; k < members.size(); ++k) {
                const auto &m = wave2.members[order[k]];
                records.push_back({m.woman.obs.household, m.source, m.in_household});
            }
            if (members.empty()) {
                continue;
            }
            const double overlap = pool::estimate_overlap(records);
            const auto w = pool::pooled_weights(members, overlap, config.attrition.overlap_scale);
            for (std::size_t k = 0; k < members.size(); ++k) {
                by_city[c].push_back({&wave2.members[order[k]].woman, w.values[k]});
            }
        }
    } else {
        for (const auto &sw : wave1.women) {
            by_city[sw.city].push_back({&sw, design::base_weight(sw.probs.p_overall)});
        }
    }

    for (std::size_t c = 0; c < frame.cities.size(); ++c) {
        const auto &units = by_city[c];
        const auto &truth = frame.cities[c].truth;
        std::vector<double> weights;
        std::vector<const SampledWoman *> women;
        for (const auto &u : units) {
            weights.push_back(u.weight);
            women.push_back(u.woman);
        }
        std::vector<bool> answered;
        for (const auto *w : women) {
            answered.push_back(w->obs.answered_violence);
        }

        std::vector<std::size_t> respondents;
        std::vector<double> analysis;
        try {
            if (women.size() < 3) {
                throw PreconditionError("too few sampled women in city " + frame.cities[c].id);
            }
            auto design_w = adjust::WeightVector::make(weights);
            if (config.weighting != WeightingMode::Base) {
                const auto spec = truth_raking_spec(truth);
                std::vector<std::vector<std::string>> labels(spec.variables.size());
                for (std::size_t v = 0; v < spec.variables.size(); ++v) {
                    for (const auto *w : women) {
                        labels[v].push_back(attribute_label(w->obs, spec.variables[v].name));
                    }
                }
                design_w = adjust::final_design_weights(design_w, spec, adjust::code_categories(spec, labels));
            }
            if (config.weighting == WeightingMode::Section) {
                Eigen::MatrixXd cov(static_cast<Eigen::Index>(women.size()), 3);
                for (std::size_t i = 0; i < women.size(); ++i) {
                    const auto &cv = women[i]->obs.covariates;
                    cov.row(static_cast<Eigen::Index>(i)) << double(cv.cohab), double(cv.know_victim), double(cv.children);
                }
                auto section = adjust::section_nonresponse_weights(design_w, cov, answered);
                for (auto &msg : section.warnings) {
                    result.warnings.push_back(std::move(msg));
                }
                respondents = section.respondents;
                analysis = section.weights.values;
            } else {
                for (std::size_t i = 0; i < women.size(); ++i) {
                    if (answered[i]) {
                        respondents.push_back(i);
                        analysis.push_back(design_w.values[i]);
                    }
                }
            }
        } catch (const Error &e) {
            result.warnings.push_back("replicate " + std::to_string(replicate) + " city " + frame.cities[c].id +
                                      ": " + e.what());
            for (std::size_t cell : config.cells) {
                CellResult cr;
                cr.city = c;
                cr.cell = cell;
                cr.truth = truth.prevalence[cell];
                result.cells.push_back(cr);
            }
            continue;
        }

        estimate::SurveyDesign sd;
        for (std::size_t k = 0; k < respondents.size(); ++k) {
            const auto *w = women[respondents[k]];
            sd.strata.push_back(w->obs.stratum);
            sd.psus.push_back(w->psu_label);
            sd.weights.push_back(analysis[k]);
        }
        for (std::size_t cell : config.cells) {
            CellResult cr;
            cr.city = c;
            cr.cell = cell;
            cr.truth = truth.prevalence[cell];
            if (!respondents.empty()) {
                const auto coded_w = estimate::CodedDesign::from(sd);
                auto coded_u = coded_w;
                std::fill(coded_u.weights.begin(), coded_u.weights.end(), 1.0);
                std::vector<signed char> y;
                for (std::size_t r : respondents) {
                    const auto v = estimate::victim_indicator(women[r]->obs.items, cell_type(cell), cell_window(cell));
                    y.push_back(v ? static_cast<signed char>(*v) : static_cast<signed char>(-1));
                }
                try {
                    cr.weighted = estimate::prevalence(coded_w, y, config.ci_method, config.level);
                    cr.unweighted = estimate::prevalence(coded_u, y, config.ci_method, config.level);
                    cr.valid = true;
                    const double t = 100.0 * cr.truth;
                    cr.covered_weighted = cr.weighted.ci_low <= t && t <= cr.weighted.ci_high;
                    cr.covered_unweighted = cr.unweighted.ci_low <= t && t <= cr.unweighted.ci_high;
                    cr.var_ratio = estimate::var_ratio(cr.weighted.variance, cr.unweighted.variance);
                } catch (const PreconditionError &) {
                    cr.valid = false;
                }
            }
            result.cells.push_back(cr);
        }
    }
    return result;
}

bool ReplicationResult::passed() const noexcept {
    return std::all_of(assertions.begin(), assertions.end(), [](const AssertionOutcome &a) { return a.passed; });
}

std::optional<double> ReplicationResult::metric(const std::string &name, const std::string &cell) const {
    if (cell == "all") {
        if (name == "var_ratio_median") {
            return var_ratio_median;
        }
        if (name == "abs_rel_bias_weighted") {
            return mean_abs_rel_bias_weighted;
        }
        if (name == "abs_rel_bias_unweighted") {
            return mean_abs_rel_bias_unweighted;
        }
        if (name == "bias_reduction") {
            return mean_abs_rel_bias_unweighted - mean_abs_rel_bias_weighted;
        }
        return std::nullopt;
    }
    std::string city;
    std::string cell_label = cell;
    if (auto colon = cell.find(':'); colon != std::string::npos) {
        city = cell.substr(0, colon);
        cell_label = cell.substr(colon + 1);
    }
    const std::size_t index = parse_cell_name(cell_label);
    for (const auto &s : cells) {
        if (s.cell != index || (!city.empty() && s.city != city)) {
            continue;
        }
        if (name == "rel_bias_weighted") {
            return s.rel_bias_weighted;
        }
        if (name == "rel_bias_unweighted") {
            return s.rel_bias_unweighted;
        }
        if (name == "abs_rel_bias_weighted") {
            return std::abs(s.rel_bias_weighted);
        }
        if (name == "abs_rel_bias_unweighted") {
            return std::abs(s.rel_bias_unweighted);
        }
        if (name == "bias_reduction") {
            return std::abs(s.rel_bias_unweighted) - std::abs(s.rel_bias_weighted);
        }
        if (name == "coverage_weighted") {
            return s.coverage_weighted;
        }
        if (name == "coverage_unweighted") {
            return s.coverage_unweighted;
        }
        if (name == "var_ratio_median") {
            return s.var_ratio_median;
        }
        if (name == "emp_se_weighted") {
            return s.emp_se_weighted;
        }
        if (name == "mean_se_weighted") {
            return s.mean_se_weighted;
        }
        return std::nullopt;
    }
    return std::nullopt;
}

ReplicationResult run_monte_carlo(const frame::SamplingFrame &frame, const ScenarioConfig &config) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    ReplicationResult result;
    result.scenario = config.name;
    result.replicates.resize(static_cast<std::size_t>(config.replicates));

    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const int r = next.fetch_add(1);
            if (r >= config.replicates) {
                return;
            }
            try {
                result.replicates[static_cast<std::size_t>(r)] = run_replicate(frame, config, r);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next.store(config.replicates);
                return;
            }
        }
    };
    const int n_threads = std::min(config.threads, config.replicates);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) {
            pool.emplace_back(worker);
        }
        for (auto &t : pool) {
            t.join();
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }

    std::vector<double> cell_medians;
    double abs_w = 0.0;
    double abs_u = 0.0;
    for (std::size_t c = 0; c < frame.cities.size(); ++c) {
        for (std::size_t cell : config.cells) {
            CellSummary s;
            s.city = frame.cities[c].id;
            s.cell = cell;
            s.truth = frame.cities[c].truth.prevalence[cell];
            std::vector<double> est;
            std::vector<double> ratios;
            double sum_u = 0.0;
            double sum_se = 0.0;
            long cov_w = 0;
            long cov_u = 0;
            for (const auto &rep : result.replicates) {
                for (const auto &cr : rep.cells) {
                    if (cr.city != c || cr.cell != cell || !cr.valid) {
                        continue;
                    }
                    est.push_back(cr.weighted.prev / 100.0);
                    sum_u += cr.unweighted.prev / 100.0;
                    sum_se += cr.weighted.se / 100.0;
                    cov_w += cr.covered_weighted;
                    cov_u += cr.covered_unweighted;
                    if (cr.var_ratio) {
                        ratios.push_back(*cr.var_ratio);
                    }
                }
            }
            s.replicates = static_cast<long>(est.size());
            if (!est.empty()) {
                const double n = static_cast<double>(est.size());
                s.mean_weighted = std::accumulate(est.begin(), est.end(), 0.0) / n;
                s.mean_unweighted = sum_u / n;
                double ss = 0.0;
                for (double e : est) {
                    ss += (e - s.mean_weighted) * (e - s.mean_weighted);
                }
                s.emp_se_weighted = est.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
                s.mean_se_weighted = sum_se / n;
                s.coverage_weighted = static_cast<double>(cov_w) / n;
                s.coverage_unweighted = static_cast<double>(cov_u) / n;
                if (s.truth > 0.0) {
                    s.rel_bias_weighted = (s.mean_weighted - s.truth) / s.truth;
                    s.rel_bias_unweighted = (s.mean_unweighted - s.truth) / s.truth;
                }
            }
            s.var_ratio_median = median(ratios);
            if (!ratios.empty()) {
                cell_medians.push_back(s.var_ratio_median);
            }
            abs_w += std::abs(s.rel_bias_weighted);
            abs_u += std::abs(s.rel_bias_unweighted);
            result.cells.push_back(s);
        }
    }
    result.var_ratio_median = median(cell_medians);
    if (!result.cells.empty()) {
        result.mean_abs_rel_bias_weighted = abs_w / static_cast<double>(result.cells.size());
        result.mean_abs_rel_bias_unweighted = abs_u / static_cast<double>(result.cells.size());
    }
    for (const auto &a : config.assertions) {
        AssertionOutcome o;
        o.assertion = a;
        const auto v = result.metric(a.metric, a.cell);
        if (v && std::isfinite(*v)) {
            o.value = *v;
            o.passed = (!a.min || *v >= *a.min) && (!a.max || *v <= *a.max);
        } else {
            o.value = std::nan("");
            o.passed = false;
        }
        result.assertions.push_back(o);
    }
    result.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

ReplicationResult run_monte_carlo(const ScenarioConfig &config) {
    config.validate();
    auto frame = frame::generate_synthetic_frame(config.frame);
    return run_monte_carlo(frame, config);
}

void write_replicates_csv(std::ostream &out, const ReplicationResult &result, const frame::SamplingFrame &frame) {
    using csv::format_exact;
    csv::Writer w(out);
    w.row({"scenario", "replicate", "city", "type", "window", "truth", "n", "prev_weighted", "se_weighted",
           "ci_low_weighted", "ci_high_weighted", "prev_unweighted", "se_unweighted", "ci_low_unweighted",
           "ci_high_unweighted", "var_ratio", "covered_weighted", "covered_unweighted"});
    for (const auto &rep : result.replicates) {
        for (const auto &cr : rep.cells) {
            if (!cr.valid) {
                continue;
            }
            w.row({result.scenario, std::to_string(rep.replicate), frame.cities[cr.city].id,
                   std::string(to_string(cell_type(cr.cell))), std::string(to_string(cell_window(cr.cell))),
                   format_exact(100.0 * cr.truth), std::to_string(cr.weighted.n), format_exact(cr.weighted.prev),
                   format_exact(cr.weighted.se), format_exact(cr.weighted.ci_low), format_exact(cr.weighted.ci_high),
                   format_exact(cr.unweighted.prev), format_exact(cr.unweighted.se),
                   format_exact(cr.unweighted.ci_low), format_exact(cr.unweighted.ci_high),
                   cr.var_ratio ? format_exact(*cr.var_ratio) : std::string(),
                   cr.covered_weighted ? "1" : "0", cr.covered_unweighted ? "1" : "0"});
        }
    }
}

void write_summary_csv(std::ostream &out, const ReplicationResult &result) {
    using csv::format_exact;
    csv::Writer w(out);
    w.row({"scenario", "city", "type", "window", "replicates", "truth", "mean_weighted", "mean_unweighted",
           "rel_bias_weighted", "rel_bias_unweighted", "emp_se_weighted", "mean_se_weighted", "coverage_weighted",
           "coverage_unweighted", "var_ratio_median"});
    for (const auto &s : result.cells) {
        w.row({result.scenario, s.city, std::string(to_string(cell_type(s.cell))),
               std::string(to_string(cell_window(s.cell))), std::to_string(s.replicates), format_exact(s.truth),
               format_exact(s.mean_weighted), format_exact(s.mean_unweighted), format_exact(s.rel_bias_weighted),
               format_exact(s.rel_bias_unweighted), format_exact(s.emp_se_weighted), format_exact(s.mean_se_weighted),
               format_exact(s.coverage_weighted), format_exact(s.coverage_unweighted),
               format_exact(s.var_ratio_median)});
    }
    w.row({result.scenario, "all", "", "", std::to_string(result.replicates.size()), "", "", "",
           format_exact(result.mean_abs_rel_bias_weighted), format_exact(result.mean_abs_rel_bias_unweighted), "", "",
           "", "", format_exact(result.var_ratio_median)});
}

} // namespace surveyforge::sim
