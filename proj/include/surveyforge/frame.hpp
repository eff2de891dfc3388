#pragma once

#include "surveyforge/items.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace surveyforge::frame {

enum class AgeGroup : std::uint8_t { Young, Adult };
enum class Race : std::uint8_t { White, NonWhite };
enum class Education : std::uint8_t { Elementary, HighSchool, Undergraduate };

std::string_view to_string(AgeGroup v) noexcept;
std::string_view to_string(Race v) noexcept;
std::string_view to_string(Education v) noexcept;

/// Person-level covariates used for raking and for the section-response model.
struct Covariates {
    AgeGroup age = AgeGroup::Adult;
    Race race = Race::NonWhite;
    Education education = Education::Elementary;
    bool cohab = false;
    bool know_victim = false;
    bool children = false;

    bool operator==(const Covariates &) const = default;
};

/// Household-level traits used as counterfactual-probability covariates.
struct HouseholdTraits {
    int size = 1;
    int head_age = 40;
    int head_education = 0; // 0 elementary, 1 high school, 2 undergraduate
    bool head_female = false;

    bool operator==(const HouseholdTraits &) const = default;
};

struct Woman {
    std::string id;
    Covariates covariates;
    /// Latent "yes" masks per outcome cell (synthetic frames only).
    std::array<std::uint16_t, kNumCells> latent_items{};

    bool victim(std::size_t cell) const noexcept { return latent_items[cell] != 0; }
};

struct Household {
    std::string id;
    int n_eligible_women = 0;
    HouseholdTraits traits;
    std::vector<Woman> women; // empty for frames loaded from file
};

struct Tract {
    std::string id;
    long n_households = 0;
    std::vector<Household> households;
};

struct Neighborhood {
    std::string id;
    long n_households = 0;
    std::vector<Tract> tracts;
};

struct Stratum {
    std::string id;
    std::vector<Neighborhood> neighborhoods;

    long n_households() const noexcept;
};

/// Population quantities obtained by enumerating a synthetic city.
struct CityTruth {
    long n_women = 0;
    std::array<double, kNumCells> prevalence{};
    std::array<long, 2> age{};
    std::array<long, 2> race{};
    std::array<long, 3> education{};
};

struct City {
    std::string id;
    std::vector<Stratum> strata;
    CityTruth truth; // filled for synthetic frames
};

/// city -> stratum -> neighborhood (PSU) -> tract (SSU) -> household (TSU) -> woman (QSU).
/// Immutable once built; safe to share read-only.
struct SamplingFrame {
    std::vector<City> cities;
    bool synthetic = false;

    /// Throws IntegrityError when totals or ids are inconsistent.
    void validate() const;
};

/// Same hierarchy, ids, household counts and eligibility counts.
bool structurally_equal(const SamplingFrame &a, const SamplingFrame &b);

/// Frame CSV: one row per household with columns
/// city,stratum,neighborhood,tract,household,n_households_neighborhood,n_households_tract,n_eligible_women.
/// Rows sharing a unit must agree on its totals; a tract total must equal its
/// household row count. When every stratum cell of a city is blank, strata
/// are formed with build_strata.
SamplingFrame load_frame(const std::string &path);
SamplingFrame read_frame(std::istream &in, const std::string &source_name);
void write_frame(std::ostream &out, const SamplingFrame &frame);

/// Partitions neighborhoods into four household-count strata. Neighborhoods
/// are ranked by decreasing household count (ties by ascending id); a
/// neighborhood that would push the stratum under formation past 25% of all
/// households opens the next stratum. No neighborhood is split and the last
/// stratum takes the remainder. Returns input indices per stratum.
std::array<std::vector<std::size_t>, 4>
build_strata(const std::vector<std::pair<std::string, long>> &neighborhoods);

/// Parameters of the synthetic population generator.
struct FrameGenConfig {
    std::uint64_t seed = 42;
    int n_cities = 1;
    int neighborhoods_per_city = 80;
    int tracts_min = 4;
    int tracts_max = 12;
    int households_min = 150;
    int households_max = 350;
    /// P(E = k) for k = 0, 1, 2, ... eligible women per household.
    std::vector<double> eligible_women_probs = {0.2, 0.55, 0.18, 0.07};

    double p_young = 0.45;
    double p_white = 0.3;
    std::array<double, 3> education_probs = {0.45, 0.4, 0.15};
    double p_cohab = 0.55;
    double p_know_victim = 0.3;
    double p_children = 0.6;

    /// Target population prevalence for each outcome cell (type-major, lifetime first).
    std::array<double, kNumCells> prevalence = {0.30, 0.14, 0.19, 0.06, 0.08, 0.026};
    /// Log-odds effects on every outcome.
    double effect_cohab = 0.3;
    double effect_know_victim = 0.8;
    double effect_children = 0.4;
    double effect_young = 0.2;
    double effect_nonwhite = 0.1;
    /// Chance that each non-forced item is also "yes" for a victim.
    double extra_item_prob = 0.3;

    /// Throws ConfigError on degenerate parameters.
    void validate() const;
};

/// Deterministic in the seed; every household and woman draws from its own
/// substream so the result does not depend on generation order. Outcome
/// intercepts are solved so the expected population prevalence of each city
/// equals the configured target; CityTruth holds the enumerated values.
SamplingFrame generate_synthetic_frame(const FrameGenConfig &config);

} // namespace surveyforge::frame
