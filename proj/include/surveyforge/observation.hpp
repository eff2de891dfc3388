#pragma once

#include "surveyforge/frame.hpp"
#include "surveyforge/items.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace surveyforge {

/// One interviewed woman.
struct Observation {
    std::string city;
    std::string stratum;
    std::string neighborhood;
    std::string tract;
    std::string household;
    std::string woman_id;
    int n_eligible = 1;
    bool answered_violence = true;
    frame::Covariates covariates;
    ItemAnswers items;

    // Optional household-level fields (counterfactual covariates).
    frame::HouseholdTraits traits;
    long tract_households = 0;
};

/// Label of a categorical attribute by column name: age_group, race,
/// education, cohab, know_victim or children. Throws SchemaError otherwise.
std::string attribute_label(const Observation &obs, const std::string &name);

/// Numeric value of a counterfactual covariate: tract_households,
/// household_size, head_age, head_education, head_female, cohab,
/// know_victim or children. Throws SchemaError otherwise.
double covariate_value(const Observation &obs, const std::string &name);

/// Observation CSV: city,stratum,neighborhood,tract,household,woman_id,
/// n_eligible,answered_violence,cohab,know_victim,children,age_group,race,
/// education, then one 0/1 column per item (blank = not answered), then the
/// optional household columns tract_households,household_size,head_age,
/// head_education,head_female.
std::vector<Observation> load_observations(const std::string &path);
std::vector<Observation> read_observations(std::istream &in, const std::string &source_name);
void write_observations(std::ostream &out, const std::vector<Observation> &observations);

/// One visited census tract: the number of households knocked on.
struct TractVisit {
    std::string city;
    std::string stratum;
    std::string neighborhood;
    std::string tract;
    long n_visited_households = 0;
};

/// Visit log CSV: city,stratum,neighborhood,tract,n_visited_households.
std::vector<TractVisit> load_visits(const std::string &path);
std::vector<TractVisit> read_visits(std::istream &in, const std::string &source_name);
void write_visits(std::ostream &out, const std::vector<TractVisit> &visits);

} // namespace surveyforge
