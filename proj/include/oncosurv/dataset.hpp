#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace oncosurv::data {

struct SurvivalRecord {
    std::string patient_id;
    long time_days = 1;
    bool event = false;  // false = censored at time_days
};

// Column-major numeric feature matrix with row-aligned patient ids.
struct Dataset {
    std::vector<std::string> feature_names;
    std::vector<std::string> row_ids;
    std::vector<std::vector<double>> columns;  // columns[feature][row]

    std::size_t n_rows() const { return row_ids.size(); }
    std::size_t n_features() const { return feature_names.size(); }
    double at(std::size_t row, std::size_t feature) const { return columns[feature][row]; }
    std::vector<double> row(std::size_t r) const;

    std::uint64_t schema_hash() const;  // over the ordered feature names
    void validate() const;              // throws on ragged columns
};

std::uint64_t feature_schema_hash(const std::vector<std::string>& names);

}  // namespace oncosurv::data
