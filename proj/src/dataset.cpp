#include "oncosurv/dataset.hpp"

#include "oncosurv/errors.hpp"
#include "oncosurv/util.hpp"

namespace oncosurv::data {

std::uint64_t feature_schema_hash(const std::vector<std::string>& names) {
    std::uint64_t h = util::fnv1a64("feature-schema.v1");
    for (const auto& name : names) {
        h = util::fnv1a64(name, h);
        h = util::fnv1a64("\n", h);
    }
    return h;
}

std::uint64_t Dataset::schema_hash() const { return feature_schema_hash(feature_names); }

std::vector<double> Dataset::row(std::size_t r) const {
    std::vector<double> out(columns.size());
    for (std::size_t f = 0; f < columns.size(); ++f) out[f] = columns[f][r];
    return out;
}

void Dataset::validate() const {
    if (columns.size() != feature_names.size())
        throw Error(ErrorKind::internal, "dataset has " + std::to_string(columns.size()) + " columns for " +
                                             std::to_string(feature_names.size()) + " feature names");
    for (std::size_t f = 0; f < columns.size(); ++f) {
        if (columns[f].size() != row_ids.size())
            throw Error(ErrorKind::internal,
                        "dataset column '" + feature_names[f] + "' is ragged: " + std::to_string(columns[f].size()) +
                            " values for " + std::to_string(row_ids.size()) + " rows");
    }
}

}  // namespace oncosurv::data
