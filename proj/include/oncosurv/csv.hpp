#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace oncosurv::util {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> column(std::string_view name) const;
    // Throws a data error naming the missing column.
    std::size_t require_column(std::string_view name) const;
};

// RFC 4180-style: quoted fields, embedded commas/quotes/newlines.
CsvTable parse_csv(std::string_view content);
CsvTable read_csv(const std::string& path);

std::string csv_escape(std::string_view field);
void write_csv_row(std::ostream& os, const std::vector<std::string>& fields);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace oncosurv::util
