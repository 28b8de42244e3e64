#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace hjb {

/// Locale-independent formatting with 17 significant digits (round-trips).
std::string format_double(double v);

/// Parses a number written by format_double (also accepts nan/inf).
double parse_double(const std::string& s);

/// Comma-separated table with a header row; cells are preformatted text.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<double> values);
    void write(const std::filesystem::path& path) const;
    static CsvTable read(const std::filesystem::path& path);

    std::size_t column(const std::string& name) const;
    double value(std::size_t row, std::size_t col) const;
};

}  // namespace hjb
