#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tailadrf {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Index of a header column, -1 when absent.
    int column(const std::string& name) const;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

// RFC-4180-style quoting: fields containing commas, quotes or newlines are
// quoted, embedded quotes doubled.
std::string csv_escape(const std::string& field);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

std::string format_double(double v);       // round-trip precision
std::string format_metric(double v);       // compact, "nan" for undefined

}  // namespace tailadrf
