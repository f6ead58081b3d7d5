#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace lpma::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<int> line_numbers;  // 1-based source line of each row

    int column(const std::string& name) const;  // -1 when absent
};

// Comma-separated, optional double-quoted fields, no embedded newlines.
Table read(const std::filesystem::path& path);
Table parse(std::istream& in);

std::vector<std::string> split_line(const std::string& line);

// Shortest round-trip decimal representation; empty string for NaN.
std::string format_number(double value);

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}
    void row(const std::vector<std::string>& fields);

private:
    std::ostream& out_;
};

}  // namespace lpma::csv
