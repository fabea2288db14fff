#pragma once

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tpml/errors.hpp"

namespace tpml {

/// Shortest decimal that round-trips a double (17 significant digits).
inline std::string format_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s, const std::string& context) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\r')) ++pos;
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError("CSV: cannot parse number '" + s + "' in " + context);
    }
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline CsvTable read_csv(std::istream& in, const std::string& context) {
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw DataError("CSV: empty input in " + context);
    t.header = split_csv_line(line);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != t.header.size())
            throw DataError("CSV: line " + std::to_string(lineno) + " of " + context + " has " +
                            std::to_string(cells.size()) + " fields, expected " +
                            std::to_string(t.header.size()));
        t.rows.push_back(std::move(cells));
    }
    return t;
}

}  // namespace tpml
