#pragma once

// Locale-independent CSV output: 9 significant digits, '.' separator.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace eponq::csv {

inline std::string number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
    return {buf, res.ptr};
}

inline std::string number(std::uint64_t v) { return std::to_string(v); }

using Row = std::vector<std::string>;

inline void write_row(std::ostream& os, const Row& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) os << ',';
        os << cells[i];
    }
    os << '\n';
}

struct Table {
    Row header;
    std::vector<Row> rows;

    void write(std::ostream& os) const {
        write_row(os, header);
        for (const auto& r : rows) write_row(os, r);
    }
};

}  // namespace eponq::csv
