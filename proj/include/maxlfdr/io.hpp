#pragma once

// Text I/O shared by the CLI and the simulation tables: lossless number
// formatting and the p-value input format (one value per line, '#' comments,
// optional single-column CSV header "p").

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "maxlfdr/errors.hpp"

namespace maxlfdr::io {

/// 17 significant digits, so parsing the text gives back the same double.
/// Non-finite values print as nan / inf / -inf.
inline std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string_view trim(std::string_view s) {
    constexpr std::string_view ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

/// Parses p-values from a stream. Blank lines and lines starting with '#' are
/// skipped; a first data line reading exactly "p" is a CSV header. Every other
/// line must hold one number in [0,1]. Does not check for emptiness.
inline std::vector<double> parse_p_values(std::istream& in) {
    std::vector<double> values;
    std::string line;
    std::size_t line_no = 0;
    bool seen_data = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty() || text.front() == '#') continue;
        if (!seen_data && (text == "p" || text == "\"p\"")) {
            seen_data = true;
            continue;
        }
        seen_data = true;
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc{} || ptr != text.data() + text.size() || std::isnan(value)) {
            throw ParseError("malformed number at line " + std::to_string(line_no) + ": '" +
                             std::string(text) + "'");
        }
        if (!(value >= 0.0 && value <= 1.0)) {
            throw ParseError("value outside [0,1] at line " + std::to_string(line_no) + ": " +
                             std::string(text));
        }
        values.push_back(value);
    }
    return values;
}

inline std::vector<double> read_p_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot read file '" + path + "'");
    return parse_p_values(in);
}

}  // namespace maxlfdr::io
