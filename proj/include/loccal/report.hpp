#pragma once
// Tab-separated report files: per-text scores, metric tables and diagnostics.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "loccal/error.hpp"

namespace loccal {

// Shortest round-trip form; "nan" for NaN.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_fixed(double v, int digits) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, std::size_t line_no) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ParseError(line_no, "not a number: '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t tab = line.find('\t', start);
        out.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
        if (tab == std::string_view::npos) return out;
        start = tab + 1;
    }
}

// ---- score report ------------------------------------------------------------------

// naive is in the scorer's own orientation; calibrated is lambda4 (humanness), NaN for
// scorers without a calibrated form. Generator "all" rows pool every generator.
struct ScoreRow {
    std::string text_id;
    std::string source;
    std::string scorer;
    std::string generator;
    double naive = 0.0;
    double calibrated = 0.0;
};

inline constexpr std::string_view kScoreHeader = "text_id\tsource\tscorer\tgenerator\tnaive\tcalibrated";
inline constexpr const char* kAllGenerators = "all";

inline void write_score_report(std::ostream& out, const std::vector<ScoreRow>& rows) {
    out << kScoreHeader << '\n';
    for (const auto& r : rows)
        out << r.text_id << '\t' << r.source << '\t' << r.scorer << '\t' << r.generator << '\t' << format_double(r.naive)
            << '\t' << format_double(r.calibrated) << '\n';
}

inline std::vector<ScoreRow> read_score_report(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kScoreHeader) throw ParseError(1, "score report header not recognised");
    std::vector<ScoreRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_tabs(line);
        if (f.size() != 6) throw ParseError(line_no, "expected 6 tab-separated fields");
        rows.push_back({std::string(f[0]), std::string(f[1]), std::string(f[2]), std::string(f[3]),
                        parse_double(f[4], line_no), parse_double(f[5], line_no)});
    }
    return rows;
}

inline std::vector<ScoreRow> read_score_report_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open score report '" + path + "'");
    try {
        return read_score_report(in);
    } catch (const ParseError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

// ---- generic table --------------------------------------------------------------------

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void write(std::ostream& out) const {
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "\t" : "") << cells[i];
            out << '\n';
        };
        line(header);
        for (const auto& r : rows) line(r);
    }

    std::string str() const {
        std::ostringstream os;
        write(os);
        return os.str();
    }
};

template <class Fn>
void write_text_file(const std::string& path, Fn&& emit) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    emit(out);
    if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace loccal
