#pragma once

// Text recording format shared by every tool:
//
//   # rate_hz=500
//   # units=mV
//   0.0123
//   ...
//
// Annotation files hold one R-peak sample index per line.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecgtwin/signal.hpp"

namespace ecgtwin {

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& s, const std::string& context) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) throw std::runtime_error(context + ": cannot parse number '" + s + "'");
    return v;
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace detail

inline void write_recording(std::ostream& os, const TimeSeries& ts) {
    os << "# rate_hz=" << detail::format_double(ts.rate_hz()) << '\n';
    os << "# units=" << to_string(ts.units()) << '\n';
    for (double v : ts.values()) os << detail::format_double(v) << '\n';
}

inline void write_recording(const std::string& path, const TimeSeries& ts) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_recording(os, ts);
    if (!os) throw std::runtime_error("write failed for '" + path + "'");
}

/// Reads a recording. A missing rate header is an error; units default to mV.
inline TimeSeries read_recording(std::istream& is, const std::string& name = "<stream>") {
    double rate = 0.0;
    Units units = Units::millivolt;
    std::vector<double> values;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        if (t.front() == '#') {
            const std::string body = detail::trim(t.substr(1));
            const auto eq = body.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = detail::trim(body.substr(0, eq));
            const std::string val = detail::trim(body.substr(eq + 1));
            if (key == "rate_hz") rate = detail::parse_double(val, name + ":" + std::to_string(lineno));
            else if (key == "units") units = units_from_string(val);
            continue;
        }
        values.push_back(detail::parse_double(t, name + ":" + std::to_string(lineno)));
    }
    if (!(rate > 0.0)) throw std::runtime_error(name + ": missing or invalid '# rate_hz=' header");
    return TimeSeries(std::move(values), rate, units);
}

inline TimeSeries read_recording(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open recording '" + path + "'");
    return read_recording(is, path);
}

inline void write_annotations(const std::string& path, const BeatTruth& truth) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    for (auto r : truth.r_indices) os << r << '\n';
    if (!os) throw std::runtime_error("write failed for '" + path + "'");
}

inline BeatTruth read_annotations(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open annotation file '" + path + "'");
    BeatTruth truth;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty() || t.front() == '#') continue;
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc{} || ptr != t.data() + t.size())
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad sample index '" + t + "'");
        if (!truth.r_indices.empty() && v <= truth.r_indices.back())
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": indices must be strictly increasing");
        truth.r_indices.push_back(v);
    }
    return truth;
}

}  // namespace ecgtwin
