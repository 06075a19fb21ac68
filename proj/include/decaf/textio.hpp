#pragma once

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "decaf/errors.hpp"

namespace decaf {

/// Formats a double with 17 significant digits ("%.17g"), which round-trips
/// any finite IEEE-754 double exactly. Used by the dataset file format.
inline std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Shortest representation that still round-trips; used by result CSVs.
inline std::string fmt_shortest(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc())
        throw format_error("fmt_shortest: conversion failed");
    return std::string(buf, p);
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.emplace_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
    const char* begin = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || end != begin + s.size())
        throw format_error(where + ": not a number: '" + s + "'");
    return v;
}

inline long long parse_int(const std::string& s, const std::string& where) {
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw format_error(where + ": not an integer: '" + s + "'");
    return v;
}

} // namespace decaf
