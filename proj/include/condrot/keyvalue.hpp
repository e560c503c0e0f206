#ifndef CONDROT_KEYVALUE_HPP
#define CONDROT_KEYVALUE_HPP

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

/**
 * @file keyvalue.hpp
 * @brief Flat `key = value` text files with SI unit suffixes.
 *
 * One entry per line, `#` starts a comment, blank lines are ignored.
 * Numeric values may carry a unit suffix which is converted to SI at parse
 * time: s, ms, us, ns, ps for times; Hz, kHz, MHz for rates; deg, rad for
 * angles. A bare number is taken as already in SI units.
 */

namespace condrot {

namespace detail {

inline std::string_view trim(std::string_view s) {
    const char* ws = " \t\r\n";
    auto first = s.find_first_not_of(ws);
    if (first == std::string_view::npos) {
        return {};
    }
    auto last = s.find_last_not_of(ws);
    return s.substr(first, last - first + 1);
}

}

/// Renders a double with 17 significant digits so it reads back bit-identically.
inline std::string format_number(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

enum class Quantity { dimensionless, time, rate, angle };

/**
 * Parses "<number>[ ]<unit>". Units must match the quantity; an angle with
 * no unit is radians, a time with no unit is seconds.
 */
inline double parse_quantity(std::string_view text, Quantity quantity, std::string_view key = {}) {
    auto fail = [&](const std::string& why) -> double {
        throw ConfigError("value for '" + std::string(key) + "' (" + std::string(text) + "): " + why);
    };

    std::string_view s = detail::trim(text);
    if (s.empty()) {
        return fail("empty value");
    }
    double value = 0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    if (*begin == '+') {
        ++begin;
    }
    auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc()) {
        return fail("not a number");
    }
    std::string_view unit = detail::trim(std::string_view(res.ptr, static_cast<std::size_t>(end - res.ptr)));

    double scale = 1;
    bool ok = unit.empty();
    switch (quantity) {
    case Quantity::dimensionless:
        break;
    case Quantity::time:
        if (unit == "s") { scale = 1; ok = true; }
        else if (unit == "ms") { scale = 1e-3; ok = true; }
        else if (unit == "us") { scale = 1e-6; ok = true; }
        else if (unit == "ns") { scale = 1e-9; ok = true; }
        else if (unit == "ps") { scale = 1e-12; ok = true; }
        break;
    case Quantity::rate:
        if (unit == "Hz") { scale = 1; ok = true; }
        else if (unit == "kHz") { scale = 1e3; ok = true; }
        else if (unit == "MHz") { scale = 1e6; ok = true; }
        break;
    case Quantity::angle:
        if (unit == "rad") { scale = 1; ok = true; }
        else if (unit == "deg") { scale = std::numbers::pi / 180.0; ok = true; }
        break;
    }
    if (!ok) {
        return fail("unexpected unit '" + std::string(unit) + "'");
    }
    if (!std::isfinite(value)) {
        return fail("not finite");
    }
    return value * scale;
}

/// Comma-separated list of quantities.
inline std::vector<double> parse_quantity_list(std::string_view text, Quantity quantity, std::string_view key = {}) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto comma = text.find(',', start);
        auto piece = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        out.push_back(parse_quantity(piece, quantity, key));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

inline bool parse_bool(std::string_view text, std::string_view key = {}) {
    auto s = detail::trim(text);
    if (s == "true" || s == "1" || s == "yes" || s == "on") {
        return true;
    }
    if (s == "false" || s == "0" || s == "no" || s == "off") {
        return false;
    }
    throw ConfigError("value for '" + std::string(key) + "' is not a boolean: " + std::string(text));
}

/**
 * Ordered key-value store read from text. Every key must be consumed by a
 * reader; leftovers are reported as unknown keys.
 */
class KeyValueFile {
public:
    static KeyValueFile parse(std::string_view text) {
        KeyValueFile out;
        std::size_t lineno = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            auto nl = text.find('\n', pos);
            auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
            ++lineno;
            pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;

            auto hash = line.find('#');
            if (hash != std::string_view::npos) {
                line = line.substr(0, hash);
            }
            line = detail::trim(line);
            if (line.empty()) {
                continue;
            }
            auto eq = line.find('=');
            if (eq == std::string_view::npos) {
                throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
            }
            std::string key(detail::trim(line.substr(0, eq)));
            std::string value(detail::trim(line.substr(eq + 1)));
            if (key.empty()) {
                throw ConfigError("line " + std::to_string(lineno) + ": empty key");
            }
            if (out.entries_.count(key)) {
                throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
            }
            out.entries_.emplace(std::move(key), std::move(value));
        }
        return out;
    }

    static KeyValueFile load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw ConfigError("cannot read '" + path + "'");
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse(buf.str());
    }

    /// Removes and returns the value for `key`, if present.
    std::optional<std::string> take(const std::string& key) {
        auto it = entries_.find(key);
        if (it == entries_.end()) {
            return std::nullopt;
        }
        std::string v = std::move(it->second);
        entries_.erase(it);
        return v;
    }

    bool empty() const { return entries_.empty(); }

    void require_consumed() const {
        if (!entries_.empty()) {
            throw ConfigError("unknown key '" + entries_.begin()->first + "'");
        }
    }

private:
    std::map<std::string, std::string> entries_;
};

}

#endif
