#pragma once

// Configuration files and run records for the command-line front end.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "nlsemi/domain.hpp"

namespace nlsemi::cli {

using Json = nlohmann::ordered_json;

/// Usage or configuration problem; maps to exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{"beta",   "gamma", "q",         "l",    "p",      "m",   "m_total", "n_z",
                                            "n_steps", "pad_factor", "seed", "n_samples", "tol", "out", "format",
                                            "w",       "closure",    "runs", "scheme"};
    return keys;
}

/// Flat `key = value` configuration. Lines starting with '#' are comments.
class Config {
public:
    static Config parse(std::istream& in, const std::string& origin = "config") {
        Config c;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string t = trim(line);
            if (t.empty()) continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw UsageError(origin + ":" + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(t.substr(0, eq)), value = trim(t.substr(eq + 1));
            if (!known_keys().count(key)) throw UsageError(origin + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
            if (value.empty()) throw UsageError(origin + ":" + std::to_string(lineno) + ": empty value for '" + key + "'");
            if (c.values_.count(key)) throw UsageError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
            c.values_[key] = value;
        }
        return c;
    }
    static Config load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw UsageError("cannot open config file '" + path + "'");
        return parse(in, path);
    }

    bool has(const std::string& k) const { return values_.count(k) > 0; }
    void set(const std::string& k, const std::string& v) { values_[k] = v; }

    std::string text(const std::string& k) const {
        auto it = values_.find(k);
        if (it == values_.end()) throw UsageError("missing required key '" + k + "'");
        return it->second;
    }
    std::string text(const std::string& k, const std::string& fallback) { return has(k) ? text(k) : remember(k, fallback); }

    double real(const std::string& k) const { return to_real(k, text(k)); }
    double real(const std::string& k, double fallback) { return has(k) ? real(k) : (remember(k, fmt(fallback)), fallback); }
    long integer(const std::string& k) const { return to_integer(k, text(k)); }
    long integer(const std::string& k, long fallback) {
        return has(k) ? integer(k) : (remember(k, std::to_string(fallback)), fallback);
    }
    std::uint64_t seed() const {
        const std::string v = text("seed");
        std::uint64_t s = 0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
        if (ec != std::errc{} || p != v.data() + v.size()) throw UsageError("key 'seed' must be a non-negative integer");
        return s;
    }

    /// Every key with its resolved value, including defaults that were used.
    Json resolved() const {
        Json j = Json::object();
        for (const auto& [k, v] : values_) j[k] = v;
        return j;
    }
    std::string serialize() const {
        std::string s;
        for (const auto& [k, v] : values_) s += k + " = " + v + "\n";
        return s;
    }

    static std::string fmt(double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }

private:
    static std::string trim(const std::string& s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return "";
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    }
    std::string remember(const std::string& k, const std::string& v) {
        values_[k] = v;
        return v;
    }
    static double to_real(const std::string& k, const std::string& v) {
        double x = 0.0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
        if (ec != std::errc{} || p != v.data() + v.size() || !std::isfinite(x))
            throw UsageError("key '" + k + "' must be a finite number, got '" + v + "'");
        return x;
    }
    static long to_integer(const std::string& k, const std::string& v) {
        long x = 0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
        if (ec != std::errc{} || p != v.data() + v.size()) throw UsageError("key '" + k + "' must be an integer, got '" + v + "'");
        return x;
    }

    std::map<std::string, std::string> values_;
};

/// Channel parameters from a configuration. W defaults to 1 and m_total to m.
inline ChannelParams channel_from(Config& cfg) {
    ChannelParams c;
    c.beta = cfg.real("beta");
    c.gamma = cfg.real("gamma");
    c.q = cfg.real("q");
    c.l = cfg.real("l");
    c.p = cfg.real("p");
    const long m = cfg.integer("m");
    const long mt = cfg.integer("m_total", m);
    const double w = cfg.real("w", 1.0);
    c.n_z = static_cast<int>(cfg.integer("n_z", 64));
    const std::string cl = cfg.text("closure", "truncate");
    if (cl == "truncate") c.closure = Closure::truncate;
    else if (cl == "periodic") c.closure = Closure::periodic;
    else throw UsageError("key 'closure' must be truncate or periodic");
    if (m < 1 || mt < m || m > 4096 || mt > 1 << 20) throw UsageError("need 1 <= m <= m_total");
    try {
        c.grid = FrequencyGrid::make(static_cast<int>(m), static_cast<int>(mt), w);
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return c;
}

/// JSON text with every floating value written to 17 significant digits.
inline void write_json(std::ostream& os, const Json& j, int indent = 0) {
    const std::string pad(static_cast<std::size_t>(indent + 2), ' '), close(static_cast<std::size_t>(indent), ' ');
    switch (j.type()) {
        case Json::value_t::object: {
            if (j.empty()) {
                os << "{}";
                break;
            }
            os << "{\n";
            bool first = true;
            for (const auto& [k, v] : j.items()) {
                if (!first) os << ",\n";
                first = false;
                os << pad << Json(k).dump() << ": ";
                write_json(os, v, indent + 2);
            }
            os << "\n" << close << "}";
            break;
        }
        case Json::value_t::array: {
            if (j.empty()) {
                os << "[]";
                break;
            }
            os << "[\n";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) os << ",\n";
                os << pad;
                write_json(os, j[i], indent + 2);
            }
            os << "\n" << close << "]";
            break;
        }
        case Json::value_t::number_float: {
            const double v = j.get<double>();
            if (std::isfinite(v)) os << Config::fmt(v);
            else os << "null";
            break;
        }
        default: os << j.dump();
    }
}

inline std::string to_text(const Json& j) {
    std::ostringstream os;
    write_json(os, j);
    os << "\n";
    return os.str();
}

}  // namespace nlsemi::cli
