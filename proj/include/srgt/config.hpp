#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "srgt/common.hpp"

namespace srgt {

// Flat key=value config files with '#' comments. Values keep insertion order
// on write so echoed configs diff cleanly.
struct KvFile {
    std::vector<std::pair<std::string, std::string>> entries;

    bool has(const std::string& key) const {
        for (const auto& [k, v] : entries)
            if (k == key) return true;
        return false;
    }

    const std::string& get(const std::string& key) const {
        for (const auto& [k, v] : entries)
            if (k == key) return v;
        throw config_error("missing config key: " + key);
    }

    std::string get_or(const std::string& key, const std::string& fallback) const {
        for (const auto& [k, v] : entries)
            if (k == key) return v;
        return fallback;
    }

    double get_double(const std::string& key) const {
        const std::string& v = get(key);
        try {
            size_t pos = 0;
            const double d = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return d;
        } catch (const std::exception&) {
            throw config_error("config key " + key + " is not a number: '" + v + "'");
        }
    }

    long get_int(const std::string& key) const {
        const std::string& v = get(key);
        try {
            size_t pos = 0;
            const long d = std::stol(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return d;
        } catch (const std::exception&) {
            throw config_error("config key " + key + " is not an integer: '" + v + "'");
        }
    }

    void set(const std::string& key, std::string value) {
        for (auto& [k, v] : entries)
            if (k == key) {
                v = std::move(value);
                return;
            }
        entries.emplace_back(key, std::move(value));
    }

    void set_double(const std::string& key, double value) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", value);
        set(key, buf);
    }

    void set_int(const std::string& key, long value) { set(key, std::to_string(value)); }
};

inline std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline KvFile parse_kv(std::istream& is) {
    KvFile kv;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("config line " + std::to_string(lineno) + " is not key=value: '" + line + "'");
        kv.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return kv;
}

inline KvFile read_kv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open config file " + path);
    return parse_kv(is);
}

inline void write_kv(const KvFile& kv, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw io_error("cannot write config file " + path);
    for (const auto& [k, v] : kv.entries) os << k << " = " << v << "\n";
    if (!os) throw io_error("config write failed: " + path);
}

}  // namespace srgt
