#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace affect {

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return "";
    }
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

// Flat key=value configuration with [section] grouping. Keys are stored as
// "section.key"; keys before any section header have no prefix. '#' and ';'
// start comments.
struct IniFile {
    std::map<std::string, std::string> values;

    static IniFile parse(std::istream& in, const std::string& name) {
        IniFile ini;
        std::string line;
        std::string section;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            std::size_t comment = line.find_first_of("#;");
            if (comment != std::string::npos) {
                line = line.substr(0, comment);
            }
            line = detail::trim(line);
            if (line.empty()) {
                continue;
            }
            if (line.front() == '[') {
                if (line.back() != ']') {
                    throw std::runtime_error(name + ":" + std::to_string(line_no) +
                                             ": unterminated section header");
                }
                section = detail::trim(line.substr(1, line.size() - 2));
                continue;
            }
            std::size_t eq = line.find('=');
            if (eq == std::string::npos) {
                throw std::runtime_error(name + ":" + std::to_string(line_no) +
                                         ": expected key=value");
            }
            std::string key = detail::trim(line.substr(0, eq));
            std::string value = detail::trim(line.substr(eq + 1));
            if (key.empty()) {
                throw std::runtime_error(name + ":" + std::to_string(line_no) + ": empty key");
            }
            ini.values[section.empty() ? key : section + "." + key] = value;
        }
        return ini;
    }

    static IniFile parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) {
            throw std::runtime_error(path + ": cannot open");
        }
        return parse(in, path);
    }

    bool has(const std::string& key) const { return values.count(key) > 0; }

    std::string get(const std::string& key, const std::string& fallback = "") const {
        auto it = values.find(key);
        return it == values.end() ? fallback : it->second;
    }

    std::string require(const std::string& key) const {
        auto it = values.find(key);
        if (it == values.end()) {
            throw std::runtime_error("config: missing required key '" + key + "'");
        }
        return it->second;
    }

    long get_int(const std::string& key, long fallback) const {
        auto it = values.find(key);
        if (it == values.end()) {
            return fallback;
        }
        try {
            std::size_t pos = 0;
            long v = std::stol(it->second, &pos);
            if (pos != it->second.size()) {
                throw std::invalid_argument("");
            }
            return v;
        } catch (...) {
            throw std::runtime_error("config: key '" + key + "' is not an integer: " +
                                     it->second);
        }
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = values.find(key);
        if (it == values.end()) {
            return fallback;
        }
        try {
            std::size_t pos = 0;
            double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) {
                throw std::invalid_argument("");
            }
            return v;
        } catch (...) {
            throw std::runtime_error("config: key '" + key + "' is not a number: " + it->second);
        }
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = values.find(key);
        if (it == values.end()) {
            return fallback;
        }
        std::string v = it->second;
        std::transform(v.begin(), v.end(), v.begin(), ::tolower);
        if (v == "true" || v == "1" || v == "yes" || v == "on") {
            return true;
        }
        if (v == "false" || v == "0" || v == "no" || v == "off") {
            return false;
        }
        throw std::runtime_error("config: key '" + key + "' is not a boolean: " + it->second);
    }
};

}  // namespace affect
