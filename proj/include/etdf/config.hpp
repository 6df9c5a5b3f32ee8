#pragma once

// Run configuration: flat `key = value` pairs with dotted keys, '#' comments.
// CLI flags override file values. Every getter records the resolved value so a
// run can emit its fully-resolved configuration (defaults included) and a
// stable hash of it for provenance.

#include <algorithm>
#include <cctype>
#include <complex>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "linalg.hpp"

namespace etdf {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

// "a+bi" / "a-bi" / "a" / "bi"
inline Complex parse_complex(const std::string& text) {
    const std::string s = trim(text);
    if (s.empty()) throw ConfigError("empty complex literal");
    if (s.back() == 'i' || s.back() == 'I') {
        // find the split sign (not leading, not part of an exponent)
        for (std::size_t k = s.size() - 1; k > 0; --k) {
            if ((s[k] == '+' || s[k] == '-') && s[k - 1] != 'e' && s[k - 1] != 'E') {
                const std::string re = trim(s.substr(0, k));
                std::string im = trim(s.substr(k, s.size() - k - 1));
                if (im == "+" || im == "-") im += "1";
                try {
                    return Complex(std::stod(re), std::stod(im));
                } catch (const std::exception&) {
                    throw ConfigError("bad complex literal '" + text + "'");
                }
            }
        }
        std::string im = trim(s.substr(0, s.size() - 1));
        if (im.empty() || im == "+" || im == "-") im += "1";
        try {
            return Complex(0.0, std::stod(im));
        } catch (const std::exception&) {
            throw ConfigError("bad complex literal '" + text + "'");
        }
    }
    try {
        return Complex(std::stod(s), 0.0);
    } catch (const std::exception&) {
        throw ConfigError("bad complex literal '" + text + "'");
    }
}

}  // namespace detail

class RunConfig {
public:
    RunConfig() = default;

    static RunConfig from_string(const std::string& text) {
        RunConfig c;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string t = detail::trim(line);
            if (t.empty()) continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
            const std::string key = detail::trim(t.substr(0, eq));
            const std::string val = detail::trim(t.substr(eq + 1));
            if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
            c.kv_[key] = val;
        }
        return c;
    }

    static RunConfig from_file(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot open config file '" + path + "'");
        std::stringstream ss;
        ss << f.rdbuf();
        return from_string(ss.str());
    }

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& def) const {
        const auto it = kv_.find(key);
        const std::string v = (it == kv_.end()) ? def : it->second;
        resolved_[key] = v;
        return v;
    }

    double get_double(const std::string& key, double def) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) {
            resolved_[key] = format_double(def);
            return def;
        }
        try {
            const double v = std::stod(it->second);
            resolved_[key] = it->second;
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': bad number '" + it->second + "'");
        }
    }

    int get_int(const std::string& key, int def) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) {
            resolved_[key] = std::to_string(def);
            return def;
        }
        try {
            const int v = std::stoi(it->second);
            resolved_[key] = it->second;
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': bad integer '" + it->second + "'");
        }
    }

    bool get_bool(const std::string& key, bool def) const {
        const std::string v = get_string(key, def ? "true" : "false");
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError("config key '" + key + "': bad boolean '" + v + "'");
    }

    std::vector<double> get_double_list(const std::string& key,
                                        const std::vector<double>& def) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) {
            std::string d;
            for (std::size_t i = 0; i < def.size(); ++i)
                d += (i ? ", " : "") + format_double(def[i]);
            resolved_[key] = d;
            return def;
        }
        std::vector<double> out;
        for (const std::string& item : detail::split(it->second, ','))
            try {
                out.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw ConfigError("config key '" + key + "': bad number '" + item + "'");
            }
        resolved_[key] = it->second;
        return out;
    }

    CVector get_complex_list(const std::string& key, const std::string& def) const {
        const std::string v = get_string(key, def);
        CVector out;
        for (const std::string& item : detail::split(v, ',')) out.push_back(detail::parse_complex(item));
        return out;
    }

    // impulse width: absolute number or "T/<div>"
    static double parse_delta_spec(const std::string& text, double T) {
        const std::string t = detail::trim(text);
        if (t.size() > 2 && (t[0] == 'T' || t[0] == 't') && t[1] == '/') {
            try {
                return T / std::stod(t.substr(2));
            } catch (const std::exception&) {
                throw ConfigError("bad T/<div> impulse width '" + text + "'");
            }
        }
        try {
            return std::stod(t);
        } catch (const std::exception&) {
            throw ConfigError("bad impulse width '" + text + "'");
        }
    }

    double get_delta(const std::string& key, const std::string& def, double T) const {
        return parse_delta_spec(get_string(key, def), T);
    }

    // "from : to : count" or a comma list or a single number
    std::vector<double> get_grid(const std::string& key, const std::string& def) const {
        const std::string v = get_string(key, def);
        if (detail::trim(v).empty()) return {};
        if (v.find(':') != std::string::npos) {
            const auto parts = detail::split(v, ':');
            if (parts.size() != 3) throw ConfigError("config key '" + key + "': want from:to:count");
            double a = 0, b = 0;
            int cnt = 0;
            try {
                a = std::stod(parts[0]);
                b = std::stod(parts[1]);
                cnt = std::stoi(parts[2]);
            } catch (const std::exception&) {
                throw ConfigError("config key '" + key + "': bad from:to:count '" + v + "'");
            }
            if (cnt < 0) throw ConfigError("config key '" + key + "': negative count");
            std::vector<double> out;
            for (int i = 0; i < cnt; ++i)
                out.push_back(cnt == 1 ? a : a + (b - a) * i / (cnt - 1));
            return out;
        }
        std::vector<double> out;
        for (const std::string& item : detail::split(v, ','))
            if (!item.empty()) out.push_back(std::stod(item));
        return out;
    }

    // fully-resolved configuration (every key consulted, defaults included)
    std::string resolved_dump() const {
        std::map<std::string, std::string> all = resolved_;
        for (const auto& [k, v] : kv_) all[k] = v;
        std::string out;
        for (const auto& [k, v] : all) out += k + " = " + v + "\n";
        return out;
    }

    std::string hash_hex() const {  // FNV-1a 64 over the resolved dump
        const std::string dump = resolved_dump();
        std::uint64_t h = 1469598103934665603ull;
        for (unsigned char c : dump) {
            h ^= c;
            h *= 1099511628211ull;
        }
        char buf[19];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }

private:
    static std::string format_double(double v) {
        std::ostringstream ss;
        ss.precision(15);
        ss << v;
        return ss.str();
    }

    std::map<std::string, std::string> kv_;
    mutable std::map<std::string, std::string> resolved_;
};

}  // namespace etdf
