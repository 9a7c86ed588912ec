// textio.hpp - helpers for the versioned text artifacts
//
// All artifacts are line-oriented text. Doubles are printed with %.17g so
// they round-trip bit-exactly; identical state therefore serializes to
// byte-identical files, which is what the determinism contracts check.
#pragma once

#include <cstdio>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "flowguard/errors.hpp"
#include "flowguard/rng.hpp"

namespace flowguard {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s, const char* what) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\r')) ++pos;
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw NonNumericContinuous(std::string(what) + ": '" + s + "'");
    }
}

inline std::vector<std::string> split_string(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

inline std::string join_doubles(const std::vector<double>& v, char sep = ' ') {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out.push_back(sep);
        out += fmt_double(v[i]);
    }
    return out;
}

inline std::vector<double> parse_doubles(const std::string& line, char sep = ' ') {
    std::vector<double> out;
    for (const auto& tok : split_string(strip_cr(line), sep))
        if (!tok.empty()) out.push_back(parse_double(tok, "value"));
    return out;
}

// key=value reader for artifact headers and config files
struct KvLine {
    std::string key;
    std::string value;
};

inline bool parse_kv(const std::string& raw, KvLine& out) {
    std::string line = strip_cr(raw);
    if (line.empty() || line[0] == '#') return false;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw BadConfig("expected key=value, got '" + line + "'");
    out.key = line.substr(0, eq);
    out.value = line.substr(eq + 1);
    return true;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingInput("cannot open '" + path + "'");
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw MissingInput("cannot write '" + path + "'");
    return out;
}

inline void expect_magic(std::istream& in, const std::string& magic, const std::string& path) {
    std::string line;
    if (!std::getline(in, line)) throw EmptyFile(path);
    if (strip_cr(line) != magic)
        throw VersionMismatch("'" + path + "': expected '" + magic + "', got '" + line + "'");
}

// stable 64-bit content digest used for artifact provenance
inline std::uint64_t digest_bytes(std::string_view bytes) { return fnv1a64(bytes); }

inline std::string digest_hex(std::string_view bytes) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(digest_bytes(bytes)));
    return buf;
}

} // namespace flowguard
