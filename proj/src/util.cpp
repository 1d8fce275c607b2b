#include "protoflow/util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace protoflow::util {

std::string lower(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

static bool is_strippable(unsigned char c) {
    return std::ispunct(c) && c != '-' && c != '/' && c != '\'';
}

std::vector<std::string> tokenize(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) {
        std::size_t b = 0, e = tok.size();
        while (b < e && is_strippable(static_cast<unsigned char>(tok[b]))) ++b;
        while (e > b && is_strippable(static_cast<unsigned char>(tok[e - 1]))) --e;
        if (e > b) out.push_back(tok.substr(b, e - b));
    }
    return out;
}

std::vector<std::string> word_tokens(const std::string& s) {
    std::vector<std::string> out = tokenize(s);
    for (auto& t : out) t = lower(t);
    return out;
}

bool starts_with(const std::string& s, const std::string& prefix) {
    return s.size() >= prefix.size() && s.compare(0, prefix.size(), prefix) == 0;
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::size_t edit_distance(const std::vector<std::string>& a,
                          const std::vector<std::string>& b) {
    const std::size_t n = a.size(), m = b.size();
    std::vector<std::size_t> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

double normalized_edit_distance(const std::vector<std::string>& a,
                                const std::vector<std::string>& b) {
    std::size_t denom = std::max<std::size_t>(std::max(a.size(), b.size()), 1);
    return static_cast<double>(edit_distance(a, b)) / static_cast<double>(denom);
}

double trigram_cosine(const std::string& a, const std::string& b) {
    auto grams = [](const std::string& s) {
        std::map<std::string, int> g;
        std::string p = "  " + lower(s) + "  ";
        for (std::size_t i = 0; i + 3 <= p.size(); ++i) g[p.substr(i, 3)]++;
        return g;
    };
    auto ga = grams(a), gb = grams(b);
    double dot = 0, na = 0, nb = 0;
    for (const auto& [k, v] : ga) {
        na += double(v) * v;
        auto it = gb.find(k);
        if (it != gb.end()) dot += double(v) * it->second;
    }
    for (const auto& [k, v] : gb) nb += double(v) * v;
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string to_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << data;
}

}  // namespace protoflow::util
