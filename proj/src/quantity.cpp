#include "protoflow/quantity.hpp"

#include <cctype>
#include <cmath>
#include <map>

#include "protoflow/util.hpp"

namespace protoflow {

namespace {

struct UnitInfo {
    UnitDim dim;
    std::string display;
    double to_canonical;  // multiplicative factor (temperature handled apart)
};

// Lowercased unit token -> canonical info. Longest-token match wins when
// scanning; tokens here never contain spaces.
const std::map<std::string, UnitInfo>& unit_table() {
    static const std::map<std::string, UnitInfo> table = {
        {"ml", {UnitDim::VolumeML, "mL", 1.0}},
        {"milliliter", {UnitDim::VolumeML, "mL", 1.0}},
        {"milliliters", {UnitDim::VolumeML, "mL", 1.0}},
        {"l", {UnitDim::VolumeML, "L", 1000.0}},
        {"liter", {UnitDim::VolumeML, "L", 1000.0}},
        {"liters", {UnitDim::VolumeML, "L", 1000.0}},
        {"cup", {UnitDim::VolumeML, "cup", 236.588}},
        {"cups", {UnitDim::VolumeML, "cup", 236.588}},
        {"floz", {UnitDim::VolumeML, "floz", 29.5735}},
        {"g", {UnitDim::MassG, "g", 1.0}},
        {"gram", {UnitDim::MassG, "g", 1.0}},
        {"grams", {UnitDim::MassG, "g", 1.0}},
        {"kg", {UnitDim::MassG, "kg", 1000.0}},
        {"mg", {UnitDim::MassG, "mg", 0.001}},
        {"ounce", {UnitDim::MassG, "ounce", 28.3495}},
        {"ounces", {UnitDim::MassG, "ounce", 28.3495}},
        {"c", {UnitDim::TemperatureC, "C", 1.0}},
        {"f", {UnitDim::TemperatureC, "F", 1.0}},
        {"celsius", {UnitDim::TemperatureC, "C", 1.0}},
        {"fahrenheit", {UnitDim::TemperatureC, "F", 1.0}},
        {"s", {UnitDim::DurationS, "s", 1.0}},
        {"sec", {UnitDim::DurationS, "s", 1.0}},
        {"secs", {UnitDim::DurationS, "s", 1.0}},
        {"second", {UnitDim::DurationS, "s", 1.0}},
        {"seconds", {UnitDim::DurationS, "s", 1.0}},
        {"min", {UnitDim::DurationS, "mins", 60.0}},
        {"mins", {UnitDim::DurationS, "mins", 60.0}},
        {"minute", {UnitDim::DurationS, "mins", 60.0}},
        {"minutes", {UnitDim::DurationS, "mins", 60.0}},
        {"h", {UnitDim::DurationS, "h", 3600.0}},
        {"hour", {UnitDim::DurationS, "h", 3600.0}},
        {"hours", {UnitDim::DurationS, "h", 3600.0}},
        {"ml/s", {UnitDim::Rate, "mL/s", 1.0}},
        {"ml/min", {UnitDim::Rate, "mL/min", 1.0 / 60.0}},
        {"rpm", {UnitDim::Rate, "rpm", 1.0}},
        {"x", {UnitDim::Count, "x", 1.0}},
    };
    return table;
}

const UnitInfo* lookup_unit(std::string token) {
    // strip degree sign prefix if present (UTF-8 0xC2 0xB0)
    while (!token.empty() &&
           (static_cast<unsigned char>(token[0]) == 0xC2 ||
            static_cast<unsigned char>(token[0]) == 0xB0)) {
        token.erase(token.begin());
    }
    token = util::lower(token);
    auto it = unit_table().find(token);
    return it == unit_table().end() ? nullptr : &it->second;
}

struct NumParse {
    double value = 0.0;
    std::size_t end = 0;  // offset just past the number
    bool ok = false;
};

// Parses a decimal, vulgar fraction, or mixed number starting at `pos`
// (after any leading spaces/approx markers).
NumParse parse_number(const std::string& s, std::size_t pos) {
    NumParse r;
    std::size_t i = pos;
    auto digits = [&](std::size_t j) {
        std::size_t k = j;
        while (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) ++k;
        return k;
    };
    std::size_t d1 = digits(i);
    if (d1 == i) return r;
    double whole = std::stod(s.substr(i, d1 - i));
    std::size_t j = d1;
    if (j < s.size() && s[j] == '.') {
        std::size_t d2 = digits(j + 1);
        if (d2 > j + 1) {
            r.value = std::stod(s.substr(i, d2 - i));
            r.end = d2;
            r.ok = true;
            return r;
        }
    }
    if (j < s.size() && s[j] == '/') {
        std::size_t d2 = digits(j + 1);
        if (d2 > j + 1) {
            double den = std::stod(s.substr(j + 1, d2 - j - 1));
            if (den != 0) {
                r.value = whole / den;
                r.end = d2;
                r.ok = true;
                return r;
            }
        }
    }
    // mixed number: "1 1/2"
    if (j < s.size() && s[j] == ' ') {
        std::size_t k = j + 1;
        std::size_t d2 = digits(k);
        if (d2 > k && d2 < s.size() && s[d2] == '/') {
            std::size_t d3 = digits(d2 + 1);
            if (d3 > d2 + 1) {
                double num = std::stod(s.substr(k, d2 - k));
                double den = std::stod(s.substr(d2 + 1, d3 - d2 - 1));
                if (den != 0) {
                    r.value = whole + num / den;
                    r.end = d3;
                    r.ok = true;
                    return r;
                }
            }
        }
    }
    r.value = whole;
    r.end = d1;
    r.ok = true;
    return r;
}

std::size_t skip_spaces(const std::string& s, std::size_t i) {
    while (i < s.size() && s[i] == ' ') ++i;
    return i;
}

// Reads a unit token at `pos` (letters plus an optional "/unit" tail and
// optional degree-sign prefix). Returns token length in bytes.
std::size_t unit_token_len(const std::string& s, std::size_t pos) {
    std::size_t i = pos;
    while (i < s.size() && (static_cast<unsigned char>(s[i]) == 0xC2 ||
                            static_cast<unsigned char>(s[i]) == 0xB0))
        ++i;
    std::size_t letters = i;
    while (letters < s.size() &&
           std::isalpha(static_cast<unsigned char>(s[letters])))
        ++letters;
    if (letters == i) return 0;
    if (letters < s.size() && s[letters] == '/') {
        std::size_t k = letters + 1;
        while (k < s.size() && std::isalpha(static_cast<unsigned char>(s[k]))) ++k;
        if (k > letters + 1) letters = k;
    }
    return letters - pos;
}

}  // namespace

std::string unit_dim_name(UnitDim d) {
    switch (d) {
        case UnitDim::VolumeML: return "volume-mL";
        case UnitDim::MassG: return "mass-g";
        case UnitDim::TemperatureC: return "temperature-C";
        case UnitDim::DurationS: return "duration-s";
        case UnitDim::Rate: return "rate";
        case UnitDim::Count: return "count";
        case UnitDim::Dimensionless: return "dimensionless";
    }
    return "dimensionless";
}

std::optional<UnitDim> unit_dim_from_name(const std::string& name) {
    static const std::map<std::string, UnitDim> m = {
        {"volume-mL", UnitDim::VolumeML},       {"mass-g", UnitDim::MassG},
        {"temperature-C", UnitDim::TemperatureC}, {"duration-s", UnitDim::DurationS},
        {"rate", UnitDim::Rate},                {"count", UnitDim::Count},
        {"dimensionless", UnitDim::Dimensionless},
    };
    auto it = m.find(name);
    if (it == m.end()) return std::nullopt;
    return it->second;
}

double Quantity::canonical_lo() const {
    if (dim == UnitDim::TemperatureC && unit == "F") return (lo - 32.0) * 5.0 / 9.0;
    const UnitInfo* u = lookup_unit(unit);
    return u ? lo * u->to_canonical : lo;
}

double Quantity::canonical_hi() const {
    if (dim == UnitDim::TemperatureC && unit == "F") return (hi - 32.0) * 5.0 / 9.0;
    const UnitInfo* u = lookup_unit(unit);
    return u ? hi * u->to_canonical : hi;
}

std::string render_quantity(const Quantity& q) {
    return util::format_number(q.mid()) + q.unit;
}

std::string render_quantity_full(const Quantity& q) {
    if (!q.is_range()) return render_quantity(q);
    return util::format_number(q.lo) + "-" + util::format_number(q.hi) + q.unit;
}

std::optional<Quantity> parse_quantity(const std::string& raw) {
    std::string text = util::trim(raw);
    if (!text.empty() && text[0] == '~') text = util::trim(text.substr(1));
    if (text.empty()) return std::nullopt;

    NumParse first = parse_number(text, 0);
    if (!first.ok) return std::nullopt;
    double lo = first.value, hi = first.value;
    std::size_t i = skip_spaces(text, first.end);

    // optional range: "- NUM" or "to NUM"
    if (i < text.size() && (text[i] == '-' || text.compare(i, 3, "to ") == 0)) {
        std::size_t j = skip_spaces(text, i + (text[i] == '-' ? 1 : 2));
        NumParse second = parse_number(text, j);
        if (second.ok) {
            hi = second.value;
            i = skip_spaces(text, second.end);
        }
    }

    if (i >= text.size()) {
        Quantity q{UnitDim::Dimensionless, lo, hi, ""};
        return q;
    }
    std::size_t len = unit_token_len(text, i);
    if (len == 0 || i + len != text.size()) return std::nullopt;
    const UnitInfo* u = lookup_unit(text.substr(i, len));
    if (!u) return std::nullopt;
    return Quantity{u->dim, lo, hi, u->display};
}

std::vector<QuantityMatch> find_quantities(const std::string& text) {
    std::vector<QuantityMatch> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        // avoid matching the tail of a word like "plate_1"
        if (i > 0 && (std::isalnum(static_cast<unsigned char>(text[i - 1])) ||
                      text[i - 1] == '_' || text[i - 1] == '.')) {
            ++i;
            while (i < text.size() &&
                   std::isalnum(static_cast<unsigned char>(text[i])))
                ++i;
            continue;
        }
        std::size_t begin = i;
        NumParse first = parse_number(text, i);
        std::size_t end = first.end;
        double lo = first.value, hi = first.value;
        std::size_t j = skip_spaces(text, end);
        if (j < text.size() && text[j] == '-') {
            std::size_t k = skip_spaces(text, j + 1);
            NumParse second = parse_number(text, k);
            if (second.ok) {
                hi = second.value;
                end = second.end;
            }
        }
        std::size_t k = skip_spaces(text, end);
        std::size_t ulen = unit_token_len(text, k);
        bool matched = false;
        if (ulen > 0 && k <= end + 1) {  // attached or one space away
            // unit must end at a word boundary
            std::size_t ue = k + ulen;
            bool boundary = ue >= text.size() ||
                            !std::isalnum(static_cast<unsigned char>(text[ue]));
            const UnitInfo* u = boundary ? lookup_unit(text.substr(k, ulen)) : nullptr;
            if (u) {
                out.push_back({begin, ue, Quantity{u->dim, lo, hi, u->display}});
                i = ue;
                matched = true;
            }
        }
        if (!matched) i = end;
    }
    return out;
}

}  // namespace protoflow
