#ifndef PROTOFLOW_QUANTITY_HPP
#define PROTOFLOW_QUANTITY_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace protoflow {

// Unit dimensions a DSL parameter may declare. Canonical scales are
// mL, g, degrees C, and seconds; display units are preserved alongside.
enum class UnitDim {
    VolumeML,
    MassG,
    TemperatureC,
    DurationS,
    Rate,
    Count,
    Dimensionless,
};

std::string unit_dim_name(UnitDim d);
std::optional<UnitDim> unit_dim_from_name(const std::string& name);

struct Quantity {
    UnitDim dim = UnitDim::Dimensionless;
    // Magnitudes in the display unit; lo == hi for point values.
    double lo = 0.0;
    double hi = 0.0;
    // Display unit token, e.g. "F", "C", "mins", "mL", "g", "mL/s".
    std::string unit;

    bool is_range() const { return lo != hi; }
    double mid() const { return (lo + hi) / 2.0; }

    // Converted to the dimension's canonical scale (C, s, mL, g).
    double canonical_lo() const;
    double canonical_hi() const;

    bool operator==(const Quantity& o) const = default;
};

// Compact rendering used in program listings and canonical records:
// points as "300F", "7.5mins"; ranges render their midpoint.
std::string render_quantity(const Quantity& q);
// Range-preserving rendering, e.g. "20-25C".
std::string render_quantity_full(const Quantity& q);

// Parses a standalone quantity expression: decimals, vulgar fractions
// ("1/3"), mixed numbers ("1 1/2"), ranges ("5-10", "1 - 1 1/2"),
// approximation markers ("~8"), and attached or detached units
// ("300 F", "2mins", "80°C", "1mL/s"). Returns nullopt when the text is
// not a single quantity.
std::optional<Quantity> parse_quantity(const std::string& text);

struct QuantityMatch {
    std::size_t begin = 0;  // byte offsets into the scanned string
    std::size_t end = 0;
    Quantity quantity;
};

// Scans free text for number-with-unit occurrences.
std::vector<QuantityMatch> find_quantities(const std::string& text);

}  // namespace protoflow

#endif
