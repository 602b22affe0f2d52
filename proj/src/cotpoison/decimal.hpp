#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace cotpoison {

/// Exact base-10 number: digits * 10^exponent, normalized so digits carry no
/// trailing zeros (and zero is 0 * 10^0). Keeps answer transforms like
/// "39 * 2.1" exact where binary doubles would print 81.89999999999999.
class Decimal {
public:
    Decimal() = default;
    static Decimal from_int(std::int64_t value);
    /// Parses a plain decimal: optional sign, digits, optional fraction.
    /// Throws ConfigError on anything else (no exponent notation).
    static Decimal parse(std::string_view text);
    /// Exact value of a double via its shortest round-trip representation.
    static Decimal from_double(double value);

    Decimal multiply(const Decimal& other) const;
    Decimal add(const Decimal& other) const;
    Decimal negate() const;

    /// Minimal representation: no trailing fractional zeros, no exponent
    /// ("12.6", "81.9", "43.73964", "50", "0.004").
    std::string to_string() const;
    double to_double() const;

    bool operator==(const Decimal& other) const = default;

private:
    Decimal(std::int64_t digits, std::int32_t exponent);
    void normalize();

    std::int64_t digits_ = 0;
    std::int32_t exponent_ = 0;
};

} // namespace cotpoison
