#include "cotpoison/decimal.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "cotpoison/errors.hpp"

namespace cotpoison {

namespace {

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
    __int128 wide = static_cast<__int128>(a) * b;
    if (wide > std::numeric_limits<std::int64_t>::max() ||
        wide < std::numeric_limits<std::int64_t>::min()) {
        throw ConfigError("decimal overflow in multiplication");
    }
    return static_cast<std::int64_t>(wide);
}

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
    __int128 wide = static_cast<__int128>(a) + b;
    if (wide > std::numeric_limits<std::int64_t>::max() ||
        wide < std::numeric_limits<std::int64_t>::min()) {
        throw ConfigError("decimal overflow in addition");
    }
    return static_cast<std::int64_t>(wide);
}

std::int64_t pow10_checked(std::int32_t n) {
    std::int64_t r = 1;
    for (std::int32_t i = 0; i < n; ++i) r = checked_mul(r, 10);
    return r;
}

} // namespace

Decimal::Decimal(std::int64_t digits, std::int32_t exponent)
    : digits_(digits), exponent_(exponent) {
    normalize();
}

void Decimal::normalize() {
    if (digits_ == 0) {
        exponent_ = 0;
        return;
    }
    while (digits_ % 10 == 0) {
        digits_ /= 10;
        ++exponent_;
    }
}

Decimal Decimal::from_int(std::int64_t value) { return Decimal(value, 0); }

Decimal Decimal::parse(std::string_view text) {
    if (text.empty()) throw ConfigError("empty decimal literal");
    std::size_t pos = 0;
    bool negative = false;
    if (text[pos] == '+' || text[pos] == '-') {
        negative = text[pos] == '-';
        ++pos;
    }
    std::int64_t digits = 0;
    std::int32_t exponent = 0;
    bool seen_digit = false;
    bool seen_point = false;
    for (; pos < text.size(); ++pos) {
        char c = text[pos];
        if (c == '.') {
            if (seen_point) throw ConfigError("malformed decimal literal: " + std::string(text));
            seen_point = true;
            continue;
        }
        if (!std::isdigit(static_cast<unsigned char>(c)))
            throw ConfigError("malformed decimal literal: " + std::string(text));
        digits = checked_add(checked_mul(digits, 10), c - '0');
        if (seen_point) --exponent;
        seen_digit = true;
    }
    if (!seen_digit) throw ConfigError("malformed decimal literal: " + std::string(text));
    return Decimal(negative ? -digits : digits, exponent);
}

Decimal Decimal::from_double(double value) {
    if (!std::isfinite(value)) throw ConfigError("non-finite numeric value");
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) throw ConfigError("unrepresentable numeric value");
    std::string_view repr(buf, static_cast<std::size_t>(end - buf));
    // Shortest round-trip may use exponent form for extreme magnitudes;
    // expand it through a plain rendering.
    auto epos = repr.find_first_of("eE");
    if (epos == std::string_view::npos) return parse(repr);
    Decimal mantissa = parse(repr.substr(0, epos));
    int exp10 = std::atoi(std::string(repr.substr(epos + 1)).c_str());
    mantissa.exponent_ += exp10;
    mantissa.normalize();
    return mantissa;
}

Decimal Decimal::multiply(const Decimal& other) const {
    return Decimal(checked_mul(digits_, other.digits_), exponent_ + other.exponent_);
}

Decimal Decimal::add(const Decimal& other) const {
    std::int32_t exp = std::min(exponent_, other.exponent_);
    std::int64_t a = checked_mul(digits_, pow10_checked(exponent_ - exp));
    std::int64_t b = checked_mul(other.digits_, pow10_checked(other.exponent_ - exp));
    return Decimal(checked_add(a, b), exp);
}

Decimal Decimal::negate() const { return Decimal(-digits_, exponent_); }

std::string Decimal::to_string() const {
    if (digits_ == 0) return "0";
    std::uint64_t mag = digits_ < 0 ? static_cast<std::uint64_t>(-(digits_ + 1)) + 1
                                    : static_cast<std::uint64_t>(digits_);
    std::string body = std::to_string(mag);
    std::string out;
    if (exponent_ >= 0) {
        out = body + std::string(static_cast<std::size_t>(exponent_), '0');
    } else {
        std::size_t frac = static_cast<std::size_t>(-exponent_);
        if (frac >= body.size()) {
            out = "0." + std::string(frac - body.size(), '0') + body;
        } else {
            out = body.substr(0, body.size() - frac) + "." + body.substr(body.size() - frac);
        }
    }
    return digits_ < 0 ? "-" + out : out;
}

double Decimal::to_double() const {
    double out = 0.0;
    auto repr = to_string();
    std::from_chars(repr.data(), repr.data() + repr.size(), out);
    return out;
}

} // namespace cotpoison
