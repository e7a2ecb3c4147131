#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <doctest.h>

#include "melodia/error.hpp"

// Relative error metric used by every finite-difference comparison.
inline double rel_err(double analytic, double numeric) {
    return std::abs(analytic - numeric) /
           std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

// Asserts that evaluating `expr` throws melodia::Error with exactly `errc`.
#define CHECK_ERRC(expr, errc)                                        \
    do {                                                              \
        bool thrown_ = false;                                         \
        try {                                                         \
            (void)(expr);                                             \
        } catch (const melodia::Error& e_) {                          \
            thrown_ = true;                                           \
            CHECK(e_.code() == (errc));                               \
        }                                                             \
        CHECK_MESSAGE(thrown_, "expected an error from " #expr);      \
    } while (0)

inline std::vector<std::uint8_t> from_hex(const std::string& hex) {
    std::vector<std::uint8_t> out;
    for (std::size_t i = 0; i + 1 < hex.size(); i += 2)
        out.push_back(static_cast<std::uint8_t>(std::stoi(hex.substr(i, 2), nullptr, 16)));
    return out;
}

inline std::string to_hex(const std::vector<std::uint8_t>& bytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (std::uint8_t b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0F]);
    }
    return out;
}
