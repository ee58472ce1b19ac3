#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "esgforge/errors.hpp"

namespace esgforge {

/// Storage precisions supported by the checkpoint container.
/// All arithmetic elsewhere runs in F32; F16/BF16 are widened losslessly on
/// read and narrowed with round-to-nearest-even on write.
enum class DType : std::uint8_t { F32, F16, BF16 };

constexpr std::size_t dtype_width(DType d) {
    return d == DType::F32 ? 4 : 2;
}

constexpr std::string_view dtype_name(DType d) {
    switch (d) {
        case DType::F32: return "F32";
        case DType::F16: return "F16";
        case DType::BF16: return "BF16";
    }
    return "?";
}

inline bool parse_dtype(std::string_view s, DType& out) {
    if (s == "F32") { out = DType::F32; return true; }
    if (s == "F16") { out = DType::F16; return true; }
    if (s == "BF16") { out = DType::BF16; return true; }
    return false;
}

// ---- IEEE 754 binary16 <-> binary32 ----------------------------------------
// Widening is exact (every f16 value is representable in f32); narrowing uses
// round-to-nearest-even, with overflow to inf and underflow through subnormals.

inline float f16_to_f32(std::uint16_t h) {
    const int sign = (h >> 15) & 1;
    const int exp = (h >> 10) & 0x1f;
    const std::uint32_t man = h & 0x3ffu;
    float v;
    if (exp == 31) {
        v = man ? std::numeric_limits<float>::quiet_NaN()
                : std::numeric_limits<float>::infinity();
    } else if (exp == 0) {
        v = std::ldexp(static_cast<float>(man), -24);
    } else {
        v = std::ldexp(static_cast<float>(man + 1024u), exp - 25);
    }
    return sign ? -v : v;
}

inline std::uint16_t f32_to_f16(float value) {
    const std::uint32_t x = std::bit_cast<std::uint32_t>(value);
    const std::uint16_t sign = static_cast<std::uint16_t>((x >> 16) & 0x8000u);
    const std::uint32_t abs = x & 0x7fffffffu;

    if (abs >= 0x7f800000u) {  // inf / nan
        if (abs == 0x7f800000u) return sign | 0x7c00u;
        std::uint16_t payload = static_cast<std::uint16_t>((abs >> 13) & 0x3ffu);
        return sign | 0x7c00u | 0x0200u | payload;
    }

    int exp = static_cast<int>(abs >> 23) - 127 + 15;
    std::uint32_t man = abs & 0x7fffffu;

    if (exp >= 31) return sign | 0x7c00u;  // overflow before rounding
    if (exp <= 0) {
        if (exp < -10) return sign;  // underflows past the smallest subnormal
        man |= 0x800000u;
        const int shift = 14 - exp;
        const std::uint32_t half = 1u << (shift - 1);
        const std::uint32_t lsb = (man >> shift) & 1u;
        const std::uint32_t rounded = (man + half - 1u + lsb) >> shift;
        return sign | static_cast<std::uint16_t>(rounded);
    }

    std::uint32_t out = (static_cast<std::uint32_t>(exp) << 10) | (man >> 13);
    const std::uint32_t rem = man & 0x1fffu;
    if (rem > 0x1000u || (rem == 0x1000u && (out & 1u))) ++out;  // RNE; carry may bump exp
    return sign | static_cast<std::uint16_t>(out);
}

// ---- bfloat16 <-> binary32 --------------------------------------------------

inline float bf16_to_f32(std::uint16_t h) {
    return std::bit_cast<float>(static_cast<std::uint32_t>(h) << 16);
}

inline std::uint16_t f32_to_bf16(float value) {
    const std::uint32_t x = std::bit_cast<std::uint32_t>(value);
    if ((x & 0x7fffffffu) > 0x7f800000u) {
        return static_cast<std::uint16_t>((x >> 16) | 0x0040u);  // keep NaNs quiet
    }
    const std::uint32_t rounded = x + 0x7fffu + ((x >> 16) & 1u);
    return static_cast<std::uint16_t>(rounded >> 16);
}

// ---- raw buffer widening / narrowing ----------------------------------------

/// Widens `count` stored elements starting at `src` to f32.
void widen_to_f32(DType dtype, const std::byte* src, std::size_t count, float* dst);

/// Narrows `count` f32 values into the storage representation at `dst`
/// (round-to-nearest-even for the 16-bit types).
void narrow_from_f32(DType dtype, const float* src, std::size_t count, std::byte* dst);

}  // namespace esgforge
