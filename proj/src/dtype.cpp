// Copyright (c) 2026 switchkit contributors
// SPDX-License-Identifier: Apache-2.0

#include "switchkit/dtype.hpp"
#include "switchkit/errors.hpp"

#include <bit>
#include <cstring>

namespace switchkit {

std::size_t dtype_width(dtype dt) {
    switch (dt) {
        case dtype::f32:  return 4;
        case dtype::f16:  return 2;
        case dtype::bf16: return 2;
    }
    throw data_error("unknown dtype");
}

std::string dtype_name(dtype dt) {
    switch (dt) {
        case dtype::f32:  return "F32";
        case dtype::f16:  return "F16";
        case dtype::bf16: return "BF16";
    }
    throw data_error("unknown dtype");
}

dtype dtype_from_name(const std::string & name) {
    if (name == "F32")  return dtype::f32;
    if (name == "F16")  return dtype::f16;
    if (name == "BF16") return dtype::bf16;
    throw data_error("unsupported dtype tag '" + name + "'");
}

float f16_to_f32(uint16_t h) {
    const uint32_t sign = (uint32_t)(h >> 15) << 31;
    uint32_t exp  = (h >> 10) & 0x1f;
    uint32_t mant = h & 0x3ff;
    uint32_t bits;
    if (exp == 0) {
        if (mant == 0) {
            bits = sign; // +-0
        } else {
            // subnormal: normalize the mantissa
            int shift = 0;
            while ((mant & 0x400) == 0) {
                mant <<= 1;
                ++shift;
            }
            mant &= 0x3ff;
            bits = sign | ((uint32_t)(127 - 14 - shift) << 23) | (mant << 13);
        }
    } else if (exp == 0x1f) {
        bits = sign | 0x7f800000u | (mant << 13); // inf / nan
    } else {
        bits = sign | ((exp - 15 + 127) << 23) | (mant << 13);
    }
    return std::bit_cast<float>(bits);
}

uint16_t f32_to_f16(float f) {
    const uint32_t bits = std::bit_cast<uint32_t>(f);
    const uint16_t sign = (uint16_t)((bits >> 16) & 0x8000);
    const uint32_t exp  = (bits >> 23) & 0xff;
    const uint32_t mant = bits & 0x7fffff;

    if (exp == 0xff) { // inf / nan
        return (uint16_t)(sign | 0x7c00 | (mant ? 0x200 : 0));
    }
    // rebias; e is the unbiased exponent + 15
    const int e = (int)exp - 127 + 15;
    if (e >= 0x1f) {
        return (uint16_t)(sign | 0x7c00); // overflow -> inf
    }
    if (e <= 0) {
        if (e < -10) {
            return sign; // underflow to zero
        }
        // subnormal half: shift in the implicit bit, round to nearest even
        uint32_t m = mant | 0x800000;
        const int shift = 14 - e;
        uint32_t half = m >> shift;
        const uint32_t rem = m & ((1u << shift) - 1);
        const uint32_t mid = 1u << (shift - 1);
        if (rem > mid || (rem == mid && (half & 1))) {
            ++half;
        }
        return (uint16_t)(sign | half);
    }
    // normal: 13 dropped mantissa bits, round to nearest even
    uint32_t half = (uint32_t)(e << 10) | (mant >> 13);
    const uint32_t rem = mant & 0x1fff;
    if (rem > 0x1000 || (rem == 0x1000 && (half & 1))) {
        ++half; // may carry into the exponent, which is correct (e.g. -> inf)
    }
    return (uint16_t)(sign | half);
}

float bf16_to_f32(uint16_t b) {
    return std::bit_cast<float>((uint32_t)b << 16);
}

uint16_t f32_to_bf16(float f) {
    const uint32_t bits = std::bit_cast<uint32_t>(f);
    if ((bits & 0x7f800000u) == 0x7f800000u && (bits & 0x7fffffu)) {
        return (uint16_t)((bits >> 16) | 0x40); // keep nan quiet
    }
    const uint32_t lsb = (bits >> 16) & 1;
    const uint32_t rounded = bits + 0x7fff + lsb;
    return (uint16_t)(rounded >> 16);
}

} // namespace switchkit
