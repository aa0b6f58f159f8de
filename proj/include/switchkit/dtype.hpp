// Copyright (c) 2026 switchkit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

namespace switchkit {

enum class dtype {
    f32,
    f16,
    bf16,
};

// Byte width of one element.
std::size_t dtype_width(dtype dt);

// Container-format dtype tag ("F32", "F16", "BF16").
std::string dtype_name(dtype dt);

// Inverse of dtype_name; throws data_error on unknown tags.
dtype dtype_from_name(const std::string & name);

// fp16 (IEEE binary16) <-> fp32. Upcast is exact, downcast rounds to
// nearest even. Overflow on downcast yields +-inf.
float    f16_to_f32(uint16_t h);
uint16_t f32_to_f16(float f);

// bf16 <-> fp32. Upcast is an exact bit expansion, downcast rounds to
// nearest even (only used in tests; archives never store bf16 on write).
float    bf16_to_f32(uint16_t b);
uint16_t f32_to_bf16(float f);

} // namespace switchkit
