// Copyright (c) 2026 switchkit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace switchkit {

// Streaming SHA-256 (FIPS 180-4). Archive digests are the lowercase hex
// digest of the full file bytes.
class sha256 {
public:
    sha256();

    void update(const void * data, std::size_t len);

    // Finalizes and returns the 64-char lowercase hex digest. The object
    // must not be updated afterwards.
    std::string hex_digest();

    static std::string of_bytes(const void * data, std::size_t len);
    static std::string of_file(const std::string & path);

private:
    void process_block(const uint8_t * block);

    uint32_t state_[8];
    uint8_t  buf_[64];
    std::size_t buf_len_ = 0;
    uint64_t total_len_ = 0;
};

} // namespace switchkit
