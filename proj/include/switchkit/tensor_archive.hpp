// Copyright (c) 2026 switchkit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "switchkit/dtype.hpp"
#include "switchkit/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace switchkit {

// One entry of the container header. byte_offset is relative to the start
// of the data region (the byte after the JSON header).
struct tensor_meta {
    std::string name;
    dtype dt = dtype::f32;
    std::vector<int64_t> shape;
    uint64_t byte_offset = 0;
    uint64_t byte_length = 0;
    bool zero_size = false;

    int64_t num_elements() const;
    bool is_matrix() const { return shape.size() == 2; }
};

// Parsed view of a container file. Opening reads only the header; tensor
// payloads stay on disk until read_matrix is called. An index is immutable
// and safe to share across concurrent readers.
struct archive_index {
    std::filesystem::path path;
    std::vector<tensor_meta> header; // in header order
    std::map<std::string, std::string> metadata;
    std::string digest; // 64-hex sha256 of the file bytes ("" if deferred)
    uint64_t data_begin = 0; // absolute offset of the data region
    uint64_t data_size = 0;

    const tensor_meta * find(const std::string & name) const;
    const tensor_meta & require(const std::string & name) const;
    uint64_t total_params() const;
};

struct open_options {
    bool compute_digest = true; // hash the whole file at open
};

// Container layout: 8-byte little-endian header length, JSON header of
// name -> {dtype, shape, data_offsets} (plus optional "__metadata__"
// string map), then the raw little-endian payload.
archive_index open_archive(const std::filesystem::path & path, const open_options & opts = {});

// Digest of an already-opened index, for deferred hashing.
std::string file_digest(const std::filesystem::path & path);

// Decodes one 2-D tensor to fp32. fp16/bf16 payloads are upcast exactly;
// non-finite values abort.
matrix read_matrix(const archive_index & index, const std::string & name);

// Raw payload bytes of one tensor (bit-exact copy path).
std::vector<std::byte> read_raw(const archive_index & index, const tensor_meta & meta);

// Streaming writer: payloads are spilled to a temp file as they are added,
// the final file is assembled on finish() and atomically renamed into
// place. No partial file is ever visible at `path`.
class archive_writer {
public:
    explicit archive_writer(std::filesystem::path path);
    ~archive_writer();

    archive_writer(const archive_writer &) = delete;
    archive_writer & operator=(const archive_writer &) = delete;

    // 2-D fp32 values stored as `store` (fp32 or fp16).
    void add_matrix(const std::string & name, const matrix & m, dtype store = dtype::f32);

    // Arbitrary-shape fp32 values stored as `store` (fp32 or fp16).
    void add_tensor(const std::string & name, const std::vector<int64_t> & shape,
                    std::span<const float> values, dtype store = dtype::f32);

    // Pre-encoded payload copied verbatim (any dtype).
    void add_raw(const std::string & name, dtype dt, const std::vector<int64_t> & shape,
                 std::span<const std::byte> bytes);

    void set_metadata(const std::map<std::string, std::string> & metadata);

    // Assembles header + payload, renames into place, and returns the
    // index of the written file (digest always computed).
    archive_index finish();

private:
    void append_payload(const std::string & name, dtype dt, const std::vector<int64_t> & shape,
                        const void * bytes, uint64_t len);

    std::filesystem::path path_;
    std::filesystem::path tmp_data_path_;
    std::map<std::string, std::string> metadata_;
    std::vector<tensor_meta> entries_;
    void * data_file_ = nullptr; // FILE*
    uint64_t data_bytes_ = 0;
    bool finished_ = false;
};

// Convenience wrapper for small archives (tests, fixtures).
struct named_tensor {
    std::string name;
    std::vector<int64_t> shape;
    std::vector<float> values;
    dtype store = dtype::f32;
};

archive_index write_archive(const std::filesystem::path & path, const std::vector<named_tensor> & tensors,
                            const std::map<std::string, std::string> & metadata = {});

} // namespace switchkit
