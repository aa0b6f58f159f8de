// Copyright (c) 2026 switchkit contributors
// SPDX-License-Identifier: Apache-2.0

#include "switchkit/tensor_archive.hpp"
#include "switchkit/errors.hpp"
#include "switchkit/sha256.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace switchkit {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::size_t k_chunk_elems = 1 << 16;

uint64_t checked_num_elements(const std::vector<int64_t> & shape, const std::string & name) {
    uint64_t n = 1;
    for (int64_t d : shape) {
        if (d < 0) {
            throw data_error("tensor '" + name + "' has a negative dimension");
        }
        n *= (uint64_t)d;
    }
    return n;
}

// Scans the raw header text for top-level object keys, tracking brace depth
// and string state. Used for duplicate-name detection with byte positions,
// which a plain JSON parse silently collapses.
struct raw_key {
    std::string text; // escaped, as written
    std::size_t pos;  // byte offset within the header text
};

std::vector<raw_key> scan_top_level_keys(const std::string & text) {
    std::vector<raw_key> keys;
    int depth = 0;
    bool in_string = false;
    bool escape = false;
    bool value_expected = false; // true between ':' and the value at depth 1
    std::size_t key_start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (escape) {
                escape = false;
            } else if (c == '\\') {
                escape = true;
            } else if (c == '"') {
                in_string = false;
                if (depth == 1 && !value_expected) {
                    keys.push_back({text.substr(key_start, i - key_start), key_start});
                }
            }
            continue;
        }
        switch (c) {
            case '"':
                in_string = true;
                key_start = i + 1;
                break;
            case '{': case '[':
                ++depth;
                value_expected = false;
                break;
            case '}': case ']':
                --depth;
                break;
            case ':':
                if (depth == 1) value_expected = true;
                break;
            case ',':
                if (depth == 1) value_expected = false;
                break;
            default:
                break;
        }
    }
    return keys;
}

std::string unescape_json_key(const std::string & raw) {
    return nlohmann::json::parse("\"" + raw + "\"").get<std::string>();
}

void validate_no_overlap(std::vector<tensor_meta> entries, uint64_t data_begin, uint64_t data_size) {
    std::sort(entries.begin(), entries.end(), [](const tensor_meta & a, const tensor_meta & b) {
        return a.byte_offset != b.byte_offset ? a.byte_offset < b.byte_offset : a.name < b.name;
    });
    uint64_t prev_end = 0;
    const tensor_meta * prev = nullptr;
    for (const auto & e : entries) {
        if (e.byte_offset + e.byte_length > data_size) {
            throw data_error("truncated data region: tensor '" + e.name + "' ends at byte " +
                             std::to_string(data_begin + e.byte_offset + e.byte_length) +
                             " but the file ends at byte " + std::to_string(data_begin + data_size));
        }
        if (prev && e.byte_offset < prev_end && e.byte_length > 0 && prev->byte_length > 0) {
            throw data_error("overlapping byte ranges: tensor '" + e.name + "' at byte " +
                             std::to_string(data_begin + e.byte_offset) + " overlaps tensor '" +
                             prev->name + "'");
        }
        if (e.byte_offset + e.byte_length > prev_end) {
            prev_end = e.byte_offset + e.byte_length;
            prev = &e;
        }
    }
}

void decode_chunk(dtype dt, const std::byte * raw, std::size_t n, float * out) {
    switch (dt) {
        case dtype::f32:
            std::memcpy(out, raw, n * sizeof(float));
            break;
        case dtype::f16: {
            const uint16_t * h = reinterpret_cast<const uint16_t *>(raw);
            for (std::size_t i = 0; i < n; ++i) {
                out[i] = f16_to_f32(h[i]);
            }
            break;
        }
        case dtype::bf16: {
            const uint16_t * b = reinterpret_cast<const uint16_t *>(raw);
            for (std::size_t i = 0; i < n; ++i) {
                out[i] = bf16_to_f32(b[i]);
            }
            break;
        }
    }
}

} // namespace

int64_t tensor_meta::num_elements() const {
    int64_t n = 1;
    for (int64_t d : shape) {
        n *= d;
    }
    return n;
}

const tensor_meta * archive_index::find(const std::string & name) const {
    for (const auto & e : header) {
        if (e.name == name) {
            return &e;
        }
    }
    return nullptr;
}

const tensor_meta & archive_index::require(const std::string & name) const {
    const tensor_meta * m = find(name);
    if (!m) {
        throw data_error("unknown tensor '" + name + "' in " + path.string());
    }
    return *m;
}

uint64_t archive_index::total_params() const {
    uint64_t n = 0;
    for (const auto & e : header) {
        n += (uint64_t)e.num_elements();
    }
    return n;
}

std::string file_digest(const std::filesystem::path & path) {
    return sha256::of_file(path.string());
}

archive_index open_archive(const fs::path & path, const open_options & opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw data_error("cannot open archive: " + path.string());
    }
    in.seekg(0, std::ios::end);
    const uint64_t file_size = (uint64_t)in.tellg();
    in.seekg(0);

    if (file_size < 8) {
        throw data_error("not a container file (shorter than the 8-byte header length): " + path.string());
    }
    uint8_t len_bytes[8];
    in.read(reinterpret_cast<char *>(len_bytes), 8);
    uint64_t header_len = 0;
    for (int i = 7; i >= 0; --i) {
        header_len = (header_len << 8) | len_bytes[i];
    }
    if (header_len > file_size - 8) {
        throw data_error("truncated header: declared " + std::to_string(header_len) +
                         " bytes at byte 0 but only " + std::to_string(file_size - 8) + " follow");
    }

    std::string header_text(header_len, '\0');
    in.read(header_text.data(), (std::streamsize)header_len);
    if ((uint64_t)in.gcount() != header_len) {
        throw data_error("truncated header read at byte 8: " + path.string());
    }

    ordered_json header;
    try {
        header = ordered_json::parse(header_text);
    } catch (const nlohmann::json::parse_error & e) {
        throw data_error("malformed header at byte " + std::to_string(8 + e.byte) + ": " + e.what());
    }
    if (!header.is_object()) {
        throw data_error("malformed header at byte 8: top-level value is not an object");
    }

    // duplicate key detection; the JSON parse silently keeps one of them
    {
        const auto raw_keys = scan_top_level_keys(header_text);
        std::map<std::string, std::size_t> seen;
        for (const auto & k : raw_keys) {
            const std::string name = unescape_json_key(k.text);
            auto [it, inserted] = seen.emplace(name, k.pos);
            if (!inserted) {
                throw data_error("duplicate tensor name '" + name + "' in header at byte " +
                                 std::to_string(8 + k.pos));
            }
        }
    }

    archive_index index;
    index.path = path;
    index.data_begin = 8 + header_len;
    index.data_size = file_size - index.data_begin;

    for (auto it = header.begin(); it != header.end(); ++it) {
        const std::string & name = it.key();
        if (name == "__metadata__") {
            if (!it.value().is_object()) {
                throw data_error("malformed header: __metadata__ is not an object");
            }
            for (auto mit = it.value().begin(); mit != it.value().end(); ++mit) {
                if (!mit.value().is_string()) {
                    throw data_error("malformed header: metadata value for '" + mit.key() +
                                     "' is not a string");
                }
                index.metadata[mit.key()] = mit.value().get<std::string>();
            }
            continue;
        }
        const auto & entry = it.value();
        if (!entry.is_object() || !entry.contains("dtype") || !entry.contains("shape") ||
            !entry.contains("data_offsets")) {
            throw data_error("malformed header: tensor '" + name +
                             "' needs dtype, shape and data_offsets");
        }
        tensor_meta meta;
        meta.name = name;
        meta.dt = dtype_from_name(entry["dtype"].get<std::string>());
        if (!entry["shape"].is_array() || entry["shape"].empty()) {
            throw data_error("tensor '" + name + "' has an empty shape (scalars are unsupported)");
        }
        for (const auto & d : entry["shape"]) {
            if (!d.is_number_integer()) {
                throw data_error("tensor '" + name + "' has a non-integer dimension");
            }
            meta.shape.push_back(d.get<int64_t>());
        }
        const uint64_t n = checked_num_elements(meta.shape, name);
        meta.zero_size = n == 0;
        const auto & offs = entry["data_offsets"];
        if (!offs.is_array() || offs.size() != 2) {
            throw data_error("tensor '" + name + "' has malformed data_offsets");
        }
        const int64_t begin = offs[0].get<int64_t>();
        const int64_t end   = offs[1].get<int64_t>();
        if (begin < 0 || end < begin) {
            throw data_error("tensor '" + name + "' has malformed data_offsets");
        }
        meta.byte_offset = (uint64_t)begin;
        meta.byte_length = (uint64_t)(end - begin);
        if (meta.byte_length != n * dtype_width(meta.dt)) {
            throw data_error("tensor '" + name + "' at byte " +
                             std::to_string(index.data_begin + meta.byte_offset) + ": byte length " +
                             std::to_string(meta.byte_length) + " does not match shape");
        }
        index.header.push_back(std::move(meta));
    }

    validate_no_overlap(index.header, index.data_begin, index.data_size);

    if (opts.compute_digest) {
        index.digest = sha256::of_file(path.string());
    }
    return index;
}

matrix read_matrix(const archive_index & index, const std::string & name) {
    const tensor_meta & meta = index.require(name);
    if (!meta.is_matrix()) {
        std::string shape_str;
        for (std::size_t i = 0; i < meta.shape.size(); ++i) {
            shape_str += (i ? "," : "") + std::to_string(meta.shape[i]);
        }
        throw data_error("tensor '" + name + "' is not a matrix (shape [" + shape_str + "])");
    }
    std::ifstream in(index.path, std::ios::binary);
    if (!in) {
        throw data_error("cannot open archive: " + index.path.string());
    }
    in.seekg((std::streamoff)(index.data_begin + meta.byte_offset));

    matrix out(meta.shape[0], meta.shape[1]);
    const std::size_t width = dtype_width(meta.dt);
    std::vector<std::byte> raw(k_chunk_elems * width);
    std::size_t done = 0;
    const std::size_t total = (std::size_t)meta.num_elements();
    while (done < total) {
        const std::size_t n = std::min(total - done, k_chunk_elems);
        in.read(reinterpret_cast<char *>(raw.data()), (std::streamsize)(n * width));
        if ((std::size_t)in.gcount() != n * width) {
            throw data_error("truncated data region while reading tensor '" + name + "'");
        }
        decode_chunk(meta.dt, raw.data(), n, out.values.data() + done);
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(out.values[done + i])) {
                throw data_error("non-finite value in tensor '" + name + "' at element " +
                                 std::to_string(done + i));
            }
        }
        done += n;
    }
    return out;
}

std::vector<std::byte> read_raw(const archive_index & index, const tensor_meta & meta) {
    std::ifstream in(index.path, std::ios::binary);
    if (!in) {
        throw data_error("cannot open archive: " + index.path.string());
    }
    in.seekg((std::streamoff)(index.data_begin + meta.byte_offset));
    std::vector<std::byte> out(meta.byte_length);
    in.read(reinterpret_cast<char *>(out.data()), (std::streamsize)meta.byte_length);
    if ((uint64_t)in.gcount() != meta.byte_length) {
        throw data_error("truncated data region while reading tensor '" + meta.name + "'");
    }
    return out;
}

archive_writer::archive_writer(fs::path path) : path_(std::move(path)) {
    tmp_data_path_ = path_;
    tmp_data_path_ += ".data.tmp";
    FILE * f = std::fopen(tmp_data_path_.c_str(), "wb");
    if (!f) {
        throw data_error("unwritable path: " + tmp_data_path_.string());
    }
    data_file_ = f;
}

archive_writer::~archive_writer() {
    if (data_file_) {
        std::fclose(static_cast<FILE *>(data_file_));
        data_file_ = nullptr;
    }
    if (!finished_) {
        std::error_code ec;
        fs::remove(tmp_data_path_, ec);
    }
}

void archive_writer::append_payload(const std::string & name, dtype dt,
                                    const std::vector<int64_t> & shape, const void * bytes,
                                    uint64_t len) {
    for (const auto & e : entries_) {
        if (e.name == name) {
            throw data_error("duplicate tensor name '" + name + "'");
        }
    }
    if (name == "__metadata__") {
        throw data_error("'__metadata__' is reserved and cannot name a tensor");
    }
    if (shape.empty()) {
        throw data_error("tensor '" + name + "' has an empty shape (scalars are unsupported)");
    }
    FILE * f = static_cast<FILE *>(data_file_);
    if (len > 0 && std::fwrite(bytes, 1, len, f) != len) {
        throw data_error("write failed: " + tmp_data_path_.string());
    }
    tensor_meta meta;
    meta.name = name;
    meta.dt = dt;
    meta.shape = shape;
    meta.byte_offset = data_bytes_;
    meta.byte_length = len;
    meta.zero_size = checked_num_elements(shape, name) == 0;
    entries_.push_back(std::move(meta));
    data_bytes_ += len;
}

void archive_writer::add_tensor(const std::string & name, const std::vector<int64_t> & shape,
                                std::span<const float> values, dtype store) {
    if (store != dtype::f32 && store != dtype::f16) {
        throw data_error("tensor '" + name + "': storage dtype must be fp32 or fp16");
    }
    const uint64_t n = checked_num_elements(shape, name);
    if (n != values.size()) {
        throw data_error("tensor '" + name + "': shape does not match value count");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw data_error("non-finite value in tensor '" + name + "' at element " +
                             std::to_string(i) + "; refusing to write");
        }
    }
    if (store == dtype::f32) {
        append_payload(name, store, shape, values.data(), n * sizeof(float));
        return;
    }
    // validate before touching the payload file; a finite fp32 can still
    // round to inf in fp16
    for (std::size_t i = 0; i < values.size(); ++i) {
        if ((f32_to_f16(values[i]) & 0x7c00) == 0x7c00) {
            throw data_error("value " + std::to_string(values[i]) + " in tensor '" + name +
                             "' overflows fp16 storage");
        }
    }
    // encode in bounded chunks so large layers never double in memory
    std::vector<uint16_t> half(std::min<std::size_t>(std::max<std::size_t>(values.size(), 1), k_chunk_elems));
    FILE * f = static_cast<FILE *>(data_file_);
    const uint64_t start = data_bytes_;
    append_payload(name, store, shape, nullptr, 0);
    std::size_t done = 0;
    while (done < values.size()) {
        const std::size_t m = std::min(values.size() - done, half.size());
        for (std::size_t i = 0; i < m; ++i) {
            half[i] = f32_to_f16(values[done + i]);
        }
        if (std::fwrite(half.data(), 2, m, f) != m) {
            throw data_error("write failed: " + tmp_data_path_.string());
        }
        done += m;
    }
    entries_.back().byte_length = n * 2;
    data_bytes_ = start + n * 2;
}

void archive_writer::add_matrix(const std::string & name, const matrix & m, dtype store) {
    add_tensor(name, {m.rows, m.cols}, std::span<const float>(m.values.data(), m.values.size()),
               store);
}

void archive_writer::add_raw(const std::string & name, dtype dt, const std::vector<int64_t> & shape,
                             std::span<const std::byte> bytes) {
    const uint64_t n = checked_num_elements(shape, name);
    if (bytes.size() != n * dtype_width(dt)) {
        throw data_error("tensor '" + name + "': raw byte count does not match shape");
    }
    append_payload(name, dt, shape, bytes.data(), bytes.size());
}

void archive_writer::set_metadata(const std::map<std::string, std::string> & metadata) {
    metadata_ = metadata;
}

archive_index archive_writer::finish() {
    FILE * f = static_cast<FILE *>(data_file_);
    if (std::fflush(f) != 0) {
        throw data_error("write failed: " + tmp_data_path_.string());
    }
    std::fclose(f);
    data_file_ = nullptr;

    ordered_json header = ordered_json::object();
    if (!metadata_.empty()) {
        ordered_json meta = ordered_json::object();
        for (const auto & [k, v] : metadata_) {
            meta[k] = v;
        }
        header["__metadata__"] = std::move(meta);
    }
    for (const auto & e : entries_) {
        ordered_json entry;
        entry["dtype"] = dtype_name(e.dt);
        entry["shape"] = e.shape;
        entry["data_offsets"] = {e.byte_offset, e.byte_offset + e.byte_length};
        header[e.name] = std::move(entry);
    }
    std::string header_text = header.dump();
    while ((8 + header_text.size()) % 8 != 0) {
        header_text.push_back(' '); // align the data region to 8 bytes
    }

    fs::path tmp_final = path_;
    tmp_final += ".tmp";
    sha256 hash;
    try {
        std::ofstream out(tmp_final, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw data_error("unwritable path: " + tmp_final.string());
        }
        uint8_t len_bytes[8];
        for (int i = 0; i < 8; ++i) {
            len_bytes[i] = (uint8_t)(header_text.size() >> (8 * i));
        }
        out.write(reinterpret_cast<const char *>(len_bytes), 8);
        hash.update(len_bytes, 8);
        out.write(header_text.data(), (std::streamsize)header_text.size());
        hash.update(header_text.data(), header_text.size());

        std::ifstream data_in(tmp_data_path_, std::ios::binary);
        if (!data_in) {
            throw data_error("cannot reopen payload file: " + tmp_data_path_.string());
        }
        std::vector<char> chunk(1 << 16);
        uint64_t copied = 0;
        while (data_in) {
            data_in.read(chunk.data(), (std::streamsize)chunk.size());
            const std::streamsize got = data_in.gcount();
            if (got > 0) {
                out.write(chunk.data(), got);
                hash.update(chunk.data(), (std::size_t)got);
                copied += (uint64_t)got;
            }
        }
        data_in.close();
        if (copied != data_bytes_) {
            throw data_error("payload file changed size during assembly: " + tmp_data_path_.string());
        }
        out.flush();
        if (!out) {
            throw data_error("write failed: " + tmp_final.string());
        }
        out.close();
    } catch (...) {
        std::error_code ec;
        fs::remove(tmp_final, ec);
        throw;
    }

    fs::rename(tmp_final, path_);
    std::error_code ec;
    fs::remove(tmp_data_path_, ec);
    finished_ = true;

    archive_index index;
    index.path = path_;
    index.header = entries_;
    index.metadata = metadata_;
    index.digest = hash.hex_digest();
    index.data_begin = 8 + header_text.size();
    index.data_size = data_bytes_;
    return index;
}

archive_index write_archive(const fs::path & path, const std::vector<named_tensor> & tensors,
                            const std::map<std::string, std::string> & metadata) {
    archive_writer w(path);
    for (const auto & t : tensors) {
        w.add_tensor(t.name, t.shape, std::span<const float>(t.values.data(), t.values.size()),
                     t.store);
    }
    w.set_metadata(metadata);
    return w.finish();
}

} // namespace switchkit
