#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "meltpool/common.hpp"

namespace meltpool {

// Binary blob layout: 8-byte magic/version tag, payload, trailing FNV-1a 64
// checksum of tag + payload (little-endian).
void write_blob(const std::string& path, const char magic[8], const void* data,
                std::size_t nbytes);
std::vector<char> read_blob(const std::string& path, const char magic[8]);

template <typename T>
void write_blob_vec(const std::string& path, const char magic[8], const std::vector<T>& v) {
    write_blob(path, magic, v.data(), v.size() * sizeof(T));
}

template <typename T>
std::vector<T> read_blob_vec(const std::string& path, const char magic[8]) {
    auto raw = read_blob(path, magic);
    if (raw.size() % sizeof(T) != 0)
        throw FormatError("blob " + path + ": payload not a multiple of element size");
    std::vector<T> v(raw.size() / sizeof(T));
    std::memcpy(v.data(), raw.data(), raw.size());
    return v;
}

}  // namespace meltpool
