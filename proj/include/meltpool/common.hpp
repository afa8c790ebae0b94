#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace meltpool {

// Error hierarchy. Every failure mode the toolkit reports goes through one of
// these so the CLI can map them to distinct exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor/layer shape disagreement; message names the offending axis.
struct DimensionError : Error {
    using Error::Error;
};

// Invalid configuration (inconsistent dims, bad fraction, window too large...).
struct ConfigError : Error {
    using Error::Error;
};

// Engine state misuse (backward without forward, double backward).
struct StateError : Error {
    using Error::Error;
};

// Filesystem / missing file.
struct IoError : Error {
    using Error::Error;
};

// On-disk format problems: version mismatch, truncation, checksum failure.
struct FormatError : Error {
    using Error::Error;
};

// Numerical failure (NaN gradients, solver blow-up).
struct NumericError : Error {
    using Error::Error;
};

// FNV-1a 64-bit, used as the trailing checksum of binary blobs.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace meltpool
