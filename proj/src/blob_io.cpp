#include "meltpool/blob_io.hpp"

#include <fstream>

namespace meltpool {

void write_blob(const std::string& path, const char magic[8], const void* data,
                std::size_t nbytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(magic, 8);
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(nbytes));
    std::uint64_t sum = fnv1a64(magic, 8);
    sum = fnv1a64(data, nbytes, sum);
    out.write(reinterpret_cast<const char*>(&sum), 8);
    if (!out) throw IoError("short write: " + path);
}

std::vector<char> read_blob(const std::string& path, const char magic[8]) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open: " + path);
    const auto size = static_cast<std::size_t>(in.tellg());
    if (size < 16) throw FormatError("blob " + path + ": truncated (only " +
                                     std::to_string(size) + " bytes)");
    in.seekg(0);
    std::vector<char> buf(size);
    in.read(buf.data(), static_cast<std::streamsize>(size));
    if (static_cast<std::size_t>(in.gcount()) != size)
        throw FormatError("blob " + path + ": truncated read");
    if (std::memcmp(buf.data(), magic, 8) != 0)
        throw FormatError("blob " + path + ": magic/version mismatch");
    std::uint64_t stored;
    std::memcpy(&stored, buf.data() + size - 8, 8);
    const std::uint64_t computed = fnv1a64(buf.data(), size - 8);
    if (stored != computed) throw FormatError("blob " + path + ": checksum failure");
    return {buf.begin() + 8, buf.end() - 8};
}

}  // namespace meltpool
