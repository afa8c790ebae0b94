#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "meltpool/network.hpp"

namespace meltpool {

// Serialized model: network spec + metadata in a text header, parameters as a
// little-endian float32 blob (layer order, weights before biases, row-major).
struct Checkpoint {
    NetworkSpec spec;
    std::uint64_t seed = 0;
    std::string role;      // "T", "M" or "MT"
    nlohmann::json meta;   // surrogate config, training history, ...
    std::vector<float> parameters;

    Network instantiate() const;
    static Checkpoint capture(const Network& net, std::uint64_t seed, std::string role,
                              nlohmann::json meta);
};

nlohmann::json layer_spec_to_json(const LayerSpec& spec);
LayerSpec layer_spec_from_json(const nlohmann::json& j);

void write_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace meltpool
