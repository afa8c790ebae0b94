#include "meltpool/checkpoint.hpp"

#include <fstream>

namespace meltpool {

using nlohmann::json;

static constexpr const char* kMagic = "MELTPOOL-CKPT v1";

json layer_spec_to_json(const LayerSpec& spec) {
    json j;
    j["kind"] = spec.kind_name();
    switch (spec.kind) {
        case LayerSpec::Kind::FullyConnected:
            j["in"] = spec.in_features;
            j["out"] = spec.out_features;
            break;
        case LayerSpec::Kind::Conv3D:
            j["cin"] = spec.in_channels;
            j["cout"] = spec.out_channels;
            break;
        case LayerSpec::Kind::LeakyReLU:
        case LayerSpec::Kind::ValvedLeakyReLU:
            j["slope"] = spec.slope;
            break;
        case LayerSpec::Kind::Reshape:
            j["shape"] = spec.target_shape;
            break;
        default:
            break;
    }
    return j;
}

LayerSpec layer_spec_from_json(const json& j) {
    const std::string kind = j.at("kind");
    if (kind == "fc") return LayerSpec::fully_connected(j.at("in"), j.at("out"));
    if (kind == "conv3d") return LayerSpec::conv3d(j.at("cin"), j.at("cout"));
    if (kind == "upsample") return LayerSpec::upsample();
    if (kind == "leaky_relu") return LayerSpec::leaky_relu(j.at("slope"));
    if (kind == "valved_leaky_relu") return LayerSpec::valved_leaky_relu(j.at("slope"));
    if (kind == "sigmoid") return LayerSpec::sigmoid();
    if (kind == "reshape")
        return LayerSpec::reshape(j.at("shape").get<std::vector<std::size_t>>());
    throw FormatError("checkpoint: unknown layer kind '" + kind + "'");
}

Network Checkpoint::instantiate() const {
    Network net(spec);
    if (parameters.size() != net.parameter_count())
        throw FormatError("checkpoint: parameter count " + std::to_string(parameters.size()) +
                          " does not match spec (" + std::to_string(net.parameter_count()) + ")");
    std::vector<double> flat(parameters.begin(), parameters.end());
    net.load_parameters(flat);
    return net;
}

Checkpoint Checkpoint::capture(const Network& net, std::uint64_t seed, std::string role,
                               json meta) {
    Checkpoint c;
    c.spec = net.spec();
    c.seed = seed;
    c.role = std::move(role);
    c.meta = std::move(meta);
    const auto flat = net.flatten_parameters();
    c.parameters.assign(flat.begin(), flat.end());
    return c;
}

void write_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    json header;
    header["spec"] = json::array();
    for (const auto& ls : ckpt.spec) header["spec"].push_back(layer_spec_to_json(ls));
    header["seed"] = ckpt.seed;
    header["role"] = ckpt.role;
    header["meta"] = ckpt.meta;
    out << kMagic << "\n" << header.dump() << "\nBLOB " << ckpt.parameters.size() << "\n";
    // Little-endian float32; host is little-endian.
    out.write(reinterpret_cast<const char*>(ckpt.parameters.data()),
              static_cast<std::streamsize>(ckpt.parameters.size() * sizeof(float)));
    if (!out) throw IoError("short write on checkpoint: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::string magic;
    std::getline(in, magic);
    if (magic != kMagic)
        throw FormatError("checkpoint version mismatch in " + path + ": '" + magic + "'");
    std::string header_line;
    std::getline(in, header_line);
    json header;
    try {
        header = json::parse(header_line);
    } catch (const json::exception& e) {
        throw FormatError("checkpoint header parse error in " + path + ": " + e.what());
    }
    Checkpoint c;
    for (const auto& jl : header.at("spec")) c.spec.push_back(layer_spec_from_json(jl));
    c.seed = header.at("seed");
    c.role = header.at("role");
    c.meta = header.value("meta", json::object());
    std::string blob_tag;
    std::size_t count = 0;
    in >> blob_tag >> count;
    if (blob_tag != "BLOB") throw FormatError("checkpoint: missing BLOB section in " + path);
    in.get();  // newline
    c.parameters.resize(count);
    in.read(reinterpret_cast<char*>(c.parameters.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != count * sizeof(float))
        throw FormatError("checkpoint: truncated parameter blob in " + path);
    return c;
}

}  // namespace meltpool
