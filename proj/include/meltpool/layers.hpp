#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "meltpool/tensor.hpp"

namespace meltpool {

enum class Mode { Train, Eval };

// Declarative description of one layer. Conv3D is pinned to kernel 3, stride 1,
// same padding; TrilinearUpsample is pinned to scale 2.
struct LayerSpec {
    enum class Kind {
        FullyConnected,
        Conv3D,
        TrilinearUpsample,
        LeakyReLU,
        ValvedLeakyReLU,
        Sigmoid,
        Reshape,
    };

    Kind kind = Kind::FullyConnected;
    std::size_t in_features = 0, out_features = 0;   // FullyConnected
    std::size_t in_channels = 0, out_channels = 0;   // Conv3D
    double slope = 0.01;                             // LeakyReLU variants
    std::vector<std::size_t> target_shape;           // Reshape (per sample, no batch axis)

    static LayerSpec fully_connected(std::size_t in, std::size_t out);
    static LayerSpec conv3d(std::size_t cin, std::size_t cout);
    static LayerSpec upsample();
    static LayerSpec leaky_relu(double slope);
    static LayerSpec valved_leaky_relu(double slope);
    static LayerSpec sigmoid();
    static LayerSpec reshape(std::vector<std::size_t> target);

    const char* kind_name() const;
};

using NetworkSpec = std::vector<LayerSpec>;

class Layer {
public:
    explicit Layer(LayerSpec spec) : spec_(std::move(spec)) {}
    virtual ~Layer() = default;

    const LayerSpec& spec() const { return spec_; }

    virtual Tensor forward(const Tensor& in, Mode mode) = 0;
    // Accumulates parameter gradients, returns gradient w.r.t. the input.
    virtual Tensor backward(const Tensor& grad_out) = 0;

    // Weights before biases.
    virtual std::vector<Tensor*> params() { return {}; }
    virtual std::vector<std::string> param_names() const { return {}; }

protected:
    LayerSpec spec_;
};

std::unique_ptr<Layer> make_layer(const LayerSpec& spec);

// Free-function forwards used by the oracle tests; the layer classes call
// the same kernels.
Tensor fc_forward(const Tensor& in, const Tensor& weights, const Tensor& bias);
Tensor conv3d_forward(const Tensor& in, const Tensor& kernels, const Tensor& bias);
Tensor upsample_trilinear_forward(const Tensor& in);
Tensor leaky_relu(const Tensor& in, double slope);
Tensor valved_leaky_relu(const Tensor& in, double slope, Mode mode);
Tensor sigmoid(const Tensor& in);

}  // namespace meltpool
