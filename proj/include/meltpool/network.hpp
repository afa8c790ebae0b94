#pragma once

#include <memory>
#include <string>
#include <vector>

#include "meltpool/layers.hpp"
#include "meltpool/rng.hpp"

namespace meltpool {

// Named view of one trainable tensor inside a Network.
struct ParamRef {
    std::string name;  // e.g. "layer2.conv3d.weight"
    Tensor* tensor;
};

// Sequential layer stack with cached activations for one backward pass.
class Network {
public:
    explicit Network(NetworkSpec spec);

    const NetworkSpec& spec() const { return spec_; }

    Tensor forward(const Tensor& input, Mode mode);

    // Propagates d(loss)/d(output) back through the stack, accumulating
    // parameter gradients. Requires a preceding forward; calling twice
    // without a new forward is a StateError.
    Tensor backward(const Tensor& grad_output);

    std::vector<ParamRef> parameters();
    std::size_t parameter_count() const;

    void zero_grads();

    // Fan-in-scaled normal init (stdev sqrt(2/fan_in)) for weights, zero
    // biases. Deterministic per seed.
    void init_parameters(std::uint64_t seed);

    // Flattens all parameters in layer order, weights before biases,
    // row-major; and the inverse.
    std::vector<double> flatten_parameters() const;
    void load_parameters(const std::vector<double>& flat);

    std::size_t layer_count() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_[i]; }

private:
    NetworkSpec spec_;
    std::vector<std::unique_ptr<Layer>> layers_;
    bool forward_done_ = false;
};

}  // namespace meltpool
