#include "meltpool/network.hpp"

#include <cmath>

namespace meltpool {

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
    layers_.reserve(spec_.size());
    for (const auto& ls : spec_) layers_.push_back(make_layer(ls));
}

Tensor Network::forward(const Tensor& input, Mode mode) {
    Tensor x = input;
    for (auto& l : layers_) x = l->forward(x, mode);
    if (!x.all_finite()) throw NumericError("Network::forward produced non-finite values");
    forward_done_ = true;
    return x;
}

Tensor Network::backward(const Tensor& grad_output) {
    if (!forward_done_)
        throw StateError("Network::backward called without a completed forward pass");
    forward_done_ = false;
    Tensor g = grad_output;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

std::vector<ParamRef> Network::parameters() {
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        auto ps = layers_[i]->params();
        auto names = layers_[i]->param_names();
        for (std::size_t j = 0; j < ps.size(); ++j) {
            out.push_back({"layer" + std::to_string(i) + "." + layers_[i]->spec().kind_name() +
                               "." + names[j],
                           ps[j]});
        }
    }
    return out;
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_)
        for (const Tensor* t : const_cast<Layer&>(*l).params()) n += t->numel();
    return n;
}

void Network::zero_grads() {
    for (auto& l : layers_)
        for (Tensor* t : l->params()) t->zero_grad();
}

void Network::init_parameters(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& l : layers_) {
        auto ps = l->params();
        auto names = l->param_names();
        for (std::size_t j = 0; j < ps.size(); ++j) {
            if (names[j] == "bias") {
                std::fill(ps[j]->vec().begin(), ps[j]->vec().end(), 0.0);
                continue;
            }
            std::size_t fan_in = 0;
            if (l->spec().kind == LayerSpec::Kind::FullyConnected)
                fan_in = l->spec().in_features;
            else if (l->spec().kind == LayerSpec::Kind::Conv3D)
                fan_in = l->spec().in_channels * 27;
            const double stdev = std::sqrt(2.0 / static_cast<double>(fan_in));
            for (double& v : ps[j]->vec()) v = rng.normal(0.0, stdev);
        }
    }
}

std::vector<double> Network::flatten_parameters() const {
    std::vector<double> flat;
    for (const auto& l : layers_)
        for (Tensor* t : const_cast<Layer&>(*l).params())
            flat.insert(flat.end(), t->vec().begin(), t->vec().end());
    return flat;
}

void Network::load_parameters(const std::vector<double>& flat) {
    std::size_t off = 0;
    for (auto& l : layers_) {
        for (Tensor* t : l->params()) {
            if (off + t->numel() > flat.size())
                throw FormatError("Network::load_parameters: parameter blob too short");
            std::copy(flat.begin() + off, flat.begin() + off + t->numel(), t->vec().begin());
            off += t->numel();
        }
    }
    if (off != flat.size())
        throw FormatError("Network::load_parameters: parameter blob has " +
                          std::to_string(flat.size() - off) + " extra values");
}

}  // namespace meltpool
