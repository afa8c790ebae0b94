#include "meltpool/layers.hpp"

#include <algorithm>
#include <cmath>

namespace meltpool {

LayerSpec LayerSpec::fully_connected(std::size_t in, std::size_t out) {
    LayerSpec s;
    s.kind = Kind::FullyConnected;
    s.in_features = in;
    s.out_features = out;
    return s;
}
LayerSpec LayerSpec::conv3d(std::size_t cin, std::size_t cout) {
    LayerSpec s;
    s.kind = Kind::Conv3D;
    s.in_channels = cin;
    s.out_channels = cout;
    return s;
}
LayerSpec LayerSpec::upsample() {
    LayerSpec s;
    s.kind = Kind::TrilinearUpsample;
    return s;
}
LayerSpec LayerSpec::leaky_relu(double slope) {
    LayerSpec s;
    s.kind = Kind::LeakyReLU;
    s.slope = slope;
    return s;
}
LayerSpec LayerSpec::valved_leaky_relu(double slope) {
    LayerSpec s;
    s.kind = Kind::ValvedLeakyReLU;
    s.slope = slope;
    return s;
}
LayerSpec LayerSpec::sigmoid() {
    LayerSpec s;
    s.kind = Kind::Sigmoid;
    return s;
}
LayerSpec LayerSpec::reshape(std::vector<std::size_t> target) {
    LayerSpec s;
    s.kind = Kind::Reshape;
    s.target_shape = std::move(target);
    return s;
}

const char* LayerSpec::kind_name() const {
    switch (kind) {
        case Kind::FullyConnected: return "fc";
        case Kind::Conv3D: return "conv3d";
        case Kind::TrilinearUpsample: return "upsample";
        case Kind::LeakyReLU: return "leaky_relu";
        case Kind::ValvedLeakyReLU: return "valved_leaky_relu";
        case Kind::Sigmoid: return "sigmoid";
        case Kind::Reshape: return "reshape";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Fully connected

Tensor fc_forward(const Tensor& in, const Tensor& weights, const Tensor& bias) {
    if (in.ndim() != 2)
        throw DimensionError("fc_forward: input must be [batch, in_features], got " +
                             shape_str(in.shape()));
    const std::size_t B = in.dim(0), I = in.dim(1);
    if (weights.ndim() != 2 || weights.dim(0) != I)
        throw DimensionError("fc_forward: weight axis 0 (" +
                             std::to_string(weights.ndim() == 2 ? weights.dim(0) : 0) +
                             ") != in_features (" + std::to_string(I) + ")");
    const std::size_t O = weights.dim(1);
    if (bias.numel() != O)
        throw DimensionError("fc_forward: bias axis 0 != out_features");

    Tensor out({B, O});
    for (std::size_t b = 0; b < B; ++b) {
        double* ob = out.data() + b * O;
        for (std::size_t j = 0; j < O; ++j) ob[j] = bias[j];
        const double* ib = in.data() + b * I;
        for (std::size_t i = 0; i < I; ++i) {
            const double x = ib[i];
            if (x == 0.0) continue;
            const double* wr = weights.data() + i * O;
            for (std::size_t j = 0; j < O; ++j) ob[j] += x * wr[j];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Conv3D: kernel 3, stride 1, zero same-padding (width 1 per face).

Tensor conv3d_forward(const Tensor& in, const Tensor& kernels, const Tensor& bias) {
    if (in.ndim() != 5)
        throw DimensionError("conv3d_forward: input must be [batch, C, X, Y, Z], got " +
                             shape_str(in.shape()));
    if (kernels.ndim() != 5 || kernels.dim(2) != 3 || kernels.dim(3) != 3 || kernels.dim(4) != 3)
        throw DimensionError("conv3d_forward: kernels must be [Cout, Cin, 3, 3, 3]");
    const std::size_t B = in.dim(0), Cin = in.dim(1);
    const std::size_t X = in.dim(2), Y = in.dim(3), Z = in.dim(4);
    const std::size_t Cout = kernels.dim(0);
    if (kernels.dim(1) != Cin)
        throw DimensionError("conv3d_forward: kernel axis 1 (Cin=" +
                             std::to_string(kernels.dim(1)) + ") != input axis 1 (" +
                             std::to_string(Cin) + ")");
    if (bias.numel() != Cout)
        throw DimensionError("conv3d_forward: bias axis 0 != Cout");

    const std::size_t vol = X * Y * Z;
    Tensor out({B, Cout, X, Y, Z});
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t co = 0; co < Cout; ++co) {
            double* oc = out.data() + (b * Cout + co) * vol;
            std::fill(oc, oc + vol, bias[co]);
            for (std::size_t ci = 0; ci < Cin; ++ci) {
                const double* ic = in.data() + (b * Cin + ci) * vol;
                const double* k = kernels.data() + (co * Cin + ci) * 27;
                for (int kx = 0; kx < 3; ++kx) {
                    const int dx = kx - 1;
                    const std::size_t x0 = dx < 0 ? 1 : 0;
                    const std::size_t x1 = dx > 0 ? X - 1 : X;
                    for (int ky = 0; ky < 3; ++ky) {
                        const int dy = ky - 1;
                        const std::size_t y0 = dy < 0 ? 1 : 0;
                        const std::size_t y1 = dy > 0 ? Y - 1 : Y;
                        for (int kz = 0; kz < 3; ++kz) {
                            const int dz = kz - 1;
                            const std::size_t z0 = dz < 0 ? 1 : 0;
                            const std::size_t z1 = dz > 0 ? Z - 1 : Z;
                            const double w = k[(kx * 3 + ky) * 3 + kz];
                            if (w == 0.0) continue;
                            const std::size_t zn = z1 - z0;
                            for (std::size_t x = x0; x < x1; ++x) {
                                for (std::size_t y = y0; y < y1; ++y) {
                                    const double* src =
                                        ic + ((x + dx) * Y + (y + dy)) * Z + (z0 + dz);
                                    double* dst = oc + (x * Y + y) * Z + z0;
                                    for (std::size_t z = 0; z < zn; ++z) dst[z] += w * src[z];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

// Gradient w.r.t. the conv input: correlation of grad_out with the
// spatially-flipped kernel, channel axes swapped.
static Tensor conv3d_backward_input(const Tensor& grad_out, const Tensor& kernels,
                                    std::size_t Cin) {
    const std::size_t B = grad_out.dim(0), Cout = grad_out.dim(1);
    const std::size_t X = grad_out.dim(2), Y = grad_out.dim(3), Z = grad_out.dim(4);
    const std::size_t vol = X * Y * Z;
    Tensor gin({B, Cin, X, Y, Z});
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t ci = 0; ci < Cin; ++ci) {
            double* gc = gin.data() + (b * Cin + ci) * vol;
            for (std::size_t co = 0; co < Cout; ++co) {
                const double* oc = grad_out.data() + (b * Cout + co) * vol;
                const double* k = kernels.data() + (co * Cin + ci) * 27;
                for (int kx = 0; kx < 3; ++kx) {
                    const int dx = 1 - kx;  // flipped
                    const std::size_t x0 = dx < 0 ? 1 : 0;
                    const std::size_t x1 = dx > 0 ? X - 1 : X;
                    for (int ky = 0; ky < 3; ++ky) {
                        const int dy = 1 - ky;
                        const std::size_t y0 = dy < 0 ? 1 : 0;
                        const std::size_t y1 = dy > 0 ? Y - 1 : Y;
                        for (int kz = 0; kz < 3; ++kz) {
                            const int dz = 1 - kz;
                            const std::size_t z0 = dz < 0 ? 1 : 0;
                            const std::size_t z1 = dz > 0 ? Z - 1 : Z;
                            const double w = k[(kx * 3 + ky) * 3 + kz];
                            if (w == 0.0) continue;
                            const std::size_t zn = z1 - z0;
                            for (std::size_t x = x0; x < x1; ++x) {
                                for (std::size_t y = y0; y < y1; ++y) {
                                    const double* src =
                                        oc + ((x + dx) * Y + (y + dy)) * Z + (z0 + dz);
                                    double* dst = gc + (x * Y + y) * Z + z0;
                                    for (std::size_t z = 0; z < zn; ++z) dst[z] += w * src[z];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return gin;
}

static void conv3d_backward_params(const Tensor& grad_out, const Tensor& in,
                                   std::vector<double>& gw, std::vector<double>& gb) {
    const std::size_t B = in.dim(0), Cin = in.dim(1);
    const std::size_t X = in.dim(2), Y = in.dim(3), Z = in.dim(4);
    const std::size_t Cout = grad_out.dim(1);
    const std::size_t vol = X * Y * Z;
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t co = 0; co < Cout; ++co) {
            const double* oc = grad_out.data() + (b * Cout + co) * vol;
            double acc_b = 0.0;
            for (std::size_t i = 0; i < vol; ++i) acc_b += oc[i];
            gb[co] += acc_b;
            for (std::size_t ci = 0; ci < Cin; ++ci) {
                const double* ic = in.data() + (b * Cin + ci) * vol;
                double* gk = gw.data() + (co * Cin + ci) * 27;
                for (int kx = 0; kx < 3; ++kx) {
                    const int dx = kx - 1;
                    const std::size_t x0 = dx < 0 ? 1 : 0;
                    const std::size_t x1 = dx > 0 ? X - 1 : X;
                    for (int ky = 0; ky < 3; ++ky) {
                        const int dy = ky - 1;
                        const std::size_t y0 = dy < 0 ? 1 : 0;
                        const std::size_t y1 = dy > 0 ? Y - 1 : Y;
                        for (int kz = 0; kz < 3; ++kz) {
                            const int dz = kz - 1;
                            const std::size_t z0 = dz < 0 ? 1 : 0;
                            const std::size_t z1 = dz > 0 ? Z - 1 : Z;
                            const std::size_t zn = z1 - z0;
                            double acc = 0.0;
                            for (std::size_t x = x0; x < x1; ++x) {
                                for (std::size_t y = y0; y < y1; ++y) {
                                    const double* src =
                                        ic + ((x + dx) * Y + (y + dy)) * Z + (z0 + dz);
                                    const double* go = oc + (x * Y + y) * Z + z0;
                                    for (std::size_t z = 0; z < zn; ++z) acc += go[z] * src[z];
                                }
                            }
                            gk[(kx * 3 + ky) * 3 + kz] += acc;
                        }
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Trilinear upsampling, scale 2, half-pixel (align_corners=false) convention.

namespace {
struct AxisTable {
    std::vector<std::size_t> lo, hi;
    std::vector<double> w1;  // weight of hi sample
};

AxisTable axis_table(std::size_t n_in) {
    AxisTable t;
    const std::size_t n_out = 2 * n_in;
    t.lo.resize(n_out);
    t.hi.resize(n_out);
    t.w1.resize(n_out);
    for (std::size_t o = 0; o < n_out; ++o) {
        double f = (static_cast<double>(o) + 0.5) * 0.5 - 0.5;
        if (f < 0.0) f = 0.0;
        const double fmax = static_cast<double>(n_in - 1);
        if (f > fmax) f = fmax;
        const auto lo = static_cast<std::size_t>(f);
        t.lo[o] = lo;
        t.hi[o] = std::min(lo + 1, n_in - 1);
        t.w1[o] = f - static_cast<double>(lo);
    }
    return t;
}
}  // namespace

Tensor upsample_trilinear_forward(const Tensor& in) {
    if (in.ndim() != 5)
        throw DimensionError("upsample: input must be [batch, C, X, Y, Z], got " +
                             shape_str(in.shape()));
    const std::size_t B = in.dim(0), C = in.dim(1);
    const std::size_t X = in.dim(2), Y = in.dim(3), Z = in.dim(4);
    const AxisTable tx = axis_table(X), ty = axis_table(Y), tz = axis_table(Z);
    Tensor out({B, C, 2 * X, 2 * Y, 2 * Z});
    const std::size_t vin = X * Y * Z, vout = 8 * vin;
    for (std::size_t bc = 0; bc < B * C; ++bc) {
        const double* ic = in.data() + bc * vin;
        double* oc = out.data() + bc * vout;
        for (std::size_t ox = 0; ox < 2 * X; ++ox) {
            const std::size_t x0 = tx.lo[ox], x1 = tx.hi[ox];
            const double wx1 = tx.w1[ox], wx0 = 1.0 - wx1;
            for (std::size_t oy = 0; oy < 2 * Y; ++oy) {
                const std::size_t y0 = ty.lo[oy], y1 = ty.hi[oy];
                const double wy1 = ty.w1[oy], wy0 = 1.0 - wy1;
                const double* r00 = ic + (x0 * Y + y0) * Z;
                const double* r01 = ic + (x0 * Y + y1) * Z;
                const double* r10 = ic + (x1 * Y + y0) * Z;
                const double* r11 = ic + (x1 * Y + y1) * Z;
                double* dst = oc + (ox * 2 * Y + oy) * 2 * Z;
                for (std::size_t oz = 0; oz < 2 * Z; ++oz) {
                    const std::size_t z0 = tz.lo[oz], z1 = tz.hi[oz];
                    const double wz1 = tz.w1[oz], wz0 = 1.0 - wz1;
                    const double c00 = wz0 * r00[z0] + wz1 * r00[z1];
                    const double c01 = wz0 * r01[z0] + wz1 * r01[z1];
                    const double c10 = wz0 * r10[z0] + wz1 * r10[z1];
                    const double c11 = wz0 * r11[z0] + wz1 * r11[z1];
                    dst[oz] = wx0 * (wy0 * c00 + wy1 * c01) + wx1 * (wy0 * c10 + wy1 * c11);
                }
            }
        }
    }
    return out;
}

static Tensor upsample_trilinear_backward(const Tensor& grad_out,
                                          const std::vector<std::size_t>& in_shape) {
    const std::size_t B = in_shape[0], C = in_shape[1];
    const std::size_t X = in_shape[2], Y = in_shape[3], Z = in_shape[4];
    const AxisTable tx = axis_table(X), ty = axis_table(Y), tz = axis_table(Z);
    Tensor gin(in_shape);
    const std::size_t vin = X * Y * Z, vout = 8 * vin;
    for (std::size_t bc = 0; bc < B * C; ++bc) {
        double* gc = gin.data() + bc * vin;
        const double* oc = grad_out.data() + bc * vout;
        for (std::size_t ox = 0; ox < 2 * X; ++ox) {
            const std::size_t x0 = tx.lo[ox], x1 = tx.hi[ox];
            const double wx1 = tx.w1[ox], wx0 = 1.0 - wx1;
            for (std::size_t oy = 0; oy < 2 * Y; ++oy) {
                const std::size_t y0 = ty.lo[oy], y1 = ty.hi[oy];
                const double wy1 = ty.w1[oy], wy0 = 1.0 - wy1;
                double* r00 = gc + (x0 * Y + y0) * Z;
                double* r01 = gc + (x0 * Y + y1) * Z;
                double* r10 = gc + (x1 * Y + y0) * Z;
                double* r11 = gc + (x1 * Y + y1) * Z;
                const double* src = oc + (ox * 2 * Y + oy) * 2 * Z;
                for (std::size_t oz = 0; oz < 2 * Z; ++oz) {
                    const std::size_t z0 = tz.lo[oz], z1 = tz.hi[oz];
                    const double wz1 = tz.w1[oz], wz0 = 1.0 - wz1;
                    const double g = src[oz];
                    r00[z0] += wx0 * wy0 * wz0 * g;
                    r00[z1] += wx0 * wy0 * wz1 * g;
                    r01[z0] += wx0 * wy1 * wz0 * g;
                    r01[z1] += wx0 * wy1 * wz1 * g;
                    r10[z0] += wx1 * wy0 * wz0 * g;
                    r10[z1] += wx1 * wy0 * wz1 * g;
                    r11[z0] += wx1 * wy1 * wz0 * g;
                    r11[z1] += wx1 * wy1 * wz1 * g;
                }
            }
        }
    }
    return gin;
}

// ---------------------------------------------------------------------------
// Activations

Tensor leaky_relu(const Tensor& in, double slope) {
    Tensor out = in;
    for (double& v : out.vec())
        if (v < 0.0) v *= slope;
    return out;
}

Tensor valved_leaky_relu(const Tensor& in, double slope, Mode mode) {
    Tensor out = in;
    if (mode == Mode::Train) {
        for (double& v : out.vec())
            if (v < 0.0) v *= slope;
    } else {
        for (double& v : out.vec())
            if (v < 0.0) v = 0.0;
    }
    return out;
}

Tensor sigmoid(const Tensor& in) {
    Tensor out = in;
    for (double& v : out.vec()) v = 1.0 / (1.0 + std::exp(-v));
    return out;
}

// ---------------------------------------------------------------------------
// Layer classes

namespace {

class FcLayer final : public Layer {
public:
    explicit FcLayer(LayerSpec spec)
        : Layer(std::move(spec)),
          weights_({spec_.in_features, spec_.out_features}),
          bias_({spec_.out_features}) {}

    Tensor forward(const Tensor& in, Mode) override {
        input_ = in;
        return fc_forward(in, weights_, bias_);
    }

    Tensor backward(const Tensor& grad_out) override {
        const std::size_t B = input_.dim(0), I = spec_.in_features, O = spec_.out_features;
        auto& gw = weights_.grad();
        auto& gb = bias_.grad();
        Tensor gin({B, I});
        for (std::size_t b = 0; b < B; ++b) {
            const double* go = grad_out.data() + b * O;
            const double* ib = input_.data() + b * I;
            for (std::size_t j = 0; j < O; ++j) gb[j] += go[j];
            for (std::size_t i = 0; i < I; ++i) {
                const double* wr = weights_.data() + i * O;
                double* gwr = gw.data() + i * O;
                double acc = 0.0;
                const double x = ib[i];
                for (std::size_t j = 0; j < O; ++j) {
                    acc += wr[j] * go[j];
                    gwr[j] += x * go[j];
                }
                gin.data()[b * I + i] = acc;
            }
        }
        return gin;
    }

    std::vector<Tensor*> params() override { return {&weights_, &bias_}; }
    std::vector<std::string> param_names() const override { return {"weight", "bias"}; }

private:
    Tensor weights_, bias_, input_;
};

class Conv3dLayer final : public Layer {
public:
    explicit Conv3dLayer(LayerSpec spec)
        : Layer(std::move(spec)),
          kernels_({spec_.out_channels, spec_.in_channels, 3, 3, 3}),
          bias_({spec_.out_channels}) {}

    Tensor forward(const Tensor& in, Mode) override {
        input_ = in;
        return conv3d_forward(in, kernels_, bias_);
    }

    Tensor backward(const Tensor& grad_out) override {
        conv3d_backward_params(grad_out, input_, kernels_.grad(), bias_.grad());
        return conv3d_backward_input(grad_out, kernels_, spec_.in_channels);
    }

    std::vector<Tensor*> params() override { return {&kernels_, &bias_}; }
    std::vector<std::string> param_names() const override { return {"weight", "bias"}; }

private:
    Tensor kernels_, bias_, input_;
};

class UpsampleLayer final : public Layer {
public:
    using Layer::Layer;

    Tensor forward(const Tensor& in, Mode) override {
        in_shape_ = in.shape();
        return upsample_trilinear_forward(in);
    }

    Tensor backward(const Tensor& grad_out) override {
        return upsample_trilinear_backward(grad_out, in_shape_);
    }

private:
    std::vector<std::size_t> in_shape_;
};

class LeakyLayer final : public Layer {
public:
    using Layer::Layer;

    Tensor forward(const Tensor& in, Mode) override {
        input_ = in;
        return leaky_relu(in, spec_.slope);
    }

    Tensor backward(const Tensor& grad_out) override {
        Tensor gin = grad_out;
        for (std::size_t i = 0; i < gin.numel(); ++i)
            if (input_[i] < 0.0) gin[i] *= spec_.slope;
        return gin;
    }

private:
    Tensor input_;
};

class ValvedLeakyLayer final : public Layer {
public:
    using Layer::Layer;

    Tensor forward(const Tensor& in, Mode mode) override {
        input_ = in;
        mode_ = mode;
        return valved_leaky_relu(in, spec_.slope, mode);
    }

    Tensor backward(const Tensor& grad_out) override {
        Tensor gin = grad_out;
        const double neg = mode_ == Mode::Train ? spec_.slope : 0.0;
        for (std::size_t i = 0; i < gin.numel(); ++i)
            if (input_[i] < 0.0) gin[i] *= neg;
        return gin;
    }

private:
    Tensor input_;
    Mode mode_ = Mode::Train;
};

class SigmoidLayer final : public Layer {
public:
    using Layer::Layer;

    Tensor forward(const Tensor& in, Mode) override {
        output_ = sigmoid(in);
        return output_;
    }

    Tensor backward(const Tensor& grad_out) override {
        Tensor gin = grad_out;
        for (std::size_t i = 0; i < gin.numel(); ++i) {
            const double s = output_[i];
            gin[i] *= s * (1.0 - s);
        }
        return gin;
    }

private:
    Tensor output_;
};

class ReshapeLayer final : public Layer {
public:
    using Layer::Layer;

    Tensor forward(const Tensor& in, Mode) override {
        in_shape_ = in.shape();
        std::vector<std::size_t> out_shape = {in.dim(0)};
        out_shape.insert(out_shape.end(), spec_.target_shape.begin(), spec_.target_shape.end());
        return in.reshaped(std::move(out_shape));
    }

    Tensor backward(const Tensor& grad_out) override { return grad_out.reshaped(in_shape_); }

private:
    std::vector<std::size_t> in_shape_;
};

}  // namespace

std::unique_ptr<Layer> make_layer(const LayerSpec& spec) {
    switch (spec.kind) {
        case LayerSpec::Kind::FullyConnected: return std::make_unique<FcLayer>(spec);
        case LayerSpec::Kind::Conv3D: return std::make_unique<Conv3dLayer>(spec);
        case LayerSpec::Kind::TrilinearUpsample: return std::make_unique<UpsampleLayer>(spec);
        case LayerSpec::Kind::LeakyReLU: return std::make_unique<LeakyLayer>(spec);
        case LayerSpec::Kind::ValvedLeakyReLU: return std::make_unique<ValvedLeakyLayer>(spec);
        case LayerSpec::Kind::Sigmoid: return std::make_unique<SigmoidLayer>(spec);
        case LayerSpec::Kind::Reshape: return std::make_unique<ReshapeLayer>(spec);
    }
    throw ConfigError("make_layer: unknown layer kind");
}

}  // namespace meltpool
