#pragma once

#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bsdh/tensor.hpp"

namespace bsdh {

// Smooth sign surrogate (1 - e^{-beta v}) / (1 + e^{-beta v}), identical to
// tanh(beta v / 2). beta = 2 gives the standard tanh; large beta approaches
// the sign function. Computed with one-sided exponentials so it never
// overflows.
double tanh_like(double v, double beta);
// Exact derivative: beta * (1 - tanh_like(v, beta)^2) / 2.
double tanh_like_grad(double v, double beta);

enum class LayerKind { Conv2d, AvgPool2d, FullyConnected, Relu, TanhLike, BitWeights };

// One stage of the feedforward stack. build() fixes the input shape,
// validates it, and allocates parameters; forward/backward are exact
// hand-derived passes over a single example.
class Layer {
public:
    virtual ~Layer() = default;

    virtual LayerKind kind() const = 0;
    // Compact textual form ("conv:32:5:2", "fc:512", ...), used by the
    // checkpoint header and round-tripped by make_layer().
    virtual std::string spec_string() const = 0;

    virtual void build(const std::vector<std::size_t>& in_shape, std::mt19937_64& rng) = 0;
    const std::vector<std::size_t>& input_shape() const { return in_shape_; }
    const std::vector<std::size_t>& output_shape() const { return out_shape_; }

    virtual void forward(const Tensor& in, Tensor& out) const = 0;
    // Accumulates (+=) parameter gradients into gparams (one tensor per
    // parameter, shape-matched) and writes the input gradient.
    virtual void backward(const Tensor& in, const Tensor& out, const Tensor& out_grad,
                          Tensor& in_grad, std::span<Tensor> gparams) const = 0;

    virtual std::vector<Tensor*> params() { return {}; }
    virtual std::vector<const Tensor*> params() const { return {}; }

protected:
    std::vector<std::size_t> in_shape_;
    std::vector<std::size_t> out_shape_;
};

class Conv2dLayer final : public Layer {
public:
    Conv2dLayer(std::size_t filters, std::size_t kernel, std::size_t stride);
    LayerKind kind() const override { return LayerKind::Conv2d; }
    std::string spec_string() const override;
    void build(const std::vector<std::size_t>& in_shape, std::mt19937_64& rng) override;
    void forward(const Tensor& in, Tensor& out) const override;
    void backward(const Tensor& in, const Tensor& out, const Tensor& out_grad,
                  Tensor& in_grad, std::span<Tensor> gparams) const override;
    std::vector<Tensor*> params() override { return {&weight_, &bias_}; }
    std::vector<const Tensor*> params() const override { return {&weight_, &bias_}; }

    Tensor weight_; // [filters, in_channels, kernel, kernel]
    Tensor bias_;   // [filters]

private:
    std::size_t filters_, kernel_, stride_;
};

class AvgPool2dLayer final : public Layer {
public:
    AvgPool2dLayer(std::size_t window, std::size_t stride);
    LayerKind kind() const override { return LayerKind::AvgPool2d; }
    std::string spec_string() const override;
    void build(const std::vector<std::size_t>& in_shape, std::mt19937_64& rng) override;
    void forward(const Tensor& in, Tensor& out) const override;
    void backward(const Tensor& in, const Tensor& out, const Tensor& out_grad,
                  Tensor& in_grad, std::span<Tensor> gparams) const override;

private:
    std::size_t window_, stride_;
};

class FullyConnectedLayer final : public Layer {
public:
    explicit FullyConnectedLayer(std::size_t units);
    LayerKind kind() const override { return LayerKind::FullyConnected; }
    std::string spec_string() const override;
    void build(const std::vector<std::size_t>& in_shape, std::mt19937_64& rng) override;
    void forward(const Tensor& in, Tensor& out) const override;
    void backward(const Tensor& in, const Tensor& out, const Tensor& out_grad,
                  Tensor& in_grad, std::span<Tensor> gparams) const override;
    std::vector<Tensor*> params() override { return {&weight_, &bias_}; }
    std::vector<const Tensor*> params() const override { return {&weight_, &bias_}; }

    Tensor weight_; // [units, fan_in]
    Tensor bias_;   // [units]

private:
    std::size_t units_;
};

class ReluLayer final : public Layer {
public:
    LayerKind kind() const override { return LayerKind::Relu; }
    std::string spec_string() const override { return "relu"; }
    void build(const std::vector<std::size_t>& in_shape, std::mt19937_64&) override;
    void forward(const Tensor& in, Tensor& out) const override;
    void backward(const Tensor& in, const Tensor& out, const Tensor& out_grad,
                  Tensor& in_grad, std::span<Tensor> gparams) const override;
};

class TanhLikeLayer final : public Layer {
public:
    LayerKind kind() const override { return LayerKind::TanhLike; }
    std::string spec_string() const override { return "tanh_like"; }
    void build(const std::vector<std::size_t>& in_shape, std::mt19937_64&) override;
    void forward(const Tensor& in, Tensor& out) const override;
    void backward(const Tensor& in, const Tensor& out, const Tensor& out_grad,
                  Tensor& in_grad, std::span<Tensor> gparams) const override;

    void set_beta(double beta);
    double beta() const { return beta_; }

private:
    double beta_ = 2.0;
};

// Element-wise scale by |w_i|. w is stored unconstrained and enters only as
// |w_i| here (and as w_i^2 in affinities), so its sign never matters.
class BitWeightsLayer final : public Layer {
public:
    LayerKind kind() const override { return LayerKind::BitWeights; }
    std::string spec_string() const override { return "bit_weights"; }
    void build(const std::vector<std::size_t>& in_shape, std::mt19937_64&) override;
    void forward(const Tensor& in, Tensor& out) const override;
    void backward(const Tensor& in, const Tensor& out, const Tensor& out_grad,
                  Tensor& in_grad, std::span<Tensor> gparams) const override;
    std::vector<Tensor*> params() override { return {&weight_}; }
    std::vector<const Tensor*> params() const override { return {&weight_}; }

    Tensor weight_; // [q], initialized to 1 (unweighted Hamming start)
};

// Parses a spec_string() back into a layer (checkpoint loading).
std::unique_ptr<Layer> make_layer(const std::string& spec);

} // namespace bsdh
