#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "bsdh/layers.hpp"
#include "bsdh/tensor.hpp"

namespace bsdh {

// One gradient tensor per model parameter tensor, in declaration order.
using GradientSet = std::vector<Tensor>;

// Intermediate activations of one forward pass: acts[0] is the input image,
// acts[i+1] the output of layer i. Owned by the caller so per-thread reuse
// is possible.
struct ActivationCache {
    std::vector<Tensor> acts;
};

// Feedforward stack ending in fc(q) -> tanh_like -> bit_weights. The
// bit-weight vector w scales code entry i by |w_i|; retrieval weights are
// w_i^2.
class Model {
public:
    Model() = default;

    // preset: "paper" (conv32/64/128 + fc512), "desk" (conv16 + fc128) or
    // "mlp" (fc256), each followed by fc(q), tanh_like, bit_weights.
    static Model make(const std::string& preset, const std::vector<std::size_t>& input_shape,
                      std::size_t code_bits, std::uint64_t seed);
    // Builds from explicit layer spec strings (checkpoint loading).
    static Model from_specs(const std::string& preset_name,
                            const std::vector<std::size_t>& input_shape,
                            std::size_t code_bits,
                            const std::vector<std::string>& layer_specs,
                            std::uint64_t seed);

    // Weighted code of one image: row_i = |w_i| * o(phi(I))_i. If cache is
    // given it is filled for a later backward_one; if unweighted is given it
    // receives the tanh output r (the relaxed code before weighting).
    std::vector<double> forward_one(const Tensor& image, ActivationCache* cache = nullptr,
                                    std::vector<double>* unweighted = nullptr) const;

    // Exact gradients of <weighted output, out_grad> for every parameter,
    // accumulated (+=) into grads. cache must come from forward_one on this
    // model with unchanged parameters.
    void backward_one(const ActivationCache& cache, const std::vector<double>& out_grad,
                      GradientSet& grads) const;

    GradientSet zero_gradients() const;

    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;

    std::size_t code_bits() const { return code_bits_; }
    double beta() const { return beta_; }
    void set_beta(double beta);
    const std::vector<double>& bit_weights() const;
    const std::vector<std::size_t>& input_shape() const { return input_shape_; }
    const std::string& preset() const { return preset_; }
    std::vector<std::string> layer_specs() const;
    std::size_t layer_count() const { return layers_.size(); }

    std::uint64_t iterations_trained = 0;

private:
    void check_image(const Tensor& image) const;

    std::string preset_;
    std::vector<std::size_t> input_shape_;
    std::size_t code_bits_ = 0;
    double beta_ = 2.0;
    std::vector<std::unique_ptr<Layer>> layers_;
};

// Momentum SGD; velocity buffers persist across steps.
//   v <- momentum * v + (g + weight_decay * p);  p <- p - lr * v
class SgdOptimizer {
public:
    explicit SgdOptimizer(const Model& model);
    void step(Model& model, const GradientSet& grads, double lr, double momentum,
              double weight_decay);

private:
    std::vector<Tensor> velocity_;
};

// A differentiable scalar of the batch of weighted outputs, with its exact
// gradient w.r.t. each output row.
struct LossClosure {
    std::function<double(const std::vector<std::vector<double>>&)> value;
    std::function<std::vector<std::vector<double>>(const std::vector<std::vector<double>>&)> grad;
};

// Compares analytic parameter gradients against central finite differences
// on a random subsample of parameters (up to per_tensor entries from each
// parameter tensor). Returns the worst relative error seen. Entries where
// both sides are below 1e-7 in magnitude are counted as matching; with
// large beta the tanh_like saturates and finite differences degrade, so
// callers should check near beta = 2.
double gradient_check(Model& model, const std::vector<Tensor>& images, const LossClosure& loss,
                      double step, std::size_t per_tensor, std::uint64_t seed);

} // namespace bsdh
