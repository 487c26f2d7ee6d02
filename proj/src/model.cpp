#include "bsdh/model.hpp"

#include <algorithm>
#include <cmath>

#include "bsdh/error.hpp"
#include "bsdh/rng.hpp"

namespace bsdh {

namespace {

std::vector<std::string> preset_specs(const std::string& preset, std::size_t q) {
    const std::string fcq = "fc:" + std::to_string(q);
    if (preset == "paper")
        return {"conv:32:5:2", "relu",      "avgpool:2:1", "conv:64:5:2", "relu",
                "avgpool:2:1", "conv:128:5:2", "relu",     "avgpool:2:1", "fc:512",
                "relu",        fcq,         "tanh_like",   "bit_weights"};
    if (preset == "desk")
        return {"conv:16:5:2", "relu", "avgpool:2:1", "fc:128", "relu",
                fcq,           "tanh_like", "bit_weights"};
    if (preset == "mlp")
        return {"fc:256", "relu", fcq, "tanh_like", "bit_weights"};
    throw InputError("unknown architecture preset '" + preset + "'");
}

} // namespace

Model Model::make(const std::string& preset, const std::vector<std::size_t>& input_shape,
                  std::size_t code_bits, std::uint64_t seed) {
    return from_specs(preset, input_shape, code_bits, preset_specs(preset, code_bits), seed);
}

Model Model::from_specs(const std::string& preset_name,
                        const std::vector<std::size_t>& input_shape, std::size_t code_bits,
                        const std::vector<std::string>& layer_specs, std::uint64_t seed) {
    if (code_bits == 0) throw InputError("code_bits must be >= 1");
    Model m;
    m.preset_ = preset_name;
    m.input_shape_ = input_shape;
    m.code_bits_ = code_bits;
    auto rng = make_rng(seed, 0x1717);
    std::vector<std::size_t> shape = input_shape;
    for (const std::string& spec : layer_specs) {
        auto layer = make_layer(spec);
        layer->build(shape, rng);
        shape = layer->output_shape();
        m.layers_.push_back(std::move(layer));
    }
    const std::size_t n = m.layers_.size();
    if (n < 3 || m.layers_[n - 3]->kind() != LayerKind::FullyConnected ||
        m.layers_[n - 2]->kind() != LayerKind::TanhLike ||
        m.layers_[n - 1]->kind() != LayerKind::BitWeights)
        throw InputError("model must end in fc(q), tanh_like, bit_weights");
    if (shape != std::vector<std::size_t>{code_bits})
        throw InputError("model output length does not match code_bits");
    return m;
}

void Model::check_image(const Tensor& image) const {
    if (image.shape != input_shape_)
        throw InputError("forward: image shape does not match model input");
    if (!image.all_finite()) throw NumericError("forward: non-finite image");
}

std::vector<double> Model::forward_one(const Tensor& image, ActivationCache* cache,
                                       std::vector<double>* unweighted) const {
    check_image(image);
    ActivationCache local;
    ActivationCache& c = cache ? *cache : local;
    c.acts.resize(layers_.size() + 1);
    c.acts[0] = image;
    for (std::size_t i = 0; i < layers_.size(); ++i)
        layers_[i]->forward(c.acts[i], c.acts[i + 1]);
    if (unweighted) *unweighted = c.acts[layers_.size() - 1].data; // tanh output r
    const Tensor& out = c.acts.back();
    if (!out.all_finite()) throw NumericError("forward: non-finite output");
    return out.data;
}

void Model::backward_one(const ActivationCache& cache, const std::vector<double>& out_grad,
                         GradientSet& grads) const {
    if (cache.acts.size() != layers_.size() + 1)
        throw StateError("backward: cache does not match this model");
    if (out_grad.size() != code_bits_)
        throw InputError("backward: output gradient length != code_bits");

    // Locate each layer's gradient tensors inside the flat GradientSet.
    std::size_t slot = grads.size();
    Tensor gout({code_bits_}, out_grad);
    Tensor gin;
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const Layer& layer = *layers_[li];
        const std::size_t nparams = layer.params().size();
        slot -= nparams;
        layer.backward(cache.acts[li], cache.acts[li + 1], gout, gin,
                       std::span<Tensor>(grads.data() + slot, nparams));
        gout = std::move(gin);
    }
}

GradientSet Model::zero_gradients() const {
    GradientSet g;
    for (const Tensor* p : parameters()) g.push_back(Tensor(p->shape));
    return g;
}

std::vector<Tensor*> Model::parameters() {
    std::vector<Tensor*> out;
    for (auto& l : layers_)
        for (Tensor* p : l->params()) out.push_back(p);
    return out;
}

std::vector<const Tensor*> Model::parameters() const {
    std::vector<const Tensor*> out;
    for (const auto& l : layers_)
        for (const Tensor* p : static_cast<const Layer&>(*l).params()) out.push_back(p);
    return out;
}

void Model::set_beta(double beta) {
    if (beta < 2.0) throw InputError("beta must be >= 2");
    beta_ = beta;
    for (auto& l : layers_)
        if (l->kind() == LayerKind::TanhLike)
            static_cast<TanhLikeLayer&>(*l).set_beta(beta);
}

const std::vector<double>& Model::bit_weights() const {
    const auto& bw = static_cast<const BitWeightsLayer&>(*layers_.back());
    return bw.weight_.data;
}

std::vector<std::string> Model::layer_specs() const {
    std::vector<std::string> out;
    for (const auto& l : layers_) out.push_back(l->spec_string());
    return out;
}

// ----------------------------------------------------------------- SGD

SgdOptimizer::SgdOptimizer(const Model& model) {
    for (const Tensor* p : model.parameters()) velocity_.push_back(Tensor(p->shape));
}

void SgdOptimizer::step(Model& model, const GradientSet& grads, double lr, double momentum,
                        double weight_decay) {
    if (lr < 0.0) throw InputError("sgd: lr must be >= 0");
    auto params = model.parameters();
    if (grads.size() != params.size()) throw InputError("sgd: gradient/parameter count mismatch");
    for (std::size_t t = 0; t < params.size(); ++t) {
        Tensor& p = *params[t];
        const Tensor& g = grads[t];
        Tensor& v = velocity_[t];
        if (!g.same_shape(p)) throw InputError("sgd: gradient shape mismatch");
        for (std::size_t i = 0; i < p.numel(); ++i) {
            v[i] = momentum * v[i] + (g[i] + weight_decay * p[i]);
            p[i] -= lr * v[i];
        }
    }
}

// -------------------------------------------------------- gradient check

double gradient_check(Model& model, const std::vector<Tensor>& images, const LossClosure& loss,
                      double step, std::size_t per_tensor, std::uint64_t seed) {
    const std::size_t m = images.size();
    auto forward_all = [&]() {
        std::vector<std::vector<double>> outs(m);
        for (std::size_t j = 0; j < m; ++j) outs[j] = model.forward_one(images[j]);
        return outs;
    };

    // Analytic route: closure gradient w.r.t. outputs, then backprop per image.
    std::vector<ActivationCache> caches(m);
    std::vector<std::vector<double>> outs(m);
    for (std::size_t j = 0; j < m; ++j) outs[j] = model.forward_one(images[j], &caches[j]);
    const double base = loss.value(outs);
    if (!std::isfinite(base)) throw NumericError("gradient_check: non-finite loss");
    const auto out_grads = loss.grad(outs);
    GradientSet analytic = model.zero_gradients();
    for (std::size_t j = 0; j < m; ++j) model.backward_one(caches[j], out_grads[j], analytic);

    // Finite-difference route on a random subsample of parameter entries.
    auto rng = make_rng(seed, 0x6c);
    auto params = model.parameters();
    double worst = 0.0;
    for (std::size_t t = 0; t < params.size(); ++t) {
        Tensor& p = *params[t];
        const std::size_t n = p.numel();
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        if (n > per_tensor) {
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(per_tensor);
        }
        for (std::size_t i : idx) {
            const double saved = p[i];
            p[i] = saved + step;
            const double up = loss.value(forward_all());
            p[i] = saved - step;
            const double down = loss.value(forward_all());
            p[i] = saved;
            if (!std::isfinite(up) || !std::isfinite(down))
                throw NumericError("gradient_check: non-finite loss under perturbation");
            const double fd = (up - down) / (2.0 * step);
            const double an = analytic[t][i];
            const double scale = std::max(std::fabs(fd), std::fabs(an));
            if (scale < 1e-7) continue; // both effectively zero
            worst = std::max(worst, std::fabs(fd - an) / scale);
        }
    }
    return worst;
}

} // namespace bsdh
