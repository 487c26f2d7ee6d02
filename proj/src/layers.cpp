#include "bsdh/layers.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "bsdh/error.hpp"

namespace bsdh {

double tanh_like(double v, double beta) {
    const double x = beta * v;
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return (1.0 - e) / (1.0 + e);
    }
    const double e = std::exp(x);
    return (e - 1.0) / (e + 1.0);
}

double tanh_like_grad(double v, double beta) {
    const double o = tanh_like(v, beta);
    return beta * (1.0 - o * o) / 2.0;
}

namespace {

// Uniform in +-sqrt(6 / (fan_in + fan_out)), the usual variance-preserving
// choice for layers followed by tanh/relu.
void glorot_fill(Tensor& t, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    const double lim = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-lim, lim);
    for (double& v : t.data) v = dist(rng);
}

std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t s) {
    if (in < k) return 0;
    return (in - k) / s + 1;
}

} // namespace

// ---------------------------------------------------------------- Conv2d

Conv2dLayer::Conv2dLayer(std::size_t filters, std::size_t kernel, std::size_t stride)
    : filters_(filters), kernel_(kernel), stride_(stride) {
    if (filters == 0 || kernel == 0 || stride == 0)
        throw InputError("conv2d: filters, kernel and stride must be >= 1");
}

std::string Conv2dLayer::spec_string() const {
    std::ostringstream os;
    os << "conv:" << filters_ << ":" << kernel_ << ":" << stride_;
    return os.str();
}

void Conv2dLayer::build(const std::vector<std::size_t>& in_shape, std::mt19937_64& rng) {
    if (in_shape.size() != 3)
        throw InputError("conv2d: expected input shape [channels, height, width]");
    in_shape_ = in_shape;
    const std::size_t c = in_shape[0], h = in_shape[1], w = in_shape[2];
    const std::size_t oh = conv_out_dim(h, kernel_, stride_);
    const std::size_t ow = conv_out_dim(w, kernel_, stride_);
    if (oh == 0 || ow == 0)
        throw InputError("conv2d: kernel " + std::to_string(kernel_) +
                         " does not fit input " + std::to_string(h) + "x" + std::to_string(w));
    out_shape_ = {filters_, oh, ow};
    weight_ = Tensor({filters_, c, kernel_, kernel_});
    bias_ = Tensor({filters_});
    glorot_fill(weight_, c * kernel_ * kernel_, filters_ * kernel_ * kernel_, rng);
}

void Conv2dLayer::forward(const Tensor& in, Tensor& out) const {
    const std::size_t c = in_shape_[0], h = in_shape_[1], w = in_shape_[2];
    const std::size_t oh = out_shape_[1], ow = out_shape_[2];
    out = Tensor(out_shape_);
    const double* x = in.data.data();
    double* y = out.data.data();
    for (std::size_t f = 0; f < filters_; ++f) {
        const double* wf = weight_.data.data() + f * c * kernel_ * kernel_;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                double acc = bias_[f];
                for (std::size_t ic = 0; ic < c; ++ic) {
                    const double* xc = x + ic * h * w + oy * stride_ * w + ox * stride_;
                    const double* wc = wf + ic * kernel_ * kernel_;
                    for (std::size_t ky = 0; ky < kernel_; ++ky)
                        for (std::size_t kx = 0; kx < kernel_; ++kx)
                            acc += wc[ky * kernel_ + kx] * xc[ky * w + kx];
                }
                y[(f * oh + oy) * ow + ox] = acc;
            }
        }
    }
}

void Conv2dLayer::backward(const Tensor& in, const Tensor&, const Tensor& out_grad,
                           Tensor& in_grad, std::span<Tensor> gparams) const {
    const std::size_t c = in_shape_[0], h = in_shape_[1], w = in_shape_[2];
    const std::size_t oh = out_shape_[1], ow = out_shape_[2];
    in_grad = Tensor(in_shape_);
    Tensor& gw = gparams[0];
    Tensor& gb = gparams[1];
    const double* x = in.data.data();
    const double* gy = out_grad.data.data();
    double* gx = in_grad.data.data();
    for (std::size_t f = 0; f < filters_; ++f) {
        const double* wf = weight_.data.data() + f * c * kernel_ * kernel_;
        double* gwf = gw.data.data() + f * c * kernel_ * kernel_;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                const double g = gy[(f * oh + oy) * ow + ox];
                gb[f] += g;
                for (std::size_t ic = 0; ic < c; ++ic) {
                    const std::size_t xoff = ic * h * w + oy * stride_ * w + ox * stride_;
                    double* gwc = gwf + ic * kernel_ * kernel_;
                    const double* wc = wf + ic * kernel_ * kernel_;
                    for (std::size_t ky = 0; ky < kernel_; ++ky) {
                        for (std::size_t kx = 0; kx < kernel_; ++kx) {
                            gwc[ky * kernel_ + kx] += g * x[xoff + ky * w + kx];
                            gx[xoff + ky * w + kx] += g * wc[ky * kernel_ + kx];
                        }
                    }
                }
            }
        }
    }
}

// -------------------------------------------------------------- AvgPool2d

AvgPool2dLayer::AvgPool2dLayer(std::size_t window, std::size_t stride)
    : window_(window), stride_(stride) {
    if (window == 0 || stride == 0)
        throw InputError("avgpool2d: window and stride must be >= 1");
}

std::string AvgPool2dLayer::spec_string() const {
    std::ostringstream os;
    os << "avgpool:" << window_ << ":" << stride_;
    return os.str();
}

void AvgPool2dLayer::build(const std::vector<std::size_t>& in_shape, std::mt19937_64&) {
    if (in_shape.size() != 3)
        throw InputError("avgpool2d: expected input shape [channels, height, width]");
    in_shape_ = in_shape;
    const std::size_t oh = conv_out_dim(in_shape[1], window_, stride_);
    const std::size_t ow = conv_out_dim(in_shape[2], window_, stride_);
    if (oh == 0 || ow == 0)
        throw InputError("avgpool2d: window does not fit input");
    out_shape_ = {in_shape[0], oh, ow};
}

void AvgPool2dLayer::forward(const Tensor& in, Tensor& out) const {
    const std::size_t c = in_shape_[0], h = in_shape_[1], w = in_shape_[2];
    const std::size_t oh = out_shape_[1], ow = out_shape_[2];
    const double inv = 1.0 / static_cast<double>(window_ * window_);
    out = Tensor(out_shape_);
    for (std::size_t ic = 0; ic < c; ++ic) {
        const double* x = in.data.data() + ic * h * w;
        double* y = out.data.data() + ic * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                double acc = 0.0;
                for (std::size_t ky = 0; ky < window_; ++ky)
                    for (std::size_t kx = 0; kx < window_; ++kx)
                        acc += x[(oy * stride_ + ky) * w + ox * stride_ + kx];
                y[oy * ow + ox] = acc * inv;
            }
        }
    }
}

void AvgPool2dLayer::backward(const Tensor&, const Tensor&, const Tensor& out_grad,
                              Tensor& in_grad, std::span<Tensor>) const {
    const std::size_t c = in_shape_[0], h = in_shape_[1], w = in_shape_[2];
    const std::size_t oh = out_shape_[1], ow = out_shape_[2];
    const double inv = 1.0 / static_cast<double>(window_ * window_);
    in_grad = Tensor(in_shape_);
    for (std::size_t ic = 0; ic < c; ++ic) {
        const double* gy = out_grad.data.data() + ic * oh * ow;
        double* gx = in_grad.data.data() + ic * h * w;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                const double g = gy[oy * ow + ox] * inv;
                for (std::size_t ky = 0; ky < window_; ++ky)
                    for (std::size_t kx = 0; kx < window_; ++kx)
                        gx[(oy * stride_ + ky) * w + ox * stride_ + kx] += g;
            }
        }
    }
}

// --------------------------------------------------------- FullyConnected

FullyConnectedLayer::FullyConnectedLayer(std::size_t units) : units_(units) {
    if (units == 0) throw InputError("fc: units must be >= 1");
}

std::string FullyConnectedLayer::spec_string() const {
    return "fc:" + std::to_string(units_);
}

void FullyConnectedLayer::build(const std::vector<std::size_t>& in_shape, std::mt19937_64& rng) {
    in_shape_ = in_shape;
    const std::size_t fan_in = Tensor::count(in_shape);
    if (fan_in == 0) throw InputError("fc: empty input");
    out_shape_ = {units_};
    weight_ = Tensor({units_, fan_in});
    bias_ = Tensor({units_});
    glorot_fill(weight_, fan_in, units_, rng);
}

void FullyConnectedLayer::forward(const Tensor& in, Tensor& out) const {
    const std::size_t fan_in = weight_.shape[1];
    out = Tensor(out_shape_);
    const double* x = in.data.data();
    for (std::size_t u = 0; u < units_; ++u) {
        const double* wu = weight_.data.data() + u * fan_in;
        double acc = bias_[u];
        for (std::size_t i = 0; i < fan_in; ++i) acc += wu[i] * x[i];
        out[u] = acc;
    }
}

void FullyConnectedLayer::backward(const Tensor& in, const Tensor&, const Tensor& out_grad,
                                   Tensor& in_grad, std::span<Tensor> gparams) const {
    const std::size_t fan_in = weight_.shape[1];
    in_grad = Tensor(in_shape_);
    Tensor& gw = gparams[0];
    Tensor& gb = gparams[1];
    const double* x = in.data.data();
    double* gx = in_grad.data.data();
    for (std::size_t u = 0; u < units_; ++u) {
        const double g = out_grad[u];
        gb[u] += g;
        const double* wu = weight_.data.data() + u * fan_in;
        double* gwu = gw.data.data() + u * fan_in;
        for (std::size_t i = 0; i < fan_in; ++i) {
            gwu[i] += g * x[i];
            gx[i] += g * wu[i];
        }
    }
}

// --------------------------------------------------------------- Relu

void ReluLayer::build(const std::vector<std::size_t>& in_shape, std::mt19937_64&) {
    in_shape_ = in_shape;
    out_shape_ = in_shape;
}

void ReluLayer::forward(const Tensor& in, Tensor& out) const {
    out = Tensor(in.shape);
    for (std::size_t i = 0; i < in.numel(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void ReluLayer::backward(const Tensor& in, const Tensor&, const Tensor& out_grad,
                         Tensor& in_grad, std::span<Tensor>) const {
    in_grad = Tensor(in.shape);
    for (std::size_t i = 0; i < in.numel(); ++i)
        in_grad[i] = in[i] > 0.0 ? out_grad[i] : 0.0;
}

// ------------------------------------------------------------- TanhLike

void TanhLikeLayer::build(const std::vector<std::size_t>& in_shape, std::mt19937_64&) {
    in_shape_ = in_shape;
    out_shape_ = in_shape;
}

void TanhLikeLayer::set_beta(double beta) {
    if (beta < 2.0) throw InputError("tanh_like: beta must be >= 2");
    beta_ = beta;
}

void TanhLikeLayer::forward(const Tensor& in, Tensor& out) const {
    out = Tensor(in.shape);
    for (std::size_t i = 0; i < in.numel(); ++i) out[i] = tanh_like(in[i], beta_);
}

void TanhLikeLayer::backward(const Tensor&, const Tensor& out, const Tensor& out_grad,
                             Tensor& in_grad, std::span<Tensor>) const {
    // d o / d v = beta (1 - o^2) / 2, written in terms of the cached output.
    in_grad = Tensor(out.shape);
    for (std::size_t i = 0; i < out.numel(); ++i)
        in_grad[i] = out_grad[i] * beta_ * (1.0 - out[i] * out[i]) / 2.0;
}

// ----------------------------------------------------------- BitWeights

void BitWeightsLayer::build(const std::vector<std::size_t>& in_shape, std::mt19937_64&) {
    if (in_shape.size() != 1)
        throw InputError("bit_weights: expected a flat code vector input");
    in_shape_ = in_shape;
    out_shape_ = in_shape;
    weight_ = Tensor(in_shape);
    weight_.fill(1.0);
}

void BitWeightsLayer::forward(const Tensor& in, Tensor& out) const {
    out = Tensor(in.shape);
    for (std::size_t i = 0; i < in.numel(); ++i) out[i] = std::fabs(weight_[i]) * in[i];
}

void BitWeightsLayer::backward(const Tensor& in, const Tensor&, const Tensor& out_grad,
                               Tensor& in_grad, std::span<Tensor> gparams) const {
    in_grad = Tensor(in.shape);
    Tensor& gw = gparams[0];
    for (std::size_t i = 0; i < in.numel(); ++i) {
        const double w = weight_[i];
        const double s = w > 0.0 ? 1.0 : (w < 0.0 ? -1.0 : 0.0);
        in_grad[i] = std::fabs(w) * out_grad[i];
        gw[i] += s * in[i] * out_grad[i];
    }
}

// ----------------------------------------------------------- spec parsing

std::unique_ptr<Layer> make_layer(const std::string& spec) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : spec) {
        if (ch == ':') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    parts.push_back(cur);

    auto num = [&](std::size_t i) -> std::size_t {
        char* end = nullptr;
        const unsigned long v = std::strtoul(parts[i].c_str(), &end, 10);
        if (end == parts[i].c_str() || *end != '\0')
            throw FormatError("layer spec: bad number in '" + spec + "'");
        return static_cast<std::size_t>(v);
    };

    const std::string& head = parts[0];
    if (head == "conv" && parts.size() == 4)
        return std::make_unique<Conv2dLayer>(num(1), num(2), num(3));
    if (head == "avgpool" && parts.size() == 3)
        return std::make_unique<AvgPool2dLayer>(num(1), num(2));
    if (head == "fc" && parts.size() == 2)
        return std::make_unique<FullyConnectedLayer>(num(1));
    if (head == "relu" && parts.size() == 1) return std::make_unique<ReluLayer>();
    if (head == "tanh_like" && parts.size() == 1) return std::make_unique<TanhLikeLayer>();
    if (head == "bit_weights" && parts.size() == 1) return std::make_unique<BitWeightsLayer>();
    throw FormatError("layer spec: unknown layer '" + spec + "'");
}

} // namespace bsdh
