#include "bsdh/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "bsdh/checkpoint.hpp"
#include "bsdh/error.hpp"
#include "bsdh/parallel.hpp"
#include "bsdh/rng.hpp"
#include "bsdh/sampler.hpp"

namespace bsdh {

double beta_schedule(std::size_t iter, std::size_t total, double start, double end,
                     BetaShape shape) {
    if (iter == 0) return start;
    if (iter >= total) return end;
    const double frac = static_cast<double>(iter) / static_cast<double>(total);
    if (shape == BetaShape::Linear) return start + (end - start) * frac;
    return start * std::pow(end / start, frac);
}

void TrainHistory::save_csv(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw FormatError("history: cannot open '" + path + "' for writing");
    os << "iter,loss,margin,reg,active_frac,beta,lr\n";
    char buf[256];
    for (const TrainRecord& r : records) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.iteration,
                      r.loss, r.margin, r.regularizer, r.active_fraction, r.beta, r.lr);
        os << buf;
    }
}

// ------------------------------------------------------- batch kernels

namespace {
constexpr std::size_t kBlock = 16; // reduction block; fixed so results do not
                                   // depend on the thread count
}

void batch_forward_serial(const Model& model, const std::vector<const Tensor*>& images,
                          std::vector<std::vector<double>>& outputs,
                          std::vector<ActivationCache>& caches) {
    const std::size_t m = images.size();
    outputs.resize(m);
    caches.resize(m);
    for (std::size_t j = 0; j < m; ++j)
        outputs[j] = model.forward_one(*images[j], &caches[j]);
}

void batch_forward_omp(const Model& model, const std::vector<const Tensor*>& images,
                       std::vector<std::vector<double>>& outputs,
                       std::vector<ActivationCache>& caches) {
    const std::size_t m = images.size();
    outputs.resize(m);
    caches.resize(m);
    std::exception_ptr err;
#pragma omp parallel for schedule(static)
    for (std::size_t j = 0; j < m; ++j) {
        try {
            outputs[j] = model.forward_one(*images[j], &caches[j]);
        } catch (...) {
#pragma omp critical
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
}

namespace {

GradientSet batch_backward_blocked(const Model& model, const std::vector<ActivationCache>& caches,
                                   const std::vector<std::vector<double>>& output_grads,
                                   bool parallel) {
    const std::size_t m = caches.size();
    if (output_grads.size() != m)
        throw InputError("batch_backward: cache/gradient count mismatch");
    const std::size_t nblocks = (m + kBlock - 1) / kBlock;
    std::vector<GradientSet> partials(nblocks);
    std::exception_ptr err;

#pragma omp parallel for schedule(static) if (parallel)
    for (std::size_t b = 0; b < nblocks; ++b) {
        try {
            GradientSet part = model.zero_gradients();
            const std::size_t lo = b * kBlock;
            const std::size_t hi = std::min(m, lo + kBlock);
            for (std::size_t j = lo; j < hi; ++j)
                model.backward_one(caches[j], output_grads[j], part);
            partials[b] = std::move(part);
        } catch (...) {
#pragma omp critical
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);

    GradientSet total = std::move(partials[0]);
    for (std::size_t b = 1; b < nblocks; ++b)
        for (std::size_t t = 0; t < total.size(); ++t)
            for (std::size_t i = 0; i < total[t].numel(); ++i)
                total[t][i] += partials[b][t][i];
    return total;
}

} // namespace

GradientSet batch_backward_serial(const Model& model, const std::vector<ActivationCache>& caches,
                                  const std::vector<std::vector<double>>& output_grads) {
    return batch_backward_blocked(model, caches, output_grads, false);
}

GradientSet batch_backward_omp(const Model& model, const std::vector<ActivationCache>& caches,
                               const std::vector<std::vector<double>>& output_grads) {
    return batch_backward_blocked(model, caches, output_grads, true);
}

void batch_forward(const Model& model, const std::vector<const Tensor*>& images,
                   std::vector<std::vector<double>>& outputs,
                   std::vector<ActivationCache>& caches) {
    if (parallel_enabled()) batch_forward_omp(model, images, outputs, caches);
    else batch_forward_serial(model, images, outputs, caches);
}

GradientSet batch_backward(const Model& model, const std::vector<ActivationCache>& caches,
                           const std::vector<std::vector<double>>& output_grads) {
    return parallel_enabled() ? batch_backward_omp(model, caches, output_grads)
                              : batch_backward_serial(model, caches, output_grads);
}

// ------------------------------------------------------------- training

std::pair<Model, TrainHistory> train(const TrainConfig& cfg, const Dataset& dataset) {
    if (cfg.iterations < 1) throw InputError("train: iterations must be >= 1");
    if (cfg.lr < 0.0) throw InputError("train: lr must be >= 0");
    if (cfg.beta_start > cfg.beta_end) throw InputError("train: beta_start must be <= beta_end");

    Model model = Model::make(cfg.preset, dataset.feature_shape, cfg.code_bits, cfg.seed);
    SgdOptimizer opt(model);
    ObjectiveConfig ocfg = make_objective_config(cfg.code_bits, cfg.lambda);
    ocfg.normalize_margin = cfg.normalize_margin;
    if (cfg.hinge_floor) ocfg.hinge_floor = *cfg.hinge_floor;

    const std::size_t total = cfg.iterations;
    const std::size_t sched_total = total > 1 ? total - 1 : 1;
    const std::size_t decay_every =
        cfg.lr_decay_every ? cfg.lr_decay_every : std::max<std::size_t>(1, total / 4);

    TrainHistory history;
    history.records.reserve(total);

    std::vector<const Tensor*> images;
    std::vector<std::vector<double>> outputs;
    std::vector<ActivationCache> caches;

    for (std::size_t t = 0; t < total; ++t) {
        model.set_beta(beta_schedule(t, sched_total, cfg.beta_start, cfg.beta_end, cfg.beta_shape));
        const double lr =
            cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(t / decay_every));

        TripletBatch batch =
            sample_batch(dataset, cfg.k_hat, cfg.o_hat, cfg.triplet_budget, mix_seed(cfg.seed, t + 1));
        images.clear();
        for (std::size_t pos : batch.item_indices) images.push_back(&dataset.items[pos].features);

        batch_forward(model, images, outputs, caches);
        const LossBreakdown loss = batch_loss_detail(outputs, batch.triplets, batch.lap, ocfg);
        if (!std::isfinite(loss.total)) {
            const char* term = !std::isfinite(loss.margin) ? "margin" : "regularizer";
            throw NumericError("train: non-finite " + std::string(term) + " term at iteration " +
                               std::to_string(t + 1));
        }

        const auto output_grads = image_gradients(outputs, batch.triplets, batch.lap, ocfg);
        GradientSet grads = batch_backward(model, caches, output_grads);
        opt.step(model, grads, lr, cfg.momentum, cfg.weight_decay);
        model.iterations_trained = t + 1;

        history.records.push_back({t + 1, loss.total, loss.margin, loss.regularizer,
                                   loss.active_fraction, model.beta(), lr});

        if (!cfg.checkpoint_path.empty() && cfg.checkpoint_every &&
            (t + 1) % cfg.checkpoint_every == 0)
            save_checkpoint(model, cfg.checkpoint_path);
    }

    if (!cfg.checkpoint_path.empty()) save_checkpoint(model, cfg.checkpoint_path);
    return {std::move(model), std::move(history)};
}

} // namespace bsdh
