#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bsdh/dataset.hpp"
#include "bsdh/model.hpp"
#include "bsdh/objective.hpp"

namespace bsdh {

enum class BetaShape { Geometric, Linear };

// Relaxation sharpness at a given iteration: start at iter 0, end at
// iter == total, monotone in between (geometric by default).
double beta_schedule(std::size_t iter, std::size_t total, double start, double end,
                     BetaShape shape = BetaShape::Geometric);

struct TrainConfig {
    std::string preset = "mlp";
    std::size_t code_bits = 16;

    std::size_t iterations = 500;
    std::size_t k_hat = 10;
    std::size_t o_hat = 20;
    std::size_t triplet_budget = 200000;

    double lr = 0.01;
    double lr_decay = 0.5;
    std::size_t lr_decay_every = 0; // 0 -> iterations / 4
    double momentum = 0.9;
    double weight_decay = 5e-4;

    double lambda = 0.001;
    std::optional<double> hinge_floor; // default -q/2
    bool normalize_margin = true;

    double beta_start = 2.0;
    double beta_end = 1000.0;
    BetaShape beta_shape = BetaShape::Geometric;

    std::uint64_t seed = 42;
    std::size_t checkpoint_every = 0;  // 0 = final checkpoint only
    std::string checkpoint_path;       // empty = never write from train()
};

struct TrainRecord {
    std::size_t iteration = 0; // 1-based, after the update
    double loss = 0.0;
    double margin = 0.0;
    double regularizer = 0.0;
    double active_fraction = 0.0;
    double beta = 0.0;
    double lr = 0.0;
};

struct TrainHistory {
    std::vector<TrainRecord> records;
    // CSV with header iter,loss,margin,reg,active_frac,beta,lr
    void save_csv(const std::string& path) const;
};

// Batch kernels: forward every image (caches kept for backward), then
// backprop each image's output gradient and sum the parameter gradients.
// Both variants reduce over fixed blocks of 16 images in index order, so
// the OpenMP path is bit-identical to the serial one for any thread count.
void batch_forward_serial(const Model& model, const std::vector<const Tensor*>& images,
                          std::vector<std::vector<double>>& outputs,
                          std::vector<ActivationCache>& caches);
void batch_forward_omp(const Model& model, const std::vector<const Tensor*>& images,
                       std::vector<std::vector<double>>& outputs,
                       std::vector<ActivationCache>& caches);
GradientSet batch_backward_serial(const Model& model, const std::vector<ActivationCache>& caches,
                                  const std::vector<std::vector<double>>& output_grads);
GradientSet batch_backward_omp(const Model& model, const std::vector<ActivationCache>& caches,
                               const std::vector<std::vector<double>>& output_grads);

// Dispatch to the OpenMP or serial variant per the global thread setting.
void batch_forward(const Model& model, const std::vector<const Tensor*>& images,
                   std::vector<std::vector<double>>& outputs,
                   std::vector<ActivationCache>& caches);
GradientSet batch_backward(const Model& model, const std::vector<ActivationCache>& caches,
                           const std::vector<std::vector<double>>& output_grads);

// The full training loop: sample a batch, forward, per-image loss gradient,
// backprop, momentum SGD, with beta and lr advanced per iteration.
std::pair<Model, TrainHistory> train(const TrainConfig& cfg, const Dataset& dataset);

} // namespace bsdh
