#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bsdh/error.hpp"

namespace bsdh {

// Dense symmetric matrix (similarity S, Laplacian L).
struct SymMatrix {
    std::size_t n = 0;
    std::vector<double> a; // row-major n*n

    SymMatrix() = default;
    explicit SymMatrix(std::size_t size) : n(size), a(size * size, 0.0) {}
    double& at(std::size_t i, std::size_t j) { return a[i * n + j]; }
    double at(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

// (anchor, positive, negative): anchor and positive share a label, the
// negative does not; all three distinct.
struct TripletIndex {
    std::uint32_t anchor = 0;
    std::uint32_t positive = 0;
    std::uint32_t negative = 0;

    friend bool operator==(const TripletIndex&, const TripletIndex&) = default;
    friend auto operator<=>(const TripletIndex&, const TripletIndex&) = default;
};

struct ObjectiveConfig {
    double lambda = 0.001;      // Laplacian regularizer weight
    double hinge_floor = -8.0;  // C; the margin term is clamped below at C
    std::size_t code_bits = 16; // q
    bool normalize_margin = true; // divide the margin sum by the triplet count
};

inline ObjectiveConfig make_objective_config(std::size_t q, double lambda = 0.001) {
    ObjectiveConfig cfg;
    cfg.code_bits = q;
    cfg.lambda = lambda;
    cfg.hinge_floor = -static_cast<double>(q) / 2.0;
    return cfg;
}

// Weighted Hamming affinity of two +-1 codes: -sum_i w_i^2 hA_i hB_i.
// A dissimilarity: smaller means more similar.
double weighted_affinity_codes(std::span<const std::int8_t> code_a,
                               std::span<const std::int8_t> code_b,
                               std::span<const double> weights);

// || rA .* |w| - rB .* |w| ||^2 on relaxed codes.
double weighted_euclidean(std::span<const double> relaxed_a, std::span<const double> relaxed_b,
                          std::span<const double> weights);

// max{ M(r,r+) - M(r,r-), C } for one triplet of relaxed codes.
double triplet_margin_term(std::span<const double> anchor, std::span<const double> positive,
                           std::span<const double> negative, std::span<const double> weights,
                           double hinge_floor);

// S_ij = 1 if labels match else 0; diagonal set to 1 (self-similarity). The
// diagonal cancels inside L = U - S, so this choice never affects the loss.
SymMatrix build_similarity_class(const std::vector<std::int64_t>& labels);

// S_ij = |s_i intersect s_j| / |s_i union s_j| over tag sets (sorted,
// duplicate-free vectors). Every set must be nonempty.
SymMatrix build_similarity_jaccard(const std::vector<std::vector<std::int32_t>>& tag_sets);

// L = U - S with U = diag(row sums of S). Rejects asymmetric S.
SymMatrix laplacian(const SymMatrix& similarity);

// trace(R L R^T) where column j of R is outputs[j] (the weighted code of
// image j).
double regularizer_value(const std::vector<std::vector<double>>& outputs, const SymMatrix& lap);

struct LossBreakdown {
    double total = 0.0;
    double margin = 0.0;        // hinge sum (normalized when configured)
    double regularizer = 0.0;   // lambda * trace(R L R^T)
    double active_fraction = 0.0; // fraction of triplets with D_w > C
};

// Regularized triplet loss over one batch of weighted outputs. Triplets are
// reduced in a canonical order so permuting the list changes nothing, not
// even the rounding.
LossBreakdown batch_loss_detail(const std::vector<std::vector<double>>& outputs,
                                const std::vector<TripletIndex>& triplets, const SymMatrix& lap,
                                const ObjectiveConfig& cfg);
double batch_loss(const std::vector<std::vector<double>>& outputs,
                  const std::vector<TripletIndex>& triplets, const SymMatrix& lap,
                  const ObjectiveConfig& cfg);

// dL/d(weighted output of image j) for every image in the batch,
// accumulated per image over the triplets it appears in (clamped triplets
// contribute nothing), plus the exact Laplacian term 2 lambda (R L)_j.
std::vector<std::vector<double>> image_gradients(const std::vector<std::vector<double>>& outputs,
                                                 const std::vector<TripletIndex>& triplets,
                                                 const SymMatrix& lap,
                                                 const ObjectiveConfig& cfg);

// Same quantity assembled triplet-by-triplet from the expanded margin
// derivative (and the remove-one-column form of the Laplacian term). Kept
// as an independent route for cross-checking; agrees with image_gradients
// to rounding.
std::vector<std::vector<double>>
image_gradients_triplet_route(const std::vector<std::vector<double>>& outputs,
                              const std::vector<TripletIndex>& triplets, const SymMatrix& lap,
                              const ObjectiveConfig& cfg);

} // namespace bsdh
