#pragma once

#include <cstdint>

#include "bsdh/dataset.hpp"
#include "bsdh/objective.hpp"

namespace bsdh {

// Size of the full triplet pool over K categories of O images each:
// K * O * (O-1) * (K-1) * O.
std::uint64_t max_triplet_count(std::size_t categories, std::size_t images_per_category);

struct TripletBatch {
    std::vector<std::size_t> item_indices; // the M distinct selected items (dataset positions)
    std::vector<TripletIndex> triplets;    // indices into item_indices
    SymMatrix similarity;                  // S over the M items
    SymMatrix lap;                         // L = U - S
};

// One training batch: k_hat categories sampled uniformly, o_hat items per
// category without replacement, then the full (anchor, positive, negative)
// pool over the selection, uniformly subsampled to triplet_budget when it
// is larger. Categories with fewer than o_hat items contribute all of them;
// k_hat shrinks to the number of usable categories. Deterministic per seed.
//
// Single-label datasets: categories are class labels, S is the 0/1 class
// similarity. Multi-label datasets: categories are tags, a positive shares
// the category tag with its anchor, a negative shares no tag at all, and S
// is the shared-tag Jaccard similarity.
TripletBatch sample_batch(const Dataset& dataset, std::size_t k_hat, std::size_t o_hat,
                          std::size_t triplet_budget, std::uint64_t seed);

} // namespace bsdh
