#include "bsdh/sampler.hpp"

#include <algorithm>
#include <unordered_map>

#include "bsdh/error.hpp"
#include "bsdh/rng.hpp"

namespace bsdh {

std::uint64_t max_triplet_count(std::size_t categories, std::size_t images_per_category) {
    if (categories < 2)
        throw InputError("max_triplet_count: need >= 2 categories, got " +
                         std::to_string(categories));
    if (images_per_category < 2)
        throw InputError("max_triplet_count: need >= 2 images per category, got " +
                         std::to_string(images_per_category));
    const std::uint64_t k = categories, o = images_per_category;
    return k * o * (o - 1) * (k - 1) * o;
}

namespace {

bool share_tag(const std::vector<std::int32_t>& a, const std::vector<std::int32_t>& b) {
    std::size_t ia = 0, ib = 0;
    while (ia < a.size() && ib < b.size()) {
        if (a[ia] < b[ib]) ++ia;
        else if (b[ib] < a[ia]) ++ib;
        else return true;
    }
    return false;
}

template <typename T>
std::vector<T> sample_without_replacement(const std::vector<T>& pool, std::size_t count,
                                          std::mt19937_64& rng) {
    std::vector<T> out;
    std::sample(pool.begin(), pool.end(), std::back_inserter(out), count, rng);
    return out;
}

} // namespace

TripletBatch sample_batch(const Dataset& dataset, std::size_t k_hat, std::size_t o_hat,
                          std::size_t triplet_budget, std::uint64_t seed) {
    if (k_hat < 2) throw InputError("sample_batch: k_hat must be >= 2");
    if (o_hat < 2) throw InputError("sample_batch: o_hat must be >= 2");
    if (triplet_budget < 1) throw InputError("sample_batch: triplet_budget must be >= 1");

    auto rng = make_rng(seed, 0xba);

    // Categories usable as anchors: those with at least two items.
    std::vector<std::int64_t> class_cats;
    std::vector<std::int32_t> tag_cats;
    std::size_t usable = 0;
    if (dataset.multilabel) {
        for (const auto& [tag, idxs] : dataset.tag_index)
            if (idxs.size() >= 2) tag_cats.push_back(tag);
        usable = tag_cats.size();
    } else {
        for (const auto& [label, idxs] : dataset.label_index)
            if (idxs.size() >= 2) class_cats.push_back(label);
        usable = class_cats.size();
    }
    if (usable < 2)
        throw InputError("sample_batch: need >= 2 categories with >= 2 items, dataset has " +
                         std::to_string(usable));
    const std::size_t k_eff = std::min(k_hat, usable);

    // Pick categories, then items within each (all of them if fewer than o_hat).
    std::vector<std::vector<std::size_t>> groups; // selected item positions per category
    if (dataset.multilabel) {
        for (std::int32_t tag : sample_without_replacement(tag_cats, k_eff, rng))
            groups.push_back(
                sample_without_replacement(dataset.tag_index.at(tag), o_hat, rng));
    } else {
        for (std::int64_t label : sample_without_replacement(class_cats, k_eff, rng))
            groups.push_back(
                sample_without_replacement(dataset.label_index.at(label), o_hat, rng));
    }

    TripletBatch batch;
    std::unordered_map<std::size_t, std::uint32_t> local; // dataset position -> batch index
    std::vector<std::vector<std::uint32_t>> group_local(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (std::size_t pos : groups[g]) {
            auto [it, fresh] = local.try_emplace(pos, static_cast<std::uint32_t>(batch.item_indices.size()));
            if (fresh) batch.item_indices.push_back(pos);
            group_local[g].push_back(it->second);
        }
    }
    const std::size_t m = batch.item_indices.size();

    // Full (anchor, positive, negative) pool over the selection.
    std::vector<TripletIndex> pool;
    if (dataset.multilabel) {
        for (std::size_t g = 0; g < groups.size(); ++g) {
            for (std::uint32_t a : group_local[g]) {
                const auto& atags = dataset.items[batch.item_indices[a]].tags;
                std::vector<std::uint32_t> negatives;
                for (std::size_t j = 0; j < m; ++j)
                    if (!share_tag(atags, dataset.items[batch.item_indices[j]].tags))
                        negatives.push_back(static_cast<std::uint32_t>(j));
                if (negatives.empty()) continue;
                for (std::uint32_t p : group_local[g]) {
                    if (p == a) continue;
                    for (std::uint32_t n : negatives) pool.push_back({a, p, n});
                }
            }
        }
        std::sort(pool.begin(), pool.end());
        pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
    } else {
        for (std::size_t g = 0; g < groups.size(); ++g) {
            for (std::uint32_t a : group_local[g]) {
                for (std::uint32_t p : group_local[g]) {
                    if (p == a) continue;
                    for (std::size_t h = 0; h < groups.size(); ++h) {
                        if (h == g) continue;
                        for (std::uint32_t n : group_local[h]) pool.push_back({a, p, n});
                    }
                }
            }
        }
    }
    if (pool.empty())
        throw InputError("sample_batch: selection produced no valid triplets");

    if (pool.size() > triplet_budget)
        batch.triplets = sample_without_replacement(pool, triplet_budget, rng);
    else
        batch.triplets = std::move(pool);

    if (dataset.multilabel) {
        std::vector<std::vector<std::int32_t>> tag_sets;
        tag_sets.reserve(m);
        for (std::size_t pos : batch.item_indices) tag_sets.push_back(dataset.items[pos].tags);
        batch.similarity = build_similarity_jaccard(tag_sets);
    } else {
        std::vector<std::int64_t> labels;
        labels.reserve(m);
        for (std::size_t pos : batch.item_indices) labels.push_back(dataset.items[pos].label);
        batch.similarity = build_similarity_class(labels);
    }
    batch.lap = laplacian(batch.similarity);
    return batch;
}

} // namespace bsdh
