#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bsdh/tensor.hpp"

namespace bsdh {

struct DatasetItem {
    Tensor features;                 // [channels,h,w] image or [dim] vector
    std::int64_t label = 0;          // class id (single-label datasets)
    std::vector<std::int32_t> tags;  // sorted tag ids (multi-label datasets)
    std::uint64_t id = 0;
};

struct Dataset {
    std::vector<DatasetItem> items;
    std::vector<std::size_t> feature_shape;
    bool multilabel = false;
    std::map<std::int64_t, std::vector<std::size_t>> label_index; // label -> item positions
    std::map<std::int32_t, std::vector<std::size_t>> tag_index;   // tag -> item positions

    std::size_t size() const { return items.size(); }
    void rebuild_index();
};

// MNIST-style IDX pair: big-endian, image magic 0x00000803 (unsigned bytes,
// n x rows x cols), label magic 0x00000801. Pixels are scaled to [0,1]; no
// mean subtraction.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Gaussian clusters around class centers drawn uniformly on the unit
// sphere, redrawn until every pair of centers is >= 4*sigma apart.
Dataset synthetic_clusters(std::size_t num_classes, std::size_t per_class, std::size_t dim,
                           double sigma, std::uint64_t seed);

// Rows `id,label,v1,...,vd` with a constant d. When header is true the
// first line is skipped.
Dataset load_vector_csv(const std::string& path, bool header = false);

} // namespace bsdh
