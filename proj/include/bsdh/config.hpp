#pragma once

#include <string>

#include "bsdh/dataset.hpp"
#include "bsdh/trainer.hpp"

namespace bsdh {

// Declarative run configuration: `key = value` lines, '#' comments.
// Unknown keys are rejected. See README for the full key list.
struct RunConfig {
    // dataset
    std::string dataset_kind;       // synthetic | idx | csv
    std::string images_path;        // idx
    std::string labels_path;        // idx
    std::string csv_path;           // csv
    bool csv_header = false;
    std::size_t classes = 5;        // synthetic
    std::size_t per_class = 200;    // synthetic
    std::size_t dim = 16;           // synthetic
    double sigma = 0.1;             // synthetic
    std::uint64_t data_seed = 1;    // synthetic
    std::size_t offset = 0;         // drop the first `offset` items
    std::size_t limit = 0;          // keep at most `limit` items (0 = all)
    std::uint64_t id_offset = 0;    // shift item ids (distinct id spaces)
    std::size_t query_per_class = 0; // reserve the last n items of each class
    std::string role = "train";     // train | query (which side of the split)

    TrainConfig train;

    std::string out_checkpoint = "model.ckpt";
    std::string out_history = "history.csv";
    int threads = 0;
};

RunConfig parse_run_config(const std::string& path);

// Materializes the configured dataset, applying offset/limit, the id shift
// and the per-class train/query split.
Dataset load_dataset(const RunConfig& cfg);

// Existence checks for every input path and the output directories; throws
// before any long-running work starts.
void validate_paths(const RunConfig& cfg, bool for_training);

} // namespace bsdh
