#include "bsdh/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>

#include "bsdh/error.hpp"

namespace bsdh {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw InputError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

std::uint64_t parse_uint(const std::string& v, const std::string& key) {
    char* end = nullptr;
    const unsigned long long r = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw InputError("config: key '" + key + "' expects an integer, got '" + v + "'");
    return r;
}

double parse_real(const std::string& v, const std::string& key) {
    char* end = nullptr;
    const double r = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw InputError("config: key '" + key + "' expects a number, got '" + v + "'");
    return r;
}

} // namespace

RunConfig parse_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("config: cannot open '" + path + "'");
    RunConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InputError("config: line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));

        if (key == "dataset.kind") {
            if (val != "synthetic" && val != "idx" && val != "csv")
                throw InputError("config: dataset.kind must be synthetic, idx or csv");
            cfg.dataset_kind = val;
        } else if (key == "dataset.images") cfg.images_path = val;
        else if (key == "dataset.labels") cfg.labels_path = val;
        else if (key == "dataset.path") cfg.csv_path = val;
        else if (key == "dataset.header") cfg.csv_header = parse_bool(val, key);
        else if (key == "dataset.classes") cfg.classes = parse_uint(val, key);
        else if (key == "dataset.per_class") cfg.per_class = parse_uint(val, key);
        else if (key == "dataset.dim") cfg.dim = parse_uint(val, key);
        else if (key == "dataset.sigma") cfg.sigma = parse_real(val, key);
        else if (key == "dataset.seed") cfg.data_seed = parse_uint(val, key);
        else if (key == "dataset.offset") cfg.offset = parse_uint(val, key);
        else if (key == "dataset.limit") cfg.limit = parse_uint(val, key);
        else if (key == "dataset.id_offset") cfg.id_offset = parse_uint(val, key);
        else if (key == "dataset.query_per_class") cfg.query_per_class = parse_uint(val, key);
        else if (key == "dataset.role") {
            if (val != "train" && val != "query")
                throw InputError("config: dataset.role must be train or query");
            cfg.role = val;
        } else if (key == "arch") cfg.train.preset = val;
        else if (key == "bits") cfg.train.code_bits = parse_uint(val, key);
        else if (key == "train.iterations") cfg.train.iterations = parse_uint(val, key);
        else if (key == "train.k_hat") cfg.train.k_hat = parse_uint(val, key);
        else if (key == "train.o_hat") cfg.train.o_hat = parse_uint(val, key);
        else if (key == "train.budget") cfg.train.triplet_budget = parse_uint(val, key);
        else if (key == "train.lr") cfg.train.lr = parse_real(val, key);
        else if (key == "train.lr_decay") cfg.train.lr_decay = parse_real(val, key);
        else if (key == "train.lr_decay_every") cfg.train.lr_decay_every = parse_uint(val, key);
        else if (key == "train.momentum") cfg.train.momentum = parse_real(val, key);
        else if (key == "train.weight_decay") cfg.train.weight_decay = parse_real(val, key);
        else if (key == "train.lambda") cfg.train.lambda = parse_real(val, key);
        else if (key == "train.hinge_floor") cfg.train.hinge_floor = parse_real(val, key);
        else if (key == "train.normalize_margin")
            cfg.train.normalize_margin = parse_bool(val, key);
        else if (key == "train.beta_start") cfg.train.beta_start = parse_real(val, key);
        else if (key == "train.beta_end") cfg.train.beta_end = parse_real(val, key);
        else if (key == "train.beta_shape") {
            if (val == "geometric") cfg.train.beta_shape = BetaShape::Geometric;
            else if (val == "linear") cfg.train.beta_shape = BetaShape::Linear;
            else throw InputError("config: train.beta_shape must be geometric or linear");
        } else if (key == "train.seed") cfg.train.seed = parse_uint(val, key);
        else if (key == "train.checkpoint_every") cfg.train.checkpoint_every = parse_uint(val, key);
        else if (key == "out.checkpoint") cfg.out_checkpoint = val;
        else if (key == "out.history") cfg.out_history = val;
        else if (key == "threads") cfg.threads = static_cast<int>(parse_uint(val, key));
        else throw InputError("config: unknown key '" + key + "'");
    }
    if (cfg.dataset_kind.empty()) throw InputError("config: dataset.kind is required");
    return cfg;
}

namespace {

void check_input_file(const std::string& path, const char* key) {
    if (path.empty()) throw InputError(std::string("config: ") + key + " is required");
    if (!std::filesystem::exists(path))
        throw InputError(std::string("config: ") + key + " '" + path + "' does not exist");
}

void check_output_dir(const std::string& path, const char* key) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty() && !std::filesystem::is_directory(parent))
        throw InputError(std::string("config: directory for ") + key + " '" + path +
                         "' does not exist");
}

} // namespace

void validate_paths(const RunConfig& cfg, bool for_training) {
    if (cfg.dataset_kind == "idx") {
        check_input_file(cfg.images_path, "dataset.images");
        check_input_file(cfg.labels_path, "dataset.labels");
    } else if (cfg.dataset_kind == "csv") {
        check_input_file(cfg.csv_path, "dataset.path");
    }
    if (for_training) {
        check_output_dir(cfg.out_checkpoint, "out.checkpoint");
        check_output_dir(cfg.out_history, "out.history");
    }
}

Dataset load_dataset(const RunConfig& cfg) {
    Dataset ds;
    if (cfg.dataset_kind == "synthetic")
        ds = synthetic_clusters(cfg.classes, cfg.per_class, cfg.dim, cfg.sigma, cfg.data_seed);
    else if (cfg.dataset_kind == "idx")
        ds = load_idx(cfg.images_path, cfg.labels_path);
    else if (cfg.dataset_kind == "csv")
        ds = load_vector_csv(cfg.csv_path, cfg.csv_header);
    else
        throw InputError("config: dataset.kind is required");

    if (cfg.offset || cfg.limit) {
        if (cfg.offset >= ds.items.size())
            throw InputError("config: dataset.offset is beyond the dataset end");
        std::vector<DatasetItem> kept(ds.items.begin() + static_cast<std::ptrdiff_t>(cfg.offset),
                                      ds.items.end());
        if (cfg.limit && kept.size() > cfg.limit) kept.resize(cfg.limit);
        ds.items = std::move(kept);
        ds.rebuild_index();
    }

    if (cfg.query_per_class) {
        if (ds.multilabel)
            throw InputError("config: query_per_class split needs single-label data");
        std::vector<DatasetItem> kept;
        for (const auto& [label, positions] : ds.label_index) {
            if (positions.size() <= cfg.query_per_class && cfg.role == "train")
                throw InputError("config: class " + std::to_string(label) +
                                 " has too few items for the query split");
            const std::size_t cut = positions.size() > cfg.query_per_class
                                        ? positions.size() - cfg.query_per_class
                                        : 0;
            if (cfg.role == "train")
                for (std::size_t i = 0; i < cut; ++i) kept.push_back(ds.items[positions[i]]);
            else
                for (std::size_t i = cut; i < positions.size(); ++i)
                    kept.push_back(ds.items[positions[i]]);
        }
        ds.items = std::move(kept);
        ds.rebuild_index();
    }

    if (cfg.id_offset)
        for (DatasetItem& item : ds.items) item.id += cfg.id_offset;
    return ds;
}

} // namespace bsdh
