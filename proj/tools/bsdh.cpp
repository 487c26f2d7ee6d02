#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bsdh/checkpoint.hpp"
#include "bsdh/codec.hpp"
#include "bsdh/config.hpp"
#include "bsdh/error.hpp"
#include "bsdh/eval.hpp"
#include "bsdh/parallel.hpp"
#include "bsdh/search.hpp"
#include "bsdh/trainer.hpp"

namespace {

using namespace bsdh;

int run_train(const std::string& config_path, long long iterations_override,
              long long seed_override, const std::string& checkpoint_override,
              const std::string& history_override) {
    RunConfig cfg = parse_run_config(config_path);
    if (iterations_override >= 0) cfg.train.iterations = static_cast<std::size_t>(iterations_override);
    if (seed_override >= 0) cfg.train.seed = static_cast<std::uint64_t>(seed_override);
    if (!checkpoint_override.empty()) cfg.out_checkpoint = checkpoint_override;
    if (!history_override.empty()) cfg.out_history = history_override;
    if (cfg.threads) set_threads(cfg.threads);

    validate_paths(cfg, true);
    const Dataset dataset = load_dataset(cfg);
    cfg.train.checkpoint_path = cfg.out_checkpoint;

    std::printf("training %s / q=%zu on %zu items (%zu iterations)\n", cfg.train.preset.c_str(),
                cfg.train.code_bits, dataset.size(), cfg.train.iterations);
    auto [model, history] = train(cfg.train, dataset);
    history.save_csv(cfg.out_history);
    const TrainRecord& last = history.records.back();
    std::printf("done: loss=%.6f margin=%.6f reg=%.6f active=%.3f\n", last.loss, last.margin,
                last.regularizer, last.active_fraction);
    std::printf("checkpoint: %s\nhistory: %s\n", cfg.out_checkpoint.c_str(),
                cfg.out_history.c_str());
    return 0;
}

int run_encode(const std::string& config_path, const std::string& checkpoint_path,
               const std::string& out_path) {
    RunConfig cfg = parse_run_config(config_path);
    if (cfg.threads) set_threads(cfg.threads);
    validate_paths(cfg, false);
    const Dataset dataset = load_dataset(cfg);
    const Model model = load_checkpoint(checkpoint_path);
    const auto items = encode(model, dataset);
    const CodeDatabase db = build_database(items, model.bit_weights());
    save_database(db, out_path);
    std::printf("encoded %zu items at q=%u -> %s\n", db.size(), db.q, out_path.c_str());
    return 0;
}

int run_query(const std::string& db_path, const std::string& queries_path, std::size_t bits,
              std::size_t top_k, const std::string& engine, const std::string& out_path) {
    const CodeDatabase db = load_database(db_path);
    const CodeDatabase queries = load_database(queries_path);
    if (queries.q != db.q || queries.bit_order != db.bit_order)
        throw InputError("query: queries were not encoded with the database's bit order");
    const std::size_t k_bits = bits ? bits : db.q;
    const bool use_lut = engine == "lut";

    std::ofstream file;
    std::ostream* os = &std::cout;
    if (out_path != "-") {
        file.open(out_path, std::ios::trunc);
        if (!file) throw FormatError("query: cannot open '" + out_path + "' for writing");
        os = &file;
    }
    *os << "query_id,rank,item_id,affinity\n";
    const ChunkLuts luts = use_lut ? build_lut(db.weights, k_bits) : ChunkLuts{};
    char buf[64];
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        const RankingList ranking = use_lut
                                        ? query_lut(db, luts, queries.code(qi), k_bits, top_k)
                                        : query_bruteforce(db, queries.code(qi), k_bits, top_k);
        for (std::size_t r = 0; r < ranking.size(); ++r) {
            std::snprintf(buf, sizeof buf, "%.17g", ranking[r].affinity);
            *os << queries.ids[qi] << "," << r + 1 << "," << ranking[r].id << "," << buf << "\n";
        }
    }
    return 0;
}

std::vector<std::size_t> parse_bits_list(const std::string& spec) {
    std::vector<std::size_t> out;
    std::string cur;
    for (char ch : spec + ",") {
        if (ch == ',') {
            if (!cur.empty()) out.push_back(std::stoull(cur));
            cur.clear();
        } else cur.push_back(ch);
    }
    if (out.empty()) throw InputError("eval: empty --bits-sweep list");
    return out;
}

int run_eval(const std::string& db_path, const std::string& queries_path,
             const std::string& config_path, const std::string& query_config_path,
             std::size_t bits, const std::string& sweep, bool loo, bool cmc,
             std::size_t cutoff, const std::string& engine, const std::string& judge_mode,
             const std::string& out_prefix) {
    const CodeDatabase db = load_database(db_path);
    const CodeDatabase queries = queries_path.empty() ? db : load_database(queries_path);

    RunConfig cfg = parse_run_config(config_path);
    if (cfg.threads) set_threads(cfg.threads);
    validate_paths(cfg, false);
    Dataset dataset = load_dataset(cfg);
    RelevanceJudge judge = RelevanceJudge::from_dataset(dataset);
    if (!query_config_path.empty()) {
        const RunConfig qcfg = parse_run_config(query_config_path);
        validate_paths(qcfg, false);
        const Dataset qset = load_dataset(qcfg);
        const RelevanceJudge qjudge = RelevanceJudge::from_dataset(qset);
        if (qjudge.mode != judge.mode)
            throw InputError("eval: database and query datasets disagree on label kind");
        judge.labels.insert(qjudge.labels.begin(), qjudge.labels.end());
        judge.tags.insert(qjudge.tags.begin(), qjudge.tags.end());
    }
    if (judge_mode == "class" && judge.mode != JudgeMode::ClassLabel)
        throw InputError("eval: judge-mode class needs single-label data");
    if (judge_mode == "shared-tag" && judge.mode != JudgeMode::SharedTag)
        throw InputError("eval: judge-mode shared-tag needs multi-label (tagged) data");

    std::vector<std::size_t> bit_lengths =
        sweep.empty() ? std::vector<std::size_t>{bits ? bits : db.q} : parse_bits_list(sweep);

    std::vector<MetricReport> reports;
    for (std::size_t k : bit_lengths) {
        EvalOptions opt;
        opt.k_bits = k;
        opt.cutoff = cutoff;
        opt.leave_one_out = loo;
        opt.compute_cmc = cmc;
        opt.use_lut = engine == "lut";
        reports.push_back(evaluate(db, queries, judge, opt));
        const MetricReport& r = reports.back();
        std::printf("bits=%zu map=%.4f p@500=%.4f ham2=%.4f\n", r.bits, r.map,
                    r.precision_at_500, r.ham2_precision);
    }

    write_metrics_csv(reports, out_prefix + ".csv");
    write_metrics_jsonl(reports, out_prefix + ".jsonl");
    write_precision_curve_csv(reports, out_prefix + "_pk.csv");
    if (cmc) write_cmc_csv(reports.back(), out_prefix + "_cmc.csv");
    return 0;
}

int run_truncate(const std::string& db_path, std::size_t bits, const std::string& out_path) {
    const CodeDatabase db = load_database(db_path);
    const CodeDatabase cut = truncate_database(db, bits);
    save_database(cut, out_path);
    std::printf("kept top %zu of %u bits -> %s\n", bits, db.q, out_path.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"bsdh: bit-scalable weighted-hash training, encoding and search"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("-t,--threads", threads, "worker threads (0 = default, 1 = serial)");

    auto* cmd_train = app.add_subcommand("train", "train a model from a config file");
    std::string train_config;
    long long train_iters = -1, train_seed = -1;
    std::string train_ckpt, train_hist;
    cmd_train->add_option("config", train_config, "run configuration file")->required();
    cmd_train->add_option("--iterations", train_iters, "override train.iterations");
    cmd_train->add_option("--seed", train_seed, "override train.seed");
    cmd_train->add_option("--checkpoint", train_ckpt, "override out.checkpoint");
    cmd_train->add_option("--history", train_hist, "override out.history");

    auto* cmd_encode = app.add_subcommand("encode", "encode a dataset into a code database");
    std::string enc_config, enc_ckpt, enc_out;
    cmd_encode->add_option("--config", enc_config, "dataset configuration file")->required();
    cmd_encode->add_option("--checkpoint", enc_ckpt, "trained model checkpoint")->required();
    cmd_encode->add_option("--out", enc_out, "output code database")->required();

    auto* cmd_query = app.add_subcommand("query", "rank database codes against query codes");
    std::string q_db, q_queries, q_engine = "lut", q_out = "-";
    std::size_t q_bits = 0, q_top = 10;
    cmd_query->add_option("--db", q_db, "code database")->required();
    cmd_query->add_option("--queries", q_queries, "encoded query database")->required();
    cmd_query->add_option("--bits", q_bits, "use the top k bits (default: all)");
    cmd_query->add_option("--top", q_top, "results per query");
    cmd_query->add_option("--engine", q_engine, "lut or bruteforce")
        ->check(CLI::IsMember({"lut", "bruteforce"}));
    cmd_query->add_option("--out", q_out, "output CSV ('-' = stdout)");

    auto* cmd_eval = app.add_subcommand("eval", "retrieval metrics for a code database");
    std::string e_db, e_queries, e_config, e_qconfig, e_sweep, e_engine = "lut";
    std::string e_judge = "class", e_prefix = "metrics";
    std::size_t e_bits = 0, e_cutoff = 0;
    bool e_loo = false, e_cmc = false;
    cmd_eval->add_option("--db", e_db, "code database")->required();
    cmd_eval->add_option("--queries", e_queries, "encoded query database (default: --db)");
    cmd_eval->add_option("--config", e_config, "dataset config providing ground truth")->required();
    cmd_eval->add_option("--query-config", e_qconfig, "dataset config for the query ids");
    cmd_eval->add_option("--bits", e_bits, "use the top k bits (default: all)");
    cmd_eval->add_option("--bits-sweep", e_sweep, "comma list of bit lengths, one row each");
    cmd_eval->add_flag("--loo", e_loo, "leave-one-out (drop each query from its candidates)");
    cmd_eval->add_flag("--cmc", e_cmc, "also compute the cumulative match curve");
    cmd_eval->add_option("--cutoff", e_cutoff, "AP summation cutoff (0 = none)");
    cmd_eval->add_option("--engine", e_engine, "lut or bruteforce")
        ->check(CLI::IsMember({"lut", "bruteforce"}));
    cmd_eval->add_option("--judge-mode", e_judge, "class or shared-tag")
        ->check(CLI::IsMember({"class", "shared-tag"}));
    cmd_eval->add_option("--out-prefix", e_prefix, "output file prefix");

    auto* cmd_trunc = app.add_subcommand("truncate", "keep only the top-weighted bits of a database");
    std::string t_db, t_out;
    std::size_t t_bits = 0;
    cmd_trunc->add_option("--db", t_db, "code database")->required();
    cmd_trunc->add_option("--bits", t_bits, "bits to keep")->required();
    cmd_trunc->add_option("--out", t_out, "output code database")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }
    if (threads) bsdh::set_threads(threads);

    try {
        if (cmd_train->parsed())
            return run_train(train_config, train_iters, train_seed, train_ckpt, train_hist);
        if (cmd_encode->parsed()) return run_encode(enc_config, enc_ckpt, enc_out);
        if (cmd_query->parsed())
            return run_query(q_db, q_queries, q_bits, q_top, q_engine, q_out);
        if (cmd_eval->parsed())
            return run_eval(e_db, e_queries, e_config, e_qconfig, e_bits, e_sweep, e_loo, e_cmc,
                            e_cutoff, e_engine, e_judge, e_prefix);
        if (cmd_trunc->parsed()) return run_truncate(t_db, t_bits, t_out);
    } catch (const bsdh::NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 3;
    } catch (const bsdh::InputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const bsdh::FormatError& e) {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
