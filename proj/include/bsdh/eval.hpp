#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "bsdh/dataset.hpp"
#include "bsdh/search.hpp"

namespace bsdh {

enum class JudgeMode { ClassLabel, SharedTag };

// Ground-truth relevance by item id: same class label, or (multi-label)
// at least one shared tag.
struct RelevanceJudge {
    JudgeMode mode = JudgeMode::ClassLabel;
    std::unordered_map<std::uint64_t, std::int64_t> labels;
    std::unordered_map<std::uint64_t, std::vector<std::int32_t>> tags; // sorted

    static RelevanceJudge from_dataset(const Dataset& dataset);
    bool relevant(std::uint64_t query_id, std::uint64_t candidate_id) const;
    bool knows(std::uint64_t id) const;
};

// AP over one ranked list: mean of precision@r at the relevant ranks r
// within the cutoff, divided by the total number of relevant items in the
// list. cutoff 0 means no cutoff. 0 when nothing is relevant.
double average_precision(const RankingList& ranking,
                         const std::function<bool(std::uint64_t)>& is_relevant,
                         std::size_t cutoff = 0);

// Relevant fraction of the first k entries; entries past the end of the
// list count as non-relevant.
double precision_at_k(const RankingList& ranking,
                      const std::function<bool(std::uint64_t)>& is_relevant, std::size_t k);

// CMC[r-1] = fraction of queries whose first relevant item has rank <= r.
// Every query must have at least one relevant item in its ranking.
std::vector<double> cmc_curve(const std::vector<RankingList>& rankings,
                              const std::vector<std::function<bool(std::uint64_t)>>& judges);

struct MetricReport {
    std::size_t bits = 0;
    std::size_t query_count = 0;
    double map = 0.0;
    double precision_at_500 = 0.0;
    double ham2_precision = 0.0;
    std::vector<double> precision_curve; // precision@k at k = 1..pk_max
    std::vector<double> cmc;             // empty unless requested
};

struct EvalOptions {
    std::size_t k_bits = 0;      // 0 = full q
    std::size_t cutoff = 0;      // AP summation cutoff; 0 = none
    bool leave_one_out = false;  // drop the query's own id from candidates
    bool compute_cmc = false;
    std::size_t pk_max = 500;    // dense precision@k curve up to this k
    bool use_lut = true;         // false = bruteforce engine
};

// Ranks every query against the database and aggregates MAP,
// precision@500, the precision@k curve, HAM2 precision (unweighted
// Hamming radius 2 on the selected bits; empty balls score 0) and
// optionally the CMC curve. Queries run in parallel; aggregation order is
// fixed by query index.
MetricReport evaluate(const CodeDatabase& base, const CodeDatabase& queries,
                      const RelevanceJudge& judge, const EvalOptions& opt);

// Convenience wrappers for the individual headline numbers.
double mean_average_precision(const CodeDatabase& base, const CodeDatabase& queries,
                              const RelevanceJudge& judge, std::size_t cutoff, std::size_t k_bits,
                              bool leave_one_out);
double ham2_precision(const CodeDatabase& base, const CodeDatabase& queries,
                      const RelevanceJudge& judge, std::size_t k_bits, bool leave_one_out);

void write_metrics_csv(const std::vector<MetricReport>& reports, const std::string& path);
void write_precision_curve_csv(const std::vector<MetricReport>& reports, const std::string& path);
void write_metrics_jsonl(const std::vector<MetricReport>& reports, const std::string& path);
void write_cmc_csv(const MetricReport& report, const std::string& path);

} // namespace bsdh
