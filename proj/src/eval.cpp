#include "bsdh/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "bsdh/error.hpp"
#include "bsdh/parallel.hpp"

namespace bsdh {

RelevanceJudge RelevanceJudge::from_dataset(const Dataset& dataset) {
    RelevanceJudge judge;
    judge.mode = dataset.multilabel ? JudgeMode::SharedTag : JudgeMode::ClassLabel;
    for (const DatasetItem& item : dataset.items) {
        if (dataset.multilabel) judge.tags[item.id] = item.tags;
        else judge.labels[item.id] = item.label;
    }
    return judge;
}

bool RelevanceJudge::knows(std::uint64_t id) const {
    return mode == JudgeMode::ClassLabel ? labels.count(id) > 0 : tags.count(id) > 0;
}

bool RelevanceJudge::relevant(std::uint64_t query_id, std::uint64_t candidate_id) const {
    if (mode == JudgeMode::ClassLabel) {
        const auto qi = labels.find(query_id);
        const auto ci = labels.find(candidate_id);
        if (qi == labels.end() || ci == labels.end())
            throw InputError("judge: unknown item id " +
                             std::to_string(qi == labels.end() ? query_id : candidate_id));
        return qi->second == ci->second;
    }
    const auto qi = tags.find(query_id);
    const auto ci = tags.find(candidate_id);
    if (qi == tags.end() || ci == tags.end())
        throw InputError("judge: unknown item id " +
                         std::to_string(qi == tags.end() ? query_id : candidate_id));
    const auto& a = qi->second;
    const auto& b = ci->second;
    std::size_t ia = 0, ib = 0;
    while (ia < a.size() && ib < b.size()) {
        if (a[ia] < b[ib]) ++ia;
        else if (b[ib] < a[ia]) ++ib;
        else return true;
    }
    return false;
}

double average_precision(const RankingList& ranking,
                         const std::function<bool(std::uint64_t)>& is_relevant,
                         std::size_t cutoff) {
    if (ranking.empty()) throw InputError("average_precision: empty ranking");
    std::size_t total_relevant = 0;
    for (const RankedItem& item : ranking)
        if (is_relevant(item.id)) ++total_relevant;
    if (total_relevant == 0) return 0.0;
    const std::size_t limit = cutoff ? std::min(cutoff, ranking.size()) : ranking.size();
    double acc = 0.0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < limit; ++r) {
        if (!is_relevant(ranking[r].id)) continue;
        ++hits;
        acc += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
    return acc / static_cast<double>(total_relevant);
}

double precision_at_k(const RankingList& ranking,
                      const std::function<bool(std::uint64_t)>& is_relevant, std::size_t k) {
    if (k < 1) throw InputError("precision_at_k: k must be >= 1");
    std::size_t hits = 0;
    const std::size_t limit = std::min(k, ranking.size());
    for (std::size_t r = 0; r < limit; ++r)
        if (is_relevant(ranking[r].id)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(k);
}

std::vector<double> cmc_curve(const std::vector<RankingList>& rankings,
                              const std::vector<std::function<bool(std::uint64_t)>>& judges) {
    if (rankings.empty()) throw InputError("cmc: no rankings");
    if (rankings.size() != judges.size()) throw InputError("cmc: rankings/judges mismatch");
    std::size_t max_len = 0;
    for (const auto& r : rankings) max_len = std::max(max_len, r.size());
    std::vector<std::size_t> first_hits(rankings.size());
    for (std::size_t i = 0; i < rankings.size(); ++i) {
        std::size_t hit = 0;
        for (std::size_t r = 0; r < rankings[i].size(); ++r)
            if (judges[i](rankings[i][r].id)) { hit = r + 1; break; }
        if (hit == 0)
            throw InputError("cmc: query " + std::to_string(i) + " has no relevant item");
        first_hits[i] = hit;
    }
    std::vector<double> curve(max_len, 0.0);
    for (std::size_t hit : first_hits)
        for (std::size_t r = hit - 1; r < max_len; ++r) curve[r] += 1.0;
    for (double& v : curve) v /= static_cast<double>(rankings.size());
    return curve;
}

MetricReport evaluate(const CodeDatabase& base, const CodeDatabase& queries,
                      const RelevanceJudge& judge, const EvalOptions& opt) {
    if (queries.q != base.q || queries.bit_order != base.bit_order)
        throw InputError("evaluate: query codes were not built with the database's bit order");
    const std::size_t k_bits = opt.k_bits ? opt.k_bits : base.q;
    if (k_bits > base.q) throw InputError("evaluate: k_bits > q");
    const std::size_t nq = queries.size();
    if (nq == 0) throw InputError("evaluate: empty query set");

    const ChunkLuts luts = opt.use_lut ? build_lut(base.weights, k_bits) : ChunkLuts{};

    std::vector<double> ap(nq), p500(nq), ham2(nq);
    std::vector<std::size_t> first_hit(nq, 0);
    std::vector<std::vector<double>> pk(nq);
    std::vector<std::uint8_t> failed(nq, 0);

    auto eval_one = [&](std::size_t qi) {
        const auto qcode = queries.code(qi);
        const std::uint64_t qid = queries.ids[qi];
        RankingList ranking = opt.use_lut
                                  ? query_lut(base, luts, qcode, k_bits, base.size())
                                  : query_bruteforce(base, qcode, k_bits, base.size());
        if (opt.leave_one_out)
            std::erase_if(ranking, [&](const RankedItem& it) { return it.id == qid; });
        if (ranking.empty()) {
            failed[qi] = 1;
            return;
        }

        auto rel = [&](std::uint64_t id) { return judge.relevant(qid, id); };
        ap[qi] = average_precision(ranking, rel, opt.cutoff);
        p500[qi] = precision_at_k(ranking, rel, 500);

        auto& curve = pk[qi];
        curve.resize(opt.pk_max, 0.0);
        std::size_t hits = 0;
        for (std::size_t k = 1; k <= opt.pk_max; ++k) {
            if (k <= ranking.size() && rel(ranking[k - 1].id)) ++hits;
            curve[k - 1] = static_cast<double>(hits) / static_cast<double>(k);
        }

        // HAM2: precision inside the unweighted Hamming-radius-2 ball.
        std::size_t ball = 0, ball_rel = 0;
        for (std::size_t row = 0; row < base.size(); ++row) {
            if (opt.leave_one_out && base.ids[row] == qid) continue;
            if (hamming_prefix(base, row, qcode, k_bits) <= 2) {
                ++ball;
                if (rel(base.ids[row])) ++ball_rel;
            }
        }
        ham2[qi] = ball ? static_cast<double>(ball_rel) / static_cast<double>(ball) : 0.0;

        if (opt.compute_cmc) {
            for (std::size_t r = 0; r < ranking.size(); ++r)
                if (rel(ranking[r].id)) { first_hit[qi] = r + 1; break; }
        }
    };

    const bool parallel = parallel_enabled();
    std::exception_ptr err;
#pragma omp parallel for schedule(static) if (parallel)
    for (std::size_t qi = 0; qi < nq; ++qi) {
        try {
            eval_one(qi);
        } catch (...) {
#pragma omp critical
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);

    for (std::size_t qi = 0; qi < nq; ++qi)
        if (failed[qi])
            throw InputError("evaluate: query " + std::to_string(queries.ids[qi]) +
                             " has an empty candidate set");

    MetricReport report;
    report.bits = k_bits;
    report.query_count = nq;
    for (std::size_t qi = 0; qi < nq; ++qi) {
        report.map += ap[qi];
        report.precision_at_500 += p500[qi];
        report.ham2_precision += ham2[qi];
    }
    report.map /= static_cast<double>(nq);
    report.precision_at_500 /= static_cast<double>(nq);
    report.ham2_precision /= static_cast<double>(nq);
    report.precision_curve.assign(opt.pk_max, 0.0);
    for (std::size_t qi = 0; qi < nq; ++qi)
        for (std::size_t k = 0; k < opt.pk_max; ++k) report.precision_curve[k] += pk[qi][k];
    for (double& v : report.precision_curve) v /= static_cast<double>(nq);

    if (opt.compute_cmc) {
        const std::size_t max_rank = base.size();
        for (std::size_t qi = 0; qi < nq; ++qi)
            if (first_hit[qi] == 0)
                throw InputError("cmc: query " + std::to_string(queries.ids[qi]) +
                                 " has no relevant item");
        report.cmc.assign(max_rank, 0.0);
        for (std::size_t qi = 0; qi < nq; ++qi)
            for (std::size_t r = first_hit[qi] - 1; r < max_rank; ++r) report.cmc[r] += 1.0;
        for (double& v : report.cmc) v /= static_cast<double>(nq);
    }
    return report;
}

double mean_average_precision(const CodeDatabase& base, const CodeDatabase& queries,
                              const RelevanceJudge& judge, std::size_t cutoff, std::size_t k_bits,
                              bool leave_one_out) {
    EvalOptions opt;
    opt.k_bits = k_bits;
    opt.cutoff = cutoff;
    opt.leave_one_out = leave_one_out;
    opt.pk_max = 1;
    return evaluate(base, queries, judge, opt).map;
}

double ham2_precision(const CodeDatabase& base, const CodeDatabase& queries,
                      const RelevanceJudge& judge, std::size_t k_bits, bool leave_one_out) {
    EvalOptions opt;
    opt.k_bits = k_bits;
    opt.leave_one_out = leave_one_out;
    opt.pk_max = 1;
    return evaluate(base, queries, judge, opt).ham2_precision;
}

void write_metrics_csv(const std::vector<MetricReport>& reports, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw FormatError("metrics: cannot open '" + path + "' for writing");
    os << "bits,queries,map,precision_at_500,ham2\n";
    for (const MetricReport& r : reports)
        os << r.bits << "," << r.query_count << "," << r.map << "," << r.precision_at_500 << ","
           << r.ham2_precision << "\n";
}

void write_precision_curve_csv(const std::vector<MetricReport>& reports, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw FormatError("metrics: cannot open '" + path + "' for writing");
    os << "bits,k,precision\n";
    for (const MetricReport& r : reports)
        for (std::size_t k = 0; k < r.precision_curve.size(); ++k)
            os << r.bits << "," << k + 1 << "," << r.precision_curve[k] << "\n";
}

void write_metrics_jsonl(const std::vector<MetricReport>& reports, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw FormatError("metrics: cannot open '" + path + "' for writing");
    for (const MetricReport& r : reports) {
        nlohmann::json j{{"bits", r.bits},
                         {"queries", r.query_count},
                         {"map", r.map},
                         {"precision_at_500", r.precision_at_500},
                         {"ham2", r.ham2_precision}};
        if (!r.cmc.empty()) j["cmc"] = r.cmc;
        os << j.dump() << "\n";
    }
}

void write_cmc_csv(const MetricReport& report, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw FormatError("metrics: cannot open '" + path + "' for writing");
    os << "rank,rate\n";
    for (std::size_t r = 0; r < report.cmc.size(); ++r)
        os << r + 1 << "," << report.cmc[r] << "\n";
}

} // namespace bsdh
