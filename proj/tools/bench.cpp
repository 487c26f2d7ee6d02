#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include <CLI11.hpp>

#include "bsdh/codec.hpp"
#include "bsdh/eval.hpp"
#include "bsdh/model.hpp"
#include "bsdh/parallel.hpp"
#include "bsdh/rng.hpp"
#include "bsdh/search.hpp"
#include "bsdh/trainer.hpp"

namespace {

using namespace bsdh;
using clock_type = std::chrono::steady_clock;

double ms_since(clock_type::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock_type::now() - t0).count();
}

void report(const char* name, double serial_ms, double omp_ms, bool identical) {
    std::printf("%-28s serial %9.2f ms   omp %9.2f ms   speedup %5.2fx   %s\n", name, serial_ms,
                omp_ms, serial_ms / omp_ms, identical ? "results identical" : "RESULTS DIFFER");
}

void bench_gradients(std::size_t batch, std::size_t repeat) {
    Model model = Model::make("desk", {1, 28, 28}, 16, 7);
    std::mt19937_64 rng = make_rng(7, 1);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<Tensor> images(batch, Tensor({1, 28, 28}));
    for (auto& img : images)
        for (double& v : img.data) v = dist(rng);
    std::vector<const Tensor*> ptrs;
    for (const auto& img : images) ptrs.push_back(&img);

    std::vector<std::vector<double>> outs;
    std::vector<ActivationCache> caches;
    std::vector<std::vector<double>> ograds(batch, std::vector<double>(16, 0.5));

    // warm both paths (allocations, OpenMP thread pool) before timing
    batch_forward_serial(model, ptrs, outs, caches);
    GradientSet gs = batch_backward_serial(model, caches, ograds);
    batch_forward_omp(model, ptrs, outs, caches);
    GradientSet go = batch_backward_omp(model, caches, ograds);
    bool same = gs.size() == go.size();
    for (std::size_t t = 0; same && t < gs.size(); ++t) same = gs[t].data == go[t].data;

    auto t0 = clock_type::now();
    for (std::size_t r = 0; r < repeat; ++r) {
        batch_forward_serial(model, ptrs, outs, caches);
        batch_backward_serial(model, caches, ograds);
    }
    const double serial_ms = ms_since(t0);

    t0 = clock_type::now();
    for (std::size_t r = 0; r < repeat; ++r) {
        batch_forward_omp(model, ptrs, outs, caches);
        batch_backward_omp(model, caches, ograds);
    }
    const double omp_ms = ms_since(t0);
    report("batch forward+backward", serial_ms, omp_ms, same);
}

void bench_scan(std::size_t n, std::size_t q, std::size_t queries) {
    std::mt19937_64 rng = make_rng(11, 2);
    std::uniform_real_distribution<double> wdist(0.25, 2.0);
    std::uniform_int_distribution<int> bit(0, 1);

    std::vector<double> weights(q);
    for (double& w : weights) w = wdist(rng);
    std::vector<EncodedItem> items(n);
    for (std::size_t i = 0; i < n; ++i) {
        items[i].id = i;
        items[i].code.resize(q);
        for (auto& b : items[i].code) b = bit(rng) ? 1 : -1;
    }
    const CodeDatabase db = build_database(items, weights);
    const ChunkLuts luts = build_lut(db.weights, q);

    std::vector<std::vector<std::uint8_t>> qcodes(queries);
    for (auto& qc : qcodes) {
        std::vector<std::int8_t> code(q);
        for (auto& b : code) b = bit(rng) ? 1 : -1;
        qc = pack_in_order(code, db.bit_order);
    }

    std::vector<double> a, b, c;
    bool same = true;
    for (const auto& qc : qcodes) {
        scan_lut_serial(db, luts, qc, a);
        scan_lut_omp(db, luts, qc, b);
        scan_bruteforce_serial(db, qc, q, c);
        same = same && a == b && a == c;
    }

    // each engine timed over a consecutive run of queries
    auto t0 = clock_type::now();
    for (const auto& qc : qcodes) scan_lut_serial(db, luts, qc, a);
    const double lut_serial = ms_since(t0);
    t0 = clock_type::now();
    for (const auto& qc : qcodes) scan_lut_omp(db, luts, qc, b);
    const double lut_omp = ms_since(t0);
    t0 = clock_type::now();
    for (const auto& qc : qcodes) scan_bruteforce_serial(db, qc, q, c);
    const double bf_serial = ms_since(t0);
    report("lut affinity scan", lut_serial, lut_omp, same);
    std::printf("%-28s lut    %9.2f ms   bruteforce %9.2f ms   lut is %.1fx faster\n",
                "lut vs bruteforce (serial)", lut_serial, bf_serial, bf_serial / lut_serial);
}

void bench_eval(std::size_t n, std::size_t q, std::size_t queries) {
    std::mt19937_64 rng = make_rng(13, 3);
    std::uniform_int_distribution<int> bit(0, 1);
    std::uniform_int_distribution<int> cls(0, 9);
    std::vector<double> weights(q, 1.0);

    std::vector<EncodedItem> items(n);
    RelevanceJudge judge;
    for (std::size_t i = 0; i < n; ++i) {
        items[i].id = i;
        items[i].code.resize(q);
        for (auto& b : items[i].code) b = bit(rng) ? 1 : -1;
        judge.labels[i] = cls(rng);
    }
    const CodeDatabase db = build_database(items, weights);
    CodeDatabase qdb = db;
    qdb.ids.resize(queries);
    qdb.codes.resize(queries * qdb.stride());

    EvalOptions opt;
    opt.leave_one_out = true;
    opt.pk_max = 100;

    set_threads(1);
    auto t0 = clock_type::now();
    const MetricReport serial = evaluate(db, qdb, judge, opt);
    const double serial_ms = ms_since(t0);

    set_threads(0);
    t0 = clock_type::now();
    const MetricReport omp = evaluate(db, qdb, judge, opt);
    const double omp_ms = ms_since(t0);

    report("metric evaluation", serial_ms, omp_ms,
           serial.map == omp.map && serial.precision_curve == omp.precision_curve &&
               serial.ham2_precision == omp.ham2_precision);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"bsdh-bench: serial reference vs OpenMP kernels"};
    std::size_t n = 200000, q = 64, queries = 50, batch = 128, repeat = 5;
    int threads = 0;
    app.add_option("--n", n, "database size for the scan benchmark");
    app.add_option("--q", q, "code length");
    app.add_option("--queries", queries, "query count");
    app.add_option("--batch", batch, "image batch for the gradient benchmark");
    app.add_option("--repeat", repeat, "gradient benchmark repetitions");
    app.add_option("-t,--threads", threads, "OpenMP threads (0 = default)");
    CLI11_PARSE(app, argc, argv);

    bsdh::set_threads(threads);
    bench_gradients(batch, repeat);
    bench_scan(n, q, queries);
    bench_eval(std::min<std::size_t>(n, 20000), q, queries);
    return 0;
}
