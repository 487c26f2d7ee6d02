#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "bsdh/error.hpp"
#include "bsdh/eval.hpp"
#include "bsdh/rng.hpp"

using namespace bsdh;

namespace {

RankingList make_ranking(std::initializer_list<std::uint64_t> ids) {
    RankingList out;
    double affinity = -10.0;
    for (std::uint64_t id : ids) out.push_back({id, affinity += 0.5});
    return out;
}

// relevance by membership
auto in_set(std::initializer_list<std::uint64_t> ids) {
    std::vector<std::uint64_t> v(ids);
    return [v](std::uint64_t id) { return std::find(v.begin(), v.end(), id) != v.end(); };
}

CodeDatabase db_from_codes(const std::vector<std::vector<std::int8_t>>& codes,
                           const std::vector<double>& weights,
                           std::uint64_t first_id = 0) {
    std::vector<EncodedItem> items;
    for (std::size_t i = 0; i < codes.size(); ++i)
        items.push_back({first_id + i, codes[i]});
    return build_database(items, weights);
}

std::vector<std::int8_t> word_code(unsigned word, std::size_t q) {
    std::vector<std::int8_t> code(q);
    for (std::size_t i = 0; i < q; ++i) code[i] = (word >> i) & 1 ? 1 : -1;
    return code;
}

} // namespace

TEST_CASE("average precision") {
    CHECK(average_precision(make_ranking({1, 2, 3}), in_set({1, 3})) ==
          doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
    CHECK(average_precision(make_ranking({1, 2, 3}), in_set({1, 2, 3})) == 1.0);
    CHECK(average_precision(make_ranking({1, 2, 3}), in_set({})) == 0.0);
    CHECK_THROWS_AS(average_precision({}, in_set({1}), 0), InputError);

    // the cutoff limits the summation range, not the denominator
    CHECK(average_precision(make_ranking({1, 2, 3}), in_set({1, 3}), 2) ==
          doctest::Approx(0.5));
}

TEST_CASE("precision at k") {
    CHECK(precision_at_k(make_ranking({1, 2}), in_set({1}), 1) == 1.0);
    CHECK(precision_at_k(make_ranking({1, 2, 3}), in_set({1, 3}), 3) ==
          doctest::Approx(2.0 / 3.0));
    // entries past the list end count as misses
    CHECK(precision_at_k(make_ranking({1}), in_set({1}), 4) == doctest::Approx(0.25));
    CHECK_THROWS_AS(precision_at_k(make_ranking({1}), in_set({1}), 0), InputError);
}

TEST_CASE("cmc curve") {
    SUBCASE("all first-rank hits") {
        const std::vector<RankingList> rankings{make_ranking({1, 2}), make_ranking({3, 4})};
        const std::vector<std::function<bool(std::uint64_t)>> judges{in_set({1}), in_set({3})};
        const auto curve = cmc_curve(rankings, judges);
        CHECK(curve[0] == 1.0);
        CHECK(curve.back() == 1.0);
    }
    SUBCASE("hits at ranks 1 and 3") {
        const std::vector<RankingList> rankings{make_ranking({1, 2, 3}), make_ranking({4, 5, 6})};
        const std::vector<std::function<bool(std::uint64_t)>> judges{in_set({1}), in_set({6})};
        const auto curve = cmc_curve(rankings, judges);
        CHECK(curve == std::vector<double>{0.5, 0.5, 1.0});
    }
    SUBCASE("a query with no relevant item is an input error") {
        const std::vector<RankingList> rankings{make_ranking({1, 2})};
        const std::vector<std::function<bool(std::uint64_t)>> judges{in_set({9})};
        CHECK_THROWS_AS(cmc_curve(rankings, judges), InputError);
    }
}

TEST_CASE("judge construction and relevance") {
    Dataset ds;
    ds.feature_shape = {1};
    for (std::size_t i = 0; i < 4; ++i) {
        DatasetItem item;
        item.features = Tensor({1});
        item.label = static_cast<std::int64_t>(i / 2);
        item.id = i;
        ds.items.push_back(std::move(item));
    }
    ds.rebuild_index();
    const RelevanceJudge judge = RelevanceJudge::from_dataset(ds);
    CHECK(judge.relevant(0, 1));
    CHECK(!judge.relevant(0, 2));
    CHECK_THROWS_AS(judge.relevant(0, 99), InputError);

    Dataset multi;
    multi.feature_shape = {1};
    multi.multilabel = true;
    for (std::size_t i = 0; i < 3; ++i) {
        DatasetItem item;
        item.features = Tensor({1});
        item.id = i;
        multi.items.push_back(std::move(item));
    }
    multi.items[0].tags = {1, 2};
    multi.items[1].tags = {2, 3};
    multi.items[2].tags = {4};
    multi.rebuild_index();
    const RelevanceJudge tag_judge = RelevanceJudge::from_dataset(multi);
    CHECK(tag_judge.relevant(0, 1));
    CHECK(!tag_judge.relevant(0, 2));
}

TEST_CASE("evaluate on constructed instances") {
    std::vector<double> unit(8, 1.0);

    SUBCASE("leave-one-out with singleton classes has no relevant candidates") {
        std::vector<std::vector<std::int8_t>> codes;
        RelevanceJudge judge;
        for (unsigned i = 0; i < 5; ++i) {
            codes.push_back(word_code(i * 37 + 1, 8));
            judge.labels[i] = static_cast<std::int64_t>(i); // every item its own class
        }
        const CodeDatabase db = db_from_codes(codes, unit);
        EvalOptions opt;
        opt.leave_one_out = true;
        CHECK(evaluate(db, db, judge, opt).map == 0.0);
    }
    SUBCASE("two classes separated by the sign bit give MAP 1") {
        std::vector<std::vector<std::int8_t>> codes;
        RelevanceJudge judge;
        for (unsigned i = 0; i < 6; ++i) {
            std::vector<std::int8_t> code(8, i < 3 ? 1 : -1);
            code[7] = i % 2 ? 1 : -1; // a noise bit shared across classes
            codes.push_back(code);
            judge.labels[i] = i < 3 ? 0 : 1;
        }
        const CodeDatabase db = db_from_codes(codes, unit);
        EvalOptions opt;
        opt.leave_one_out = true;
        const MetricReport report = evaluate(db, db, judge, opt);
        CHECK(report.map == 1.0);
        CHECK(report.precision_curve[0] == 1.0);
        CHECK(report.query_count == 6);
    }
    SUBCASE("five-item toy MAP equals the hand-computed mean") {
        // one query (id 0, class 0) against five candidates (ids 1..5)
        std::vector<std::vector<std::int8_t>> base_codes;
        RelevanceJudge judge;
        judge.labels[0] = 0;
        // distances to the query 0b00000000: chosen so the ranking is ids 1,2,3,4,5
        const unsigned words[5] = {0x00, 0x01, 0x03, 0x07, 0x0F};
        const std::int64_t classes[5] = {0, 1, 0, 1, 0};
        for (unsigned i = 0; i < 5; ++i) {
            base_codes.push_back(word_code(words[i], 8));
            judge.labels[i + 1] = classes[i];
        }
        const CodeDatabase base = db_from_codes(base_codes, unit, 1);
        const CodeDatabase queries = db_from_codes({word_code(0x00, 8)}, unit, 0);
        EvalOptions opt;
        const MetricReport report = evaluate(base, queries, judge, opt);
        // relevant at ranks 1, 3, 5: AP = (1/1 + 2/3 + 3/5) / 3
        CHECK(report.map == doctest::Approx((1.0 + 2.0 / 3.0 + 3.0 / 5.0) / 3.0));
    }
}

TEST_CASE("leave-one-out removes the query from its candidates") {
    std::vector<double> unit(8, 1.0);
    RelevanceJudge judge;
    judge.labels[0] = 0;
    judge.labels[1] = 0;
    judge.labels[2] = 1;
    const CodeDatabase db =
        db_from_codes({word_code(0x00, 8), word_code(0x0F, 8), word_code(0xF0, 8)}, unit);

    EvalOptions with, without;
    with.leave_one_out = true;
    const double map_with = evaluate(db, db, judge, with).map;
    const double map_without = evaluate(db, db, judge, without).map;
    // keeping the query itself puts a guaranteed hit at rank 1
    CHECK(map_without > map_with);
    CHECK(map_without == 1.0);
    // dropped selves: queries 0 and 1 find their classmate at rank 1,
    // query 2 has no same-class candidate left and scores 0
    CHECK(map_with == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("ham2 precision over the radius-2 ball") {
    std::vector<double> unit(16, 1.0);
    RelevanceJudge judge;

    SUBCASE("constructed six-code instance: three in the ball, two relevant") {
        std::vector<std::vector<std::int8_t>> codes{
            word_code(0x0000, 16), // distance 0, class 0 (relevant)
            word_code(0x0001, 16), // distance 1, class 0 (relevant)
            word_code(0x0003, 16), // distance 2, class 1
            word_code(0x001F, 16), // distance 5, class 0 (outside)
            word_code(0x00FF, 16), // distance 8, class 1
            word_code(0xFFFF, 16), // distance 16, class 1
        };
        const std::int64_t classes[6] = {0, 0, 1, 0, 1, 1};
        for (unsigned i = 0; i < 6; ++i) judge.labels[i + 10] = classes[i];
        judge.labels[0] = 0;
        const CodeDatabase base = db_from_codes(codes, unit, 10);
        const CodeDatabase queries = db_from_codes({word_code(0, 16)}, unit, 0);
        CHECK(ham2_precision(base, queries, judge, 16, false) == doctest::Approx(2.0 / 3.0));
    }
    SUBCASE("exact self match alone in the ball") {
        judge.labels[0] = 0;
        judge.labels[10] = 0;
        judge.labels[11] = 1;
        const CodeDatabase base =
            db_from_codes({word_code(0, 16), word_code(0xFFFF, 16)}, unit, 10);
        const CodeDatabase queries = db_from_codes({word_code(0, 16)}, unit, 0);
        CHECK(ham2_precision(base, queries, judge, 16, false) == 1.0);
    }
    SUBCASE("an empty ball scores zero") {
        judge.labels[0] = 0;
        judge.labels[10] = 0;
        const CodeDatabase base = db_from_codes({word_code(0xFFFF, 16)}, unit, 10);
        const CodeDatabase queries = db_from_codes({word_code(0, 16)}, unit, 0);
        CHECK(ham2_precision(base, queries, judge, 16, false) == 0.0);
    }
}

TEST_CASE("metric invariances") {
    std::mt19937_64 rng = make_rng(51, 0);
    std::uniform_int_distribution<int> bit(0, 1);
    std::uniform_int_distribution<int> cls(0, 2);

    std::vector<std::vector<std::int8_t>> codes;
    RelevanceJudge judge;
    for (unsigned i = 0; i < 30; ++i) {
        std::vector<std::int8_t> code(16);
        for (auto& b : code) b = bit(rng) ? 1 : -1;
        codes.push_back(code);
        judge.labels[i] = cls(rng);
    }

    SUBCASE("MAP depends only on the ranking order") {
        // scaling every weight scales every affinity monotonically
        const CodeDatabase a = db_from_codes(codes, std::vector<double>(16, 1.0));
        const CodeDatabase b = db_from_codes(codes, std::vector<double>(16, 2.5));
        EvalOptions opt;
        opt.leave_one_out = true;
        const MetricReport ra = evaluate(a, a, judge, opt);
        const MetricReport rb = evaluate(b, b, judge, opt);
        CHECK(ra.map == rb.map);
        CHECK(ra.precision_at_500 == rb.precision_at_500);
    }
    SUBCASE("lut and bruteforce paths give identical metrics") {
        const CodeDatabase db = db_from_codes(codes, std::vector<double>(16, 1.0));
        EvalOptions lut_opt, bf_opt;
        lut_opt.leave_one_out = bf_opt.leave_one_out = true;
        lut_opt.compute_cmc = bf_opt.compute_cmc = true;
        bf_opt.use_lut = false;
        const MetricReport rl = evaluate(db, db, judge, lut_opt);
        const MetricReport rb = evaluate(db, db, judge, bf_opt);
        CHECK(rl.map == rb.map);
        CHECK(rl.precision_curve == rb.precision_curve);
        CHECK(rl.ham2_precision == rb.ham2_precision);
        CHECK(rl.cmc == rb.cmc);
        // CMC is a nondecreasing curve in [0,1] ending at 1
        for (std::size_t r = 1; r < rl.cmc.size(); ++r) CHECK(rl.cmc[r] >= rl.cmc[r - 1]);
        CHECK(rl.cmc.back() == 1.0);
        CHECK(rl.map >= 0.0);
        CHECK(rl.map <= 1.0);
    }
}

TEST_CASE("report writers emit the documented layouts") {
    MetricReport r;
    r.bits = 16;
    r.query_count = 3;
    r.map = 0.5;
    r.precision_at_500 = 0.25;
    r.ham2_precision = 0.75;
    r.precision_curve = {1.0, 0.5};
    r.cmc = {0.5, 1.0};

    const auto dir = std::filesystem::temp_directory_path();
    const std::string base = (dir / "bsdh_metrics").string();
    write_metrics_csv({r}, base + ".csv");
    write_precision_curve_csv({r}, base + "_pk.csv");
    write_metrics_jsonl({r}, base + ".jsonl");
    write_cmc_csv(r, base + "_cmc.csv");

    auto slurp = [](const std::string& p) {
        std::ifstream f(p);
        return std::string(std::istreambuf_iterator<char>(f), {});
    };
    CHECK(slurp(base + ".csv") == "bits,queries,map,precision_at_500,ham2\n16,3,0.5,0.25,0.75\n");
    CHECK(slurp(base + "_pk.csv") == "bits,k,precision\n16,1,1\n16,2,0.5\n");
    CHECK(slurp(base + "_cmc.csv") == "rank,rate\n1,0.5\n2,1\n");
    CHECK(slurp(base + ".jsonl").find("\"map\":0.5") != std::string::npos);
    for (const char* suffix : {".csv", "_pk.csv", ".jsonl", "_cmc.csv"})
        std::filesystem::remove(base + suffix);
}
