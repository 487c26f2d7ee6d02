#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "bsdh/objective.hpp"
#include "bsdh/rng.hpp"

using namespace bsdh;

namespace {

double rel_err(double a, double b) {
    const double scale = std::max(std::fabs(a), std::fabs(b));
    return scale < 1e-9 ? 0.0 : std::fabs(a - b) / scale;
}

struct RandomBatch {
    std::vector<std::vector<double>> outputs;
    std::vector<TripletIndex> triplets;
    SymMatrix lap;
};

RandomBatch random_batch(std::mt19937_64& rng, std::size_t m, std::size_t q,
                         std::size_t triplet_count) {
    RandomBatch batch;
    std::uniform_real_distribution<double> out_dist(-1.5, 1.5);
    batch.outputs.assign(m, std::vector<double>(q));
    for (auto& row : batch.outputs)
        for (double& v : row) v = out_dist(rng);

    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(m - 1));
    while (batch.triplets.size() < triplet_count) {
        TripletIndex t{pick(rng), pick(rng), pick(rng)};
        if (t.anchor == t.positive || t.anchor == t.negative || t.positive == t.negative)
            continue;
        batch.triplets.push_back(t);
    }

    std::uniform_real_distribution<double> s_dist(0.0, 1.0);
    SymMatrix s(m);
    for (std::size_t i = 0; i < m; ++i) {
        s.at(i, i) = 1.0;
        for (std::size_t j = i + 1; j < m; ++j) {
            const double v = s_dist(rng);
            s.at(i, j) = v;
            s.at(j, i) = v;
        }
    }
    batch.lap = laplacian(s);
    return batch;
}

} // namespace

TEST_CASE("weighted affinity of discrete codes") {
    std::vector<double> unit(8, 1.0);
    std::vector<std::int8_t> a{1, 1, 1, 1, 1, 1, 1, 1};
    std::vector<std::int8_t> na{-1, -1, -1, -1, -1, -1, -1, -1};
    CHECK(weighted_affinity_codes(a, a, unit) == -8.0);
    CHECK(weighted_affinity_codes(a, na, unit) == 8.0);

    std::vector<std::int8_t> h1{1, -1, 1, -1}, h2{1, 1, -1, -1};
    std::vector<double> w{1, 2, 1, 2};
    CHECK(weighted_affinity_codes(h1, h2, w) == 0.0); // -(1 - 4 - 1 + 4)

    std::vector<std::int8_t> shorter{1, -1};
    CHECK_THROWS_AS(weighted_affinity_codes(h1, shorter, w), InputError);
}

TEST_CASE("weighted euclidean distance of relaxed codes") {
    std::vector<double> r1{1.0, 1.0}, r2{-1.0, 1.0}, unit{1.0, 1.0};
    CHECK(weighted_euclidean(r1, r1, unit) == 0.0);
    CHECK(weighted_euclidean(r1, r2, unit) == 4.0);

    std::vector<double> a{0.5, -0.5}, b{-0.5, 0.5}, w{2.0, 1.0};
    CHECK(weighted_euclidean(a, b, w) == 5.0); // (2*1)^2 + (1*1)^2
    std::vector<double> shorter{0.5};
    CHECK_THROWS_AS(weighted_euclidean(a, shorter, w), InputError);
    CHECK(weighted_euclidean(a, b, w) == weighted_euclidean(b, a, w));
}

TEST_CASE("triplet margin term clamps at the hinge floor") {
    std::vector<double> unit(2, 1.0);
    std::vector<double> ri{1.0, 1.0}, rp{1.0, -1.0}, rn{-1.0, -1.0};

    // identical pairs cancel; C = -q/2 < 0 keeps the max at 0
    CHECK(triplet_margin_term(ri, rp, rp, unit, -1.0) == 0.0);

    // fully separated: clamp takes over
    std::vector<double> unit8(8, 1.0), a8(8, 1.0), n8(8, -1.0);
    CHECK(triplet_margin_term(a8, a8, n8, unit8, -4.0) == -4.0);

    // q = 2 worked example: M+ = 4, M- = 8, D = -4, clamped to -1
    CHECK(triplet_margin_term(ri, rp, rn, unit, -1.0) == -1.0);
}

TEST_CASE("similarity matrices") {
    SUBCASE("class similarity with unit diagonal") {
        const SymMatrix s = build_similarity_class({7, 7});
        CHECK(s.at(0, 0) == 1.0);
        CHECK(s.at(0, 1) == 1.0);
        CHECK(s.at(1, 0) == 1.0);
        const SymMatrix d = build_similarity_class({1, 2});
        CHECK(d.at(0, 1) == 0.0);
        const SymMatrix t = build_similarity_class({1, 1, 2});
        CHECK(t.at(0, 1) == 1.0);
        CHECK(t.at(0, 2) == 0.0);
        CHECK(t.at(1, 2) == 0.0);
    }
    SUBCASE("jaccard similarity") {
        const SymMatrix s = build_similarity_jaccard({{1, 2}, {2, 3}, {1, 2}, {4}});
        CHECK(s.at(0, 1) == doctest::Approx(1.0 / 3.0));
        CHECK(s.at(0, 2) == 1.0);
        CHECK(s.at(0, 3) == 0.0);
        CHECK_THROWS_AS(build_similarity_jaccard({{1}, {}}), InputError);
    }
}

TEST_CASE("laplacian from similarity") {
    SymMatrix s(2);
    s.at(0, 1) = 1.0;
    s.at(1, 0) = 1.0;
    const SymMatrix l = laplacian(s);
    CHECK(l.at(0, 0) == 1.0);
    CHECK(l.at(0, 1) == -1.0);
    CHECK(l.at(1, 0) == -1.0);
    CHECK(l.at(1, 1) == 1.0);

    const SymMatrix zero = laplacian(SymMatrix(3));
    for (double v : zero.a) CHECK(v == 0.0);

    SymMatrix s3(3);
    s3.at(0, 1) = s3.at(1, 0) = 0.5;
    s3.at(0, 2) = s3.at(2, 0) = 0.5;
    const SymMatrix l3 = laplacian(s3);
    CHECK(l3.at(0, 0) == 1.0);
    CHECK(l3.at(0, 1) == -0.5);
    CHECK(l3.at(1, 1) == 0.5);
    CHECK(l3.at(1, 2) == 0.0);
    CHECK(l3.at(2, 2) == 0.5);

    SymMatrix asym(2);
    asym.at(0, 1) = 0.5;
    CHECK_THROWS_AS(laplacian(asym), InputError);

    // row sums vanish for random similarity
    std::mt19937_64 rng = make_rng(31, 0);
    const RandomBatch batch = random_batch(rng, 7, 2, 3);
    for (std::size_t i = 0; i < 7; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < 7; ++j) row += batch.lap.at(i, j);
        CHECK(std::fabs(row) < 1e-12);
    }
}

TEST_CASE("regularizer value") {
    SUBCASE("zero Laplacian") {
        CHECK(regularizer_value({{1.0, 2.0}, {0.5, 0.25}}, SymMatrix(2)) == 0.0);
    }
    SUBCASE("two-node path graph gives the squared column distance") {
        SymMatrix s(2);
        s.at(0, 1) = s.at(1, 0) = 1.0;
        CHECK(regularizer_value({{1.0, 0.0}, {0.0, 1.0}}, laplacian(s)) == 2.0);
    }
    SUBCASE("identical columns vanish and random graphs stay nonnegative") {
        std::mt19937_64 rng = make_rng(32, 0);
        for (int trial = 0; trial < 50; ++trial) {
            RandomBatch batch = random_batch(rng, 6, 3, 2);
            CHECK(regularizer_value(batch.outputs, batch.lap) > -1e-9);
            std::vector<std::vector<double>> same(6, batch.outputs[0]);
            CHECK(std::fabs(regularizer_value(same, batch.lap)) < 1e-12);
        }
    }
}

TEST_CASE("batch loss composition") {
    ObjectiveConfig cfg = make_objective_config(2, 0.0);

    SUBCASE("identical outputs cancel every triplet") {
        std::vector<std::vector<double>> outs(3, {0.25, -0.5});
        std::vector<TripletIndex> trips{{0, 1, 2}, {1, 0, 2}};
        CHECK(batch_loss(outs, trips, SymMatrix(3), cfg) == 0.0);
    }
    SUBCASE("single clamped triplet") {
        std::vector<std::vector<double>> outs{{1.0, 1.0}, {1.0, -1.0}, {-1.0, -1.0}};
        std::vector<TripletIndex> trips{{0, 1, 2}};
        CHECK(batch_loss(outs, trips, SymMatrix(3), cfg) == -1.0);
    }
    SUBCASE("pure regularizer when no triplets exist") {
        ObjectiveConfig reg_cfg = make_objective_config(2, 0.001);
        SymMatrix s(2);
        s.at(0, 1) = s.at(1, 0) = 1.0;
        const double loss =
            batch_loss({{1.0, 0.0}, {0.0, 1.0}}, {}, laplacian(s), reg_cfg);
        CHECK(loss == doctest::Approx(0.002).epsilon(1e-12));
    }
    SUBCASE("margin term never drops below the floor") {
        std::mt19937_64 rng = make_rng(33, 0);
        for (int trial = 0; trial < 30; ++trial) {
            RandomBatch batch = random_batch(rng, 8, 4, 60);
            ObjectiveConfig c4 = make_objective_config(4, 0.0);
            const LossBreakdown detail =
                batch_loss_detail(batch.outputs, batch.triplets, batch.lap, c4);
            CHECK(detail.margin >= c4.hinge_floor - 1e-12);
        }
    }
    SUBCASE("out-of-range triplet index is rejected") {
        std::vector<std::vector<double>> outs(2, {0.0, 0.0});
        CHECK_THROWS_AS(batch_loss(outs, {{0, 1, 5}}, SymMatrix(2), cfg), InputError);
    }
}

TEST_CASE("image gradients: flat region and hand-checked contributions") {
    SUBCASE("everything clamped gives zero gradient") {
        ObjectiveConfig cfg = make_objective_config(2, 0.0);
        std::vector<std::vector<double>> outs{{1.0, 1.0}, {1.0, -1.0}, {-1.0, -1.0}};
        // D = 4 - 8 = -4 <= C = -1: the hinge gates everything off
        const auto grads = image_gradients(outs, {{0, 1, 2}}, SymMatrix(3), cfg);
        for (const auto& g : grads)
            for (double v : g) CHECK(v == 0.0);
    }
    SUBCASE("per-role contributions with the clamp out of the way") {
        ObjectiveConfig cfg = make_objective_config(2, 0.0);
        cfg.hinge_floor = -100.0; // keep D > C so the margin stays active
        std::vector<std::vector<double>> outs{{1.0, 1.0}, {1.0, -1.0}, {-1.0, -1.0}};
        const auto grads = image_gradients(outs, {{0, 1, 2}}, SymMatrix(3), cfg);
        // anchor: 2(c- - c+); positive: -2(c_a - c+); negative: 2(c_a - c-)
        CHECK(grads[0] == std::vector<double>{-4.0, 0.0});
        CHECK(grads[1] == std::vector<double>{0.0, -4.0});
        CHECK(grads[2] == std::vector<double>{4.0, 4.0});
    }
}

TEST_CASE("image gradients match central finite differences of batch_loss") {
    std::mt19937_64 rng = make_rng(34, 0);
    const double h = 1e-6;
    for (int trial = 0; trial < 25; ++trial) {
        RandomBatch batch = random_batch(rng, 6, 4, 40);
        ObjectiveConfig cfg = make_objective_config(4, 0.001);
        cfg.normalize_margin = trial % 2 == 0;

        const auto analytic = image_gradients(batch.outputs, batch.triplets, batch.lap, cfg);
        for (std::size_t j = 0; j < batch.outputs.size(); ++j) {
            for (std::size_t k = 0; k < 4; ++k) {
                const double saved = batch.outputs[j][k];
                batch.outputs[j][k] = saved + h;
                const double up = batch_loss(batch.outputs, batch.triplets, batch.lap, cfg);
                batch.outputs[j][k] = saved - h;
                const double down = batch_loss(batch.outputs, batch.triplets, batch.lap, cfg);
                batch.outputs[j][k] = saved;
                const double fd = (up - down) / (2 * h);
                CHECK(rel_err(analytic[j][k], fd) < 1e-6);
            }
        }
    }
}

TEST_CASE("image-based and triplet-based gradient routes agree") {
    std::mt19937_64 rng = make_rng(35, 0);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t m = 4 + trial % 17; // up to 20 images
        RandomBatch batch = random_batch(rng, m, 6, 20 + trial * 12);
        ObjectiveConfig cfg = make_objective_config(6, 0.001);
        const auto a = image_gradients(batch.outputs, batch.triplets, batch.lap, cfg);
        const auto b = image_gradients_triplet_route(batch.outputs, batch.triplets, batch.lap, cfg);
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t k = 0; k < 6; ++k) CHECK(rel_err(a[j][k], b[j][k]) < 1e-10);
    }
}

TEST_CASE("loss and gradients ignore triplet order, bit for bit") {
    std::mt19937_64 rng = make_rng(36, 0);
    RandomBatch batch = random_batch(rng, 8, 4, 100);
    ObjectiveConfig cfg = make_objective_config(4, 0.001);

    const double loss = batch_loss(batch.outputs, batch.triplets, batch.lap, cfg);
    const auto grads = image_gradients(batch.outputs, batch.triplets, batch.lap, cfg);

    auto shuffled = batch.triplets;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(batch_loss(batch.outputs, shuffled, batch.lap, cfg) == loss);
    CHECK(image_gradients(batch.outputs, shuffled, batch.lap, cfg) == grads);
}

TEST_CASE("discrete affinity and relaxed distance are consistent") {
    // exact on a dyadic weight grid, exhaustively over all q=8 code pairs
    std::mt19937_64 rng = make_rng(37, 0);
    std::uniform_int_distribution<int> grid(1, 64);
    for (int wtrial = 0; wtrial < 3; ++wtrial) {
        std::vector<double> w(8);
        for (double& x : w) x = grid(rng) / 8.0;
        double wsum = 0.0;
        for (double x : w) wsum += x * x;
        for (unsigned a = 0; a < 256; ++a) {
            for (unsigned b = 0; b < 256; ++b) {
                std::vector<std::int8_t> ha(8), hb(8);
                std::vector<double> ra(8), rb(8);
                for (unsigned i = 0; i < 8; ++i) {
                    ha[i] = (a >> i) & 1 ? 1 : -1;
                    hb[i] = (b >> i) & 1 ? 1 : -1;
                    ra[i] = ha[i];
                    rb[i] = hb[i];
                }
                CHECK(weighted_euclidean(ra, rb, w) ==
                      2.0 * wsum + 2.0 * weighted_affinity_codes(ha, hb, w));
            }
        }
    }

    // arbitrary real weights agree to rounding
    std::uniform_real_distribution<double> wdist(0.05, 3.0);
    std::uniform_int_distribution<int> bit(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> w(8);
        for (double& x : w) x = wdist(rng);
        double wsum = 0.0;
        for (double x : w) wsum += x * x;
        std::vector<std::int8_t> ha(8), hb(8);
        std::vector<double> ra(8), rb(8);
        for (unsigned i = 0; i < 8; ++i) {
            ha[i] = bit(rng) ? 1 : -1;
            hb[i] = bit(rng) ? 1 : -1;
            ra[i] = ha[i];
            rb[i] = hb[i];
        }
        CHECK(rel_err(weighted_euclidean(ra, rb, w),
                      2.0 * wsum + 2.0 * weighted_affinity_codes(ha, hb, w)) < 1e-12);
    }
}
