#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lut/rng.hpp"
#include "lut/table.hpp"

#include <cmath>

using namespace lut;

TEST_CASE("feature sub-table: uniform logits give the even ramp") {
    std::vector<double> g(4, 0.37); // equal logits, any value
    const auto tf = build_feature_subtable(g);
    REQUIRE(tf.size() == 5);
    for (int i = 0; i < 5; ++i) CHECK(tf[size_t(i)] == doctest::Approx(0.25 * i).epsilon(1e-12));
}

TEST_CASE("feature sub-table: endpoints are exact for arbitrary logits") {
    Rng rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> g(size_t(1 + rng.below(40)));
        for (auto& v : g) v = rng.normal(0.0, 3.0);
        const auto tf = build_feature_subtable(g);
        CHECK(tf.front() == 0.0);
        CHECK(tf.back() == 1.0);
    }
}

TEST_CASE("feature sub-table: hand-evaluated softmax prefix") {
    const std::vector<double> g = {std::log(1.0), std::log(3.0)};
    const auto tf = build_feature_subtable(g);
    REQUIRE(tf.size() == 3);
    CHECK(tf[0] == 0.0);
    CHECK(tf[1] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(tf[2] == 1.0);
}

TEST_CASE("feature sub-table rejects empty logits") {
    CHECK_THROWS_AS(build_feature_subtable(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("weight sub-table: uniform logits give the symmetric ramp") {
    std::vector<double> q(2, -1.1);
    const auto tw = build_weight_subtable(q, q);
    REQUIRE(tw.size() == 5);
    const double want[5] = {-1.0, -0.5, 0.0, 0.5, 1.0};
    for (int j = 0; j < 5; ++j) CHECK(tw[size_t(j)] == doctest::Approx(want[j]).epsilon(1e-12));
}

TEST_CASE("weight sub-table: endpoints and zero center for arbitrary logits") {
    Rng rng(9);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> qn(size_t(1 + rng.below(32))), qp(qn.size());
        for (auto& v : qn) v = rng.normal(0.0, 2.0);
        for (auto& v : qp) v = rng.normal(0.0, 2.0);
        const auto tw = build_weight_subtable(qn, qp);
        const size_t c = (tw.size() - 1) / 2;
        CHECK(tw.front() == -1.0);
        CHECK(tw[c] == 0.0);
        CHECK(tw.back() == 1.0);
    }
}

TEST_CASE("weight sub-table: outward accumulation on the negative side") {
    const std::vector<double> qpos = {std::log(1.0), std::log(3.0)};
    const std::vector<double> qneg = {std::log(3.0), std::log(1.0)};
    const auto tw = build_weight_subtable(qneg, qpos);
    REQUIRE(tw.size() == 5);
    CHECK(tw[0] == -1.0);
    CHECK(tw[1] == doctest::Approx(-0.75).epsilon(1e-12));
    CHECK(tw[2] == 0.0);
    CHECK(tw[3] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(tw[4] == 1.0);
}

TEST_CASE("even weight granularity is rejected (no center cell)") {
    CHECK_THROWS_AS(check_weight_granularity(8), std::invalid_argument);
    CHECK_NOTHROW(check_weight_granularity(9));
}

TEST_CASE("2d lookup equals the sub-table product, with exact special cells") {
    std::vector<double> g(4, 0.0), q(2, 0.0);
    const auto t = materialize_table<float>(build_feature_subtable(g),
                                            build_weight_subtable(q, q));
    CHECK(t.at(3, 4) == doctest::Approx(0.75));
    for (int64_t i = 0; i < t.nf; ++i) CHECK(t.at(i, 2) == 0.0f); // center column
    CHECK(t.at(t.nf - 1, t.nw - 1) == 1.0f);
    CHECK_THROWS_AS(t.at(5, 0), std::out_of_range);

    // brute-force outer-product equivalence
    for (int64_t i = 0; i < t.nf; ++i)
        for (int64_t j = 0; j < t.nw; ++j)
            CHECK(t.at(i, j) == float(double(t.tf[size_t(i)]) * double(t.tw[size_t(j)])));
}

TEST_CASE("construction properties across granularities and random logits") {
    Rng rng(13);
    for (int64_t n : {5, 9, 17, 33, 65}) {
        for (int rep = 0; rep < 60; ++rep) {
            std::vector<double> g(size_t(n - 1)), qn(size_t((n - 1) / 2)), qp(qn.size());
            for (auto& v : g) v = rng.normal(0.0, 4.0);
            for (auto& v : qn) v = rng.normal(0.0, 4.0);
            for (auto& v : qp) v = rng.normal(0.0, 4.0);
            const auto tf = build_feature_subtable(g);
            const auto tw = build_weight_subtable(qn, qp);
            CHECK(tf.front() == 0.0);
            CHECK(tf.back() == 1.0);
            CHECK(tw.front() == -1.0);
            CHECK(tw[size_t((n - 1) / 2)] == 0.0);
            CHECK(tw.back() == 1.0);
            for (size_t i = 0; i + 1 < tf.size(); ++i) {
                CHECK(tf[i] <= tf[i + 1]);
                CHECK(tf[i] >= 0.0);
                CHECK(tf[i] <= 1.0);
            }
            for (size_t j = 0; j + 1 < tw.size(); ++j) CHECK(tw[j] <= tw[j + 1]);
            for (size_t i = 0; i < tf.size(); ++i)
                for (size_t j = 0; j < tw.size(); ++j)
                    CHECK(std::abs(tf[i] * tw[j]) <= 1.0);
        }
    }
}

TEST_CASE("mass gradients through the cumulative sum: worked 5x5 case") {
    // response uses feature cell 2 and weight cell 4 of the uniform table:
    // only masses p1, p2 feed cell 2, each with weight T_w[4] = 1
    std::vector<double> cell_grads(5, 0.0);
    cell_grads[2] = 1.0;
    const auto gm = cumsum_mass_grads(cell_grads);
    REQUIRE(gm.size() == 4);
    CHECK(gm[0] == 1.0);
    CHECK(gm[1] == 1.0);
    CHECK(gm[2] == 0.0);
    CHECK(gm[3] == 0.0);
}

TEST_CASE("zero upstream gradient gives zero logit gradients") {
    std::vector<double> logits(6, 0.3);
    std::vector<double> cell(7, 0.0);
    for (double v : feature_logit_grads(logits, cell)) CHECK(v == 0.0);
}

TEST_CASE("logit gradients match finite differences on a frozen-hit loss") {
    Rng rng(29);
    for (int rep = 0; rep < 10; ++rep) {
        const int64_t nf = 9, nw = 9;
        std::vector<double> g(size_t(nf - 1)), qn(size_t((nw - 1) / 2)), qp(qn.size());
        for (auto& v : g) v = rng.normal();
        for (auto& v : qn) v = rng.normal();
        for (auto& v : qp) v = rng.normal();

        // random frozen hit pattern with upstream weights
        struct Hit {
            int64_t i, j;
            double u;
        };
        std::vector<Hit> hits;
        for (int h = 0; h < 40; ++h)
            hits.push_back({int64_t(rng.below(nf)), int64_t(rng.below(nw)), rng.normal()});

        auto loss = [&](void) {
            const auto tf = build_feature_subtable(g);
            const auto tw = build_weight_subtable(qn, qp);
            double acc = 0.0;
            for (const auto& h : hits) acc += h.u * tf[size_t(h.i)] * tw[size_t(h.j)];
            return acc;
        };

        // analytic: accumulate cell gradients, then chain
        const auto tf = build_feature_subtable(g);
        const auto tw = build_weight_subtable(qn, qp);
        std::vector<double> cell_tf(size_t(nf), 0.0), cell_tw(size_t(nw), 0.0);
        for (const auto& h : hits) {
            cell_tf[size_t(h.i)] += h.u * tw[size_t(h.j)];
            cell_tw[size_t(h.j)] += h.u * tf[size_t(h.i)];
        }
        const auto g_an = feature_logit_grads(g, cell_tf);
        const auto w_an = weight_logit_grads(qn, qp, cell_tw);

        const double step = 1e-4;
        auto fd_check = [&](std::vector<double>& host, const std::vector<double>& an) {
            for (size_t i = 0; i < host.size(); ++i) {
                const double keep = host[i];
                host[i] = keep + step;
                const double up = loss();
                host[i] = keep - step;
                const double dn = loss();
                host[i] = keep;
                const double fd = (up - dn) / (2 * step);
                CHECK(std::abs(fd - an[i]) / std::max({std::abs(fd), std::abs(an[i]), 1e-8}) <=
                      1e-4);
            }
        };
        fd_check(g, g_an);
        fd_check(qn, w_an.neg);
        fd_check(qp, w_an.pos);
    }
}

TEST_CASE("gradient re-scaling: uniform counts are a no-op") {
    std::vector<double> grads = {0.5, -1.0, 2.0};
    const std::vector<double> keep = grads;
    std::vector<int64_t> counts = {7, 7, 7};
    rescale_cell_gradients(grads, counts);
    CHECK(grads == keep);
}

TEST_CASE("gradient re-scaling: direct substitution of the count factors") {
    std::vector<double> grads = {1.0, 1.0};
    std::vector<int64_t> counts = {1, 4};
    rescale_cell_gradients(grads, counts);
    CHECK(grads[0] == doctest::Approx(std::sqrt(2.5)).epsilon(1e-12));
    CHECK(grads[1] == doctest::Approx(std::sqrt(0.625)).epsilon(1e-12));
}

TEST_CASE("gradient re-scaling preserves sign and skips empty cells") {
    Rng rng(31);
    std::vector<double> grads(16);
    std::vector<int64_t> counts(16);
    for (size_t i = 0; i < grads.size(); ++i) {
        grads[i] = rng.normal();
        counts[i] = (i % 5 == 0) ? 0 : int64_t(1 + rng.below(100));
    }
    const auto keep = grads;
    rescale_cell_gradients(grads, counts);
    for (size_t i = 0; i < grads.size(); ++i) {
        if (counts[i] == 0)
            CHECK(grads[i] == keep[i]);
        else
            CHECK(grads[i] * keep[i] >= 0.0);
    }
}

TEST_CASE("gradient re-scaling flattens a bell-shaped hit profile") {
    // bell-shaped counts and per-hit unit gradients: the accumulated cell
    // gradient is proportional to the count, so the max/min ratio across
    // cells must strictly shrink after re-scaling
    std::vector<int64_t> counts = {2, 20, 120, 400, 120, 20, 2};
    std::vector<double> grads(counts.size());
    for (size_t i = 0; i < counts.size(); ++i) grads[i] = double(counts[i]) * 0.01;
    auto ratio = [](const std::vector<double>& v) {
        double lo = 1e300, hi = 0.0;
        for (double x : v) {
            lo = std::min(lo, std::abs(x));
            hi = std::max(hi, std::abs(x));
        }
        return hi / lo;
    };
    const double before = ratio(grads);
    rescale_cell_gradients(grads, counts);
    CHECK(ratio(grads) < before);
    CHECK(ratio(grads) <= before / 2.0);
}

TEST_CASE("navg counts all cells, not just the hit ones") {
    std::vector<int64_t> counts = {1, 4, 0, 0, 0};
    CHECK(CellCounts::navg(counts) == doctest::Approx(1.0));
}
