#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "latdis/detector.hpp"
#include "latdis/errors.hpp"
#include "latdis/metrics.hpp"
#include "latdis/rng.hpp"

using namespace latdis;

namespace {

VaeModel tiny_model(std::uint64_t seed, Covariance cov = Covariance::Scalar) {
    VaeArch arch;
    arch.input_extent = 8;
    arch.encoder_channels = {4, 8};
    arch.latent_dim = 4;
    arch.covariance = cov;
    return VaeModel::create(arch, seed);
}

SliceImage random_slice(int extent, Rng& rng) {
    SliceImage s;
    s.height = s.width = extent;
    s.pixels.resize(static_cast<std::size_t>(extent) * extent);
    for (auto& v : s.pixels) v = static_cast<float>(rng.uniform(-0.9, 0.9));
    return s;
}

BrainMask full_mask(int extent) {
    BrainMask m;
    m.height = m.width = extent;
    m.inside.assign(static_cast<std::size_t>(extent) * extent, 1);
    return m;
}

}  // namespace

TEST_CASE("latent_distance") {
    std::vector<float> a{1.0f, 2.0f}, b{4.0f, 6.0f};
    CHECK(latent_distance(a, b) == 5.0);  // 3-4-5
    CHECK(latent_distance(a, a) == 0.0);
    std::vector<float> c{1.0f};
    CHECK_THROWS_AS(latent_distance(a, c), DataError);
}

TEST_CASE("latent scorer") {
    auto vae = tiny_model(70);
    Rng rng(71);
    SliceImage x = random_slice(8, rng);
    SUBCASE("perfect reconstruction gives zero score") {
        CHECK(latent_score_from(vae, x, x) == 0.0);
    }
    SUBCASE("posterior variances do not affect the score") {
        auto vae2 = vae;
        vae2.logvar_b.fill(3.0f);  // shift the variance head only
        auto vae_h = tiny_model(72);
        BrainMask m = full_mask(8);
        CHECK(latent_score(x, m, vae_h, vae) == latent_score(x, m, vae_h, vae2));
    }
    SUBCASE("deterministic and nonnegative") {
        auto vae_h = tiny_model(73);
        BrainMask m = full_mask(8);
        const double s1 = latent_score(x, m, vae_h, vae);
        const double s2 = latent_score(x, m, vae_h, vae);
        CHECK(s1 == s2);
        CHECK(s1 >= 0.0);
    }
}

TEST_CASE("residual scorer") {
    Rng rng(74);
    SliceImage x = random_slice(8, rng);
    BrainMask m = full_mask(8);
    for (int i = 0; i < 8; ++i) m.inside[i] = 0;
    SUBCASE("identical reconstruction scores zero") {
        CHECK(residual_score_from(x, x, m) == 0.0);
    }
    SUBCASE("one differing interior pixel of 0.3") {
        SliceImage x_h = x;
        x_h.pixels[20] += 0.3f;
        CHECK(residual_score_from(x, x_h, m) == doctest::Approx(0.3).epsilon(1e-6));
    }
    SUBCASE("exterior differences contribute nothing") {
        SliceImage x_h = x;
        x_h.pixels[3] = 0.9f;  // outside the mask
        CHECK(residual_score_from(x, x_h, m) == 0.0);
    }
    SUBCASE("full scorer is deterministic and nonnegative") {
        auto vae_h = tiny_model(75);
        const double s = residual_score(x, m, vae_h);
        CHECK(s >= 0.0);
        CHECK(residual_score(x, m, vae_h) == s);
    }
}

TEST_CASE("select_threshold") {
    SUBCASE("perfectly separated scores reach F1 = 1") {
        std::vector<double> healthy(50);
        std::iota(healthy.begin(), healthy.end(), 1.0);  // 1..50
        std::vector<double> sel{10, 20, 30, 90, 95, 99};
        std::vector<int> labels{0, 0, 0, 1, 1, 1};
        auto sel_res = select_threshold(healthy, sel, labels, default_percentile_grid());
        CHECK(sel_res.selection_f1 == 1.0);
    }
    SUBCASE("nearest-rank threshold from a 1..100 healthy sample") {
        std::vector<double> healthy(100);
        std::iota(healthy.begin(), healthy.end(), 1.0);
        std::vector<double> grid{99.0};
        std::vector<double> sel{1, 100};
        std::vector<int> labels{0, 1};
        auto sel_res = select_threshold(healthy, sel, labels, grid);
        CHECK(sel_res.percentile == 99.0);
        CHECK(sel_res.threshold == 99.0);
    }
    SUBCASE("ties break toward the larger percentile") {
        std::vector<double> healthy{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
        std::vector<double> grid{60.0, 90.0};
        // both thresholds (6 and 9) classify these perfectly
        std::vector<double> sel{2, 11};
        std::vector<int> labels{0, 1};
        auto sel_res = select_threshold(healthy, sel, labels, grid);
        CHECK(sel_res.percentile == 90.0);
    }
    SUBCASE("single-class selection subset is an error") {
        std::vector<double> healthy{1, 2, 3};
        std::vector<double> sel{1, 2};
        std::vector<int> labels{1, 1};
        CHECK_THROWS_AS(select_threshold(healthy, sel, labels, default_percentile_grid()),
                        DataError);
    }
    SUBCASE("internal consistency over 1000 random instances") {
        Rng rng(76);
        for (int trial = 0; trial < 1000; ++trial) {
            const int nh = 5 + static_cast<int>(rng.index(30));
            std::vector<double> healthy(nh);
            for (auto& v : healthy) v = rng.uniform(0, 10);
            const int ns = 4 + static_cast<int>(rng.index(20));
            std::vector<double> sel(ns);
            std::vector<int> labels(ns);
            for (int i = 0; i < ns; ++i) {
                sel[i] = rng.uniform(0, 12);
                labels[i] = rng.bernoulli(0.5) ? 1 : 0;
            }
            labels[0] = 0;
            labels[1] = 1;
            auto res = select_threshold(healthy, sel, labels, default_percentile_grid());
            CHECK(res.threshold == percentile(healthy, res.percentile));
        }
    }
}

TEST_CASE("classify boundary rule") {
    CHECK(classify(1.0, 1.0) == Classification::Anomalous);  // score == d* is anomalous
    CHECK(classify(0.0, 0.5) == Classification::Healthy);
    CHECK(classify(0.0, 0.0) == Classification::Anomalous);  // d* = 0: everything anomalous
    CHECK(classify(0.4999, 0.5) == Classification::Healthy);
}

TEST_CASE("cross_validate") {
    std::vector<double> healthy(60);
    Rng hr(77);
    for (auto& v : healthy) v = hr.uniform(0, 1);

    SUBCASE("five folds over 100 slices, separable data has zero std") {
        std::vector<double> scores(100);
        std::vector<int> labels(100);
        for (int i = 0; i < 100; ++i) {
            labels[i] = i % 2;
            scores[i] = labels[i] ? 5.0 + i * 0.01 : 0.2 + i * 0.001;
        }
        Rng rng(78);
        auto report = cross_validate(healthy, scores, labels, 5, default_percentile_grid(), rng);
        REQUIRE(report.folds.size() == 5);
        for (const auto& f : report.folds) {
            CHECK(f.roc_auc == 1.0);
            CHECK(f.f1 == 1.0);
        }
        CHECK(report.stddev.roc_auc == 0.0);
        CHECK(report.stddev.f1 == 0.0);
        CHECK(report.mean.roc_auc == 1.0);
    }
    SUBCASE("report matches a manual recomputation on a 12-slice example") {
        std::vector<double> scores{0.1, 0.9, 0.3, 0.8, 0.2, 0.7, 0.15, 0.85, 0.25, 0.75, 0.05, 0.95};
        std::vector<int> labels{0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
        std::vector<double> hv{0.1, 0.2, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55};
        std::vector<double> grid{50, 75, 90};

        Rng rng(79);
        auto report = cross_validate(hv, scores, labels, 2, grid, rng);
        REQUIRE(report.folds.size() == 2);

        // replay the same shuffle and recompute fold 0 by hand
        std::vector<std::size_t> order(12);
        std::iota(order.begin(), order.end(), 0);
        Rng replay(79);
        replay.shuffle(order);
        std::vector<double> sel_s, ev_s;
        std::vector<int> sel_l, ev_l;
        for (std::size_t i = 0; i < 12; ++i) {
            if (i < 6) {
                sel_s.push_back(scores[order[i]]);
                sel_l.push_back(labels[order[i]]);
            } else {
                ev_s.push_back(scores[order[i]]);
                ev_l.push_back(labels[order[i]]);
            }
        }
        auto sel = select_threshold(hv, sel_s, sel_l, grid);
        auto counts = confusion(ev_s, ev_l, sel.threshold);
        CHECK(report.folds[0].roc_auc == roc_auc(ev_s, ev_l));
        CHECK(report.folds[0].accuracy == accuracy(counts));
        CHECK(report.folds[0].f1 == f1(counts));
        CHECK(report.folds[0].percentile == sel.percentile);

        // aggregate arithmetic
        const double want_mean = (report.folds[0].f1 + report.folds[1].f1) / 2.0;
        CHECK(report.mean.f1 == doctest::Approx(want_mean).epsilon(1e-15));
    }
    SUBCASE("fold with a single class names the fold") {
        std::vector<double> scores{1, 2, 3, 4};
        std::vector<int> labels{1, 1, 1, 0};
        Rng rng(80);
        CHECK_THROWS_WITH_AS(
            cross_validate(healthy, scores, labels, 2, default_percentile_grid(), rng),
            doctest::Contains("fold"), DataError);
    }
    SUBCASE("seeded partition is deterministic") {
        std::vector<double> scores(40);
        std::vector<int> labels(40);
        Rng data_rng(81);
        for (int i = 0; i < 40; ++i) {
            labels[i] = i % 2;
            scores[i] = data_rng.uniform(0, 1) + labels[i];
        }
        Rng r1(82), r2(82);
        auto a = cross_validate(healthy, scores, labels, 4, default_percentile_grid(), r1);
        auto b = cross_validate(healthy, scores, labels, 4, default_percentile_grid(), r2);
        for (std::size_t i = 0; i < a.folds.size(); ++i) {
            CHECK(a.folds[i].roc_auc == b.folds[i].roc_auc);
            CHECK(a.folds[i].threshold == b.folds[i].threshold);
        }
    }
}

TEST_CASE("rank pipeline is invariant under increasing score transforms") {
    Rng rng(83);
    std::vector<double> healthy(40), scores(60);
    std::vector<int> labels(60);
    for (auto& v : healthy) v = rng.uniform(0.1, 2.0);
    for (int i = 0; i < 60; ++i) {
        labels[i] = rng.bernoulli(0.5) ? 1 : 0;
        scores[i] = rng.uniform(0.1, 2.0) + labels[i];
    }
    labels[0] = 0;
    labels[1] = 1;

    auto transform = [](double v) { return std::exp(2.0 * v) + 1.0; };
    std::vector<double> t_healthy(40), t_scores(60);
    std::transform(healthy.begin(), healthy.end(), t_healthy.begin(), transform);
    std::transform(scores.begin(), scores.end(), t_scores.begin(), transform);

    auto grid = default_percentile_grid();
    auto base = select_threshold(healthy, scores, labels, grid);
    auto mapped = select_threshold(t_healthy, t_scores, labels, grid);
    CHECK(base.percentile == mapped.percentile);
    CHECK(base.selection_f1 == mapped.selection_f1);
    for (int i = 0; i < 60; ++i)
        CHECK(classify(scores[i], base.threshold) == classify(t_scores[i], mapped.threshold));

    Rng r1(84), r2(84);
    auto rep_a = cross_validate(healthy, scores, labels, 5, grid, r1);
    auto rep_b = cross_validate(t_healthy, t_scores, labels, 5, grid, r2);
    for (std::size_t i = 0; i < rep_a.folds.size(); ++i) {
        CHECK(rep_a.folds[i].roc_auc == rep_b.folds[i].roc_auc);
        CHECK(rep_a.folds[i].accuracy == rep_b.folds[i].accuracy);
        CHECK(rep_a.folds[i].f1 == rep_b.folds[i].f1);
    }
}
