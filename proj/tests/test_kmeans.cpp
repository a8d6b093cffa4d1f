#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "dietlex/kmeans.hpp"
#include "dietlex/rng.hpp"
#include "support/oracles.hpp"

using namespace dietlex;

namespace {

struct Instance {
    std::vector<double> pts;
    std::vector<double> w;
    std::size_t n = 0;
    std::size_t dim = 0;
};

Instance random_instance(Rng& rng, std::size_t n, std::size_t dim) {
    Instance inst;
    inst.n = n;
    inst.dim = dim;
    for (std::size_t i = 0; i < n * dim; ++i) inst.pts.push_back(rng.uniform(0, 1));
    for (std::size_t i = 0; i < n; ++i) inst.w.push_back(rng.uniform(0.5, 2.0));
    return inst;
}

}  // namespace

TEST_CASE("kmeans_init exhaustion: k equal to the point count selects every point") {
    std::vector<double> pts = {0.0, 1.0, 5.0, 9.0};
    std::vector<double> w(4, 1.0);
    auto centroids = kmeans_init(pts, 4, 1, w, 4, 77);
    std::multiset<double> got(centroids.begin(), centroids.end());
    CHECK(got == std::multiset<double>(pts.begin(), pts.end()));
}

TEST_CASE("kmeans_init base case: one centroid, weight-proportional sampling") {
    std::vector<double> pts = {0.0, 1.0, 2.0};
    std::vector<double> w = {1000.0, 1.0, 1.0};
    int picked_heavy = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto c = kmeans_init(pts, 3, 1, w, 1, seed);
        REQUIRE(c.size() == 1);
        if (c[0] == 0.0) ++picked_heavy;
    }
    CHECK(picked_heavy >= 90);
}

TEST_CASE("kmeans_init seeds both of two well-separated blobs in nearly every run") {
    Rng rng(13);
    std::vector<double> pts;
    for (int i = 0; i < 20; ++i) {
        pts.push_back(rng.uniform(-0.25, 0.25));
        pts.push_back(rng.uniform(-0.25, 0.25));
    }
    for (int i = 0; i < 20; ++i) {
        pts.push_back(10.0 + rng.uniform(-0.25, 0.25));
        pts.push_back(10.0 + rng.uniform(-0.25, 0.25));
    }
    std::vector<double> w(40, 1.0);
    int both = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto c = kmeans_init(pts, 40, 2, w, 2, seed);
        const bool first_low = c[0] < 5.0;
        const bool second_low = c[2] < 5.0;
        if (first_low != second_low) ++both;
    }
    CHECK(both >= 95);
}

TEST_CASE("kmeans_init errors") {
    std::vector<double> pts = {0.0, 1.0};
    std::vector<double> w = {1.0, 1.0};
    CHECK_THROWS(kmeans_init(pts, 2, 1, w, 3, 1));
}

TEST_CASE("kmeans_fit recovers the optimal 2-partition of two pairs") {
    std::vector<double> pts = {0.0, 0.1, 10.0, 10.1};
    std::vector<double> w(4, 1.0);
    ClusterConfig cfg{.k = 2, .max_iterations = 100, .tol = 0.0, .seed = 5, .n_init = 3};
    auto c = kmeans_fit(pts, 4, 1, w, cfg);

    CHECK(c.assignment[0] == c.assignment[1]);
    CHECK(c.assignment[2] == c.assignment[3]);
    CHECK(c.assignment[0] != c.assignment[2]);
    std::multiset<double> centroids(c.centroids.begin(), c.centroids.end());
    CHECK(*centroids.begin() == Catch::Approx(0.05).margin(1e-12));
    CHECK(*centroids.rbegin() == Catch::Approx(10.05).margin(1e-12));

    const double oracle = testsupport::exhaustive_kmeans_optimum(pts, 4, 1, w, 2);
    CHECK(c.objective == Catch::Approx(oracle).margin(1e-12));
}

TEST_CASE("kmeans_fit: k = n gives zero objective") {
    Rng rng(3);
    auto inst = random_instance(rng, 6, 2);
    ClusterConfig cfg{.k = 6, .max_iterations = 50, .tol = 0.0, .seed = 1, .n_init = 1};
    auto c = kmeans_fit(inst.pts, inst.n, inst.dim, inst.w, cfg);
    CHECK(c.objective == Catch::Approx(0.0).margin(1e-18));
}

TEST_CASE("kmeans_fit: weighted mean for a single cluster") {
    std::vector<double> pts = {0.0, 1.0};
    std::vector<double> w = {1.0, 3.0};
    ClusterConfig cfg{.k = 1, .max_iterations = 10, .tol = 0.0, .seed = 1, .n_init = 1};
    auto c = kmeans_fit(pts, 2, 1, w, cfg);
    CHECK(c.centroids[0] == Catch::Approx(0.75).margin(1e-15));
}

TEST_CASE("assign: ties go to the lowest cluster index") {
    std::vector<double> centroids = {0.0, 1.0};  // point 0.5 is equidistant
    CHECK(assign_point(std::vector<double>{0.5}.data(), centroids, 2, 1) == 0);

    std::vector<double> six(6, 0.0);
    std::vector<double> c6 = {5, 4, 2, 9, 7, 2};  // clusters 2 and 5 tie at distance 4
    CHECK(assign_point(std::vector<double>{4.0}.data(), c6, 6, 1) == 2);
}

TEST_CASE("assign: zero distance and linear-scan oracle") {
    Rng rng(9);
    const std::size_t k = 8, dim = 3;
    std::vector<double> centroids;
    for (std::size_t i = 0; i < k * dim; ++i) centroids.push_back(rng.uniform(-1, 1));

    // a point identical to centroid 7
    std::vector<double> exact(centroids.begin() + 7 * dim, centroids.begin() + 8 * dim);
    CHECK(assign_point(exact.data(), centroids, static_cast<int>(k), dim) == 7);

    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> x = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        // independent linear scan
        int best = -1;
        double best_d = 1e300;
        for (std::size_t j = 0; j < k; ++j) {
            double d = 0;
            for (std::size_t di = 0; di < dim; ++di) {
                const double diff = x[di] - centroids[j * dim + di];
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(j);
            }
        }
        CHECK(assign_point(x.data(), centroids, static_cast<int>(k), dim) == best);
    }
}

TEST_CASE("lloyd objective is monotone non-increasing") {
    Rng rng(21);
    for (int trial = 0; trial < 25; ++trial) {
        auto inst = random_instance(rng, 30 + rng.below(40), 2 + rng.below(3));
        const int k = 2 + static_cast<int>(rng.below(4));
        ClusterConfig cfg{.k = k, .max_iterations = 60, .tol = 0.0, .seed = trial + 1u, .n_init = 1};
        auto c = kmeans_fit(inst.pts, inst.n, inst.dim, inst.w, cfg);
        for (std::size_t i = 1; i < c.objective_trace.size(); ++i) {
            CHECK(c.objective_trace[i] <= c.objective_trace[i - 1] * (1 + 1e-12) + 1e-12);
        }
    }
}

TEST_CASE("fixed-assignment centroid optimality under perturbation") {
    Rng rng(33);
    auto inst = random_instance(rng, 40, 2);
    ClusterConfig cfg{.k = 3, .max_iterations = 100, .tol = 0.0, .seed = 4, .n_init = 2};
    auto c = kmeans_fit(inst.pts, inst.n, inst.dim, inst.w, cfg);

    auto objective_with = [&](const std::vector<double>& centroids) {
        double j = 0;
        for (std::size_t i = 0; i < inst.n; ++i) {
            const auto a = static_cast<std::size_t>(c.assignment[i]);
            double d2 = 0;
            for (std::size_t d = 0; d < inst.dim; ++d) {
                const double diff = inst.pts[i * inst.dim + d] - centroids[a * inst.dim + d];
                d2 += diff * diff;
            }
            j += inst.w[i] * d2;
        }
        return j;
    };
    const double base = objective_with(c.centroids);
    for (std::size_t ci = 0; ci < c.centroids.size(); ++ci) {
        for (double delta : {-1e-3, 1e-3}) {
            auto perturbed = c.centroids;
            perturbed[ci] += delta;
            CHECK(objective_with(perturbed) >= base - 1e-12);
        }
    }
}

TEST_CASE("kmeans determinism: fixed seed reproduces bitwise") {
    Rng rng(55);
    auto inst = random_instance(rng, 50, 3);
    ClusterConfig cfg{.k = 4, .max_iterations = 50, .tol = 1e-6, .seed = 99, .n_init = 3};
    auto a = kmeans_fit(inst.pts, inst.n, inst.dim, inst.w, cfg);
    auto b = kmeans_fit(inst.pts, inst.n, inst.dim, inst.w, cfg);
    CHECK(a.assignment == b.assignment);
    CHECK(a.centroids == b.centroids);
    CHECK(a.objective == b.objective);
}

TEST_CASE("weight semantics: a weight-2 point equals two unit-weight copies") {
    // Dyadic instances (small-integer coordinates, power-of-two cluster
    // weights) keep every accumulation exact, so the equivalence is bitwise.
    Rng rng(67);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t dim = 2;
        std::vector<double> pts;
        std::vector<double> w;
        const double bases[3][2] = {{0, 0}, {64, 0}, {0, 64}};
        auto add_point = [&](int blob, double weight) {
            pts.push_back(bases[blob][0] + static_cast<double>(rng.below(8)));
            pts.push_back(bases[blob][1] + static_cast<double>(rng.below(8)));
            w.push_back(weight);
        };
        // blob 0 carries the weight-2 point; every blob totals weight 4
        const std::size_t dup_index = 0;
        add_point(0, 2.0);
        add_point(0, 1.0);
        add_point(0, 1.0);
        for (int blob = 1; blob < 3; ++blob)
            for (int i = 0; i < 4; ++i) add_point(blob, 1.0);
        const std::size_t n = w.size();

        std::vector<double> init = {bases[0][0], bases[0][1], bases[1][0], bases[1][1],
                                    bases[2][0], bases[2][1]};
        ClusterConfig cfg{.k = 3, .max_iterations = 50, .tol = 0.0, .seed = 1, .n_init = 1};

        auto weighted = lloyd(pts, n, dim, w, init, cfg);

        // split the weight-2 point into two adjacent unit-weight copies
        std::vector<double> pts2;
        std::vector<double> w2;
        for (std::size_t i = 0; i < n; ++i) {
            pts2.insert(pts2.end(), pts.begin() + static_cast<std::ptrdiff_t>(i * dim),
                        pts.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
            w2.push_back(i == dup_index ? 1.0 : w[i]);
            if (i == dup_index) {
                pts2.insert(pts2.end(), pts.begin() + static_cast<std::ptrdiff_t>(i * dim),
                            pts.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
                w2.push_back(1.0);
            }
        }
        auto split = lloyd(pts2, n + 1, dim, w2, init, cfg);

        CHECK(weighted.centroids == split.centroids);  // bitwise
        CHECK(weighted.objective == split.objective);  // bitwise
        for (std::size_t i = 0, i2 = 0; i < n; ++i, ++i2) {
            CHECK(weighted.assignment[i] == split.assignment[i2]);
            if (i == dup_index) {
                ++i2;
                CHECK(weighted.assignment[i] == split.assignment[i2]);
            }
        }
    }
}

TEST_CASE("small instances reach the exhaustive-partition optimum in >= 90% of runs") {
    Rng rng(81);
    int total = 0, hits = 0;
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 4 + rng.below(5);  // 4..8
        const int k = 2 + static_cast<int>(rng.below(2));
        auto inst = random_instance(rng, n, 2);
        const double oracle = testsupport::exhaustive_kmeans_optimum(inst.pts, n, 2, inst.w, k);
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            ClusterConfig cfg{.k = k, .max_iterations = 100, .tol = 0.0, .seed = seed, .n_init = 3};
            auto c = kmeans_fit(inst.pts, n, 2, inst.w, cfg);
            ++total;
            if (c.objective <= oracle + 1e-9) ++hits;
            CHECK(c.objective >= oracle - 1e-9);  // can never beat the optimum
        }
    }
    CHECK(hits * 10 >= total * 9);
}

TEST_CASE("kmeans input validation") {
    std::vector<double> w2 = {1.0, 1.0};
    ClusterConfig cfg{.k = 1, .max_iterations = 5, .tol = 0.0, .seed = 1, .n_init = 1};
    SECTION("zero points") {
        std::vector<double> none;
        CHECK_THROWS(kmeans_fit(none, 0, 1, {}, cfg));
    }
    SECTION("NaN names the offending point") {
        std::vector<double> pts = {0.0, std::nan("")};
        CHECK_THROWS_WITH(kmeans_fit(pts, 2, 1, w2, cfg), Catch::Matchers::ContainsSubstring("point 1"));
    }
    SECTION("k greater than point count") {
        std::vector<double> pts = {0.0, 1.0};
        ClusterConfig big = cfg;
        big.k = 5;
        CHECK_THROWS(kmeans_fit(pts, 2, 1, w2, big));
    }
    SECTION("non-positive weights") {
        std::vector<double> pts = {0.0, 1.0};
        std::vector<double> w = {1.0, 0.0};
        CHECK_THROWS(kmeans_fit(pts, 2, 1, w, cfg));
    }
}

TEST_CASE("empty clusters are repaired") {
    // initial centroids put nothing near the third centroid
    std::vector<double> pts = {0.0, 0.1, 0.2, 50.0, 50.1};
    std::vector<double> w(5, 1.0);
    std::vector<double> init = {0.0, 0.1, 1000.0};
    ClusterConfig cfg{.k = 3, .max_iterations = 50, .tol = 0.0, .seed = 1, .n_init = 1};
    auto c = lloyd(pts, 5, 1, w, init, cfg);
    std::set<std::int32_t> used(c.assignment.begin(), c.assignment.end());
    CHECK(used.size() == 3);
    CHECK(std::isfinite(c.objective));
}

TEST_CASE("mini-batch mode lands near the full-batch objective on blobs") {
    Rng rng(91);
    std::vector<double> pts;
    for (int blob = 0; blob < 3; ++blob)
        for (int i = 0; i < 60; ++i) {
            pts.push_back(blob * 20.0 + rng.uniform(-0.5, 0.5));
            pts.push_back(blob * 5.0 + rng.uniform(-0.5, 0.5));
        }
    std::vector<double> w(180, 1.0);
    ClusterConfig full{.k = 3, .max_iterations = 100, .tol = 0.0, .seed = 7, .n_init = 3};
    auto exact = kmeans_fit(pts, 180, 2, w, full);
    ClusterConfig mini = full;
    mini.batch_size = 32;
    mini.max_iterations = 60;
    auto approx = kmeans_fit(pts, 180, 2, w, mini);
    CHECK(approx.objective <= exact.objective * 2.0 + 1e-9);
}
