#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "qmlkit/embed.hpp"
#include "qmlkit/errors.hpp"
#include "qmlkit/random.hpp"

using namespace qmlkit;
using namespace qmlkit::embed;
using C = std::complex<double>;
using std::numbers::pi;

namespace {

EmbeddingModel thetas(double a, double b, double c) { return EmbeddingModel{{a, b, c}}; }

std::array<double, 3> finite_difference(const EmbeddingModel& m, std::span<const LabeledPoint> pts, double h = 1e-5) {
    std::array<double, 3> g{};
    for (int k = 0; k < 3; ++k) {
        EmbeddingModel up = m, down = m;
        up.thetas[k] += h;
        down.thetas[k] -= h;
        g[k] = (loss(up, pts) - loss(down, pts)) / (2 * h);
    }
    return g;
}

// Binomial pmf via lgamma, summed into a central interval holding at least 99% of the mass.
std::pair<int, int> binomial_interval(int n, double q, double alpha = 0.01) {
    std::vector<double> pmf(n + 1);
    for (int k = 0; k <= n; ++k) {
        const double logc = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
        if (q == 0.0)
            pmf[k] = k == 0;
        else if (q == 1.0)
            pmf[k] = k == n;
        else
            pmf[k] = std::exp(logc + k * std::log(q) + (n - k) * std::log1p(-q));
    }
    int lo = 0, hi = n;
    double tail = 0.0;
    while (lo < n && tail + pmf[lo] <= alpha / 2) tail += pmf[lo++];
    tail = 0.0;
    while (hi > 0 && tail + pmf[hi] <= alpha / 2) tail += pmf[hi--];
    return {lo, hi};
}

std::vector<LabeledPoint> random_points(Rng& rng, int n) {
    std::vector<LabeledPoint> pts;
    for (int k = 0; k < n; ++k) pts.push_back({rng.uniform(-3, 3), k % 2 ? Label::B : Label::A});
    return pts;
}

}  // namespace

TEST_CASE("embedding closed forms") {
    SUBCASE("zero angles give R_X(4x)|0>") {
        for (double x : {-2.1, -0.4, 0.0, 0.3, 1.7}) {
            const Qubit psi = embed::embed(x, thetas(0, 0, 0));
            CHECK(std::abs(psi(0) - C(std::cos(2 * x), 0)) < 1e-14);
            CHECK(std::abs(psi(1) - C(0, -std::sin(2 * x))) < 1e-14);
        }
    }
    SUBCASE("x = 0 sums the Y rotations") {
        const auto m = thetas(0.4, -1.1, 2.3);
        const Qubit psi = embed::embed(0.0, m);
        const double s = 0.4 - 1.1 + 2.3;
        CHECK(std::abs(psi(0) - C(std::cos(s / 2), 0)) < 1e-14);
        CHECK(std::abs(psi(1) - C(std::sin(s / 2), 0)) < 1e-14);
    }
    SUBCASE("norm") {
        Rng rng(3);
        for (int k = 0; k < 200; ++k) {
            const Qubit psi = embed::embed(rng.uniform(-10, 10), thetas(rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4)));
            CHECK(std::abs(psi.amplitudes().norm() - 1.0) <= 1e-12);
        }
    }
    SUBCASE("literal gate product") {
        const double x = 0.77;
        const auto m = thetas(0.2, 1.3, -0.9);
        const ComplexVector<double> zero = PureStated::basis(2, 0).amplitudes();
        const ComplexMatrixd u = rotation_x(x) * rotation_y(m.thetas[2]) * rotation_x(x) * rotation_y(m.thetas[1]) *
                                 rotation_x(x) * rotation_y(m.thetas[0]) * rotation_x(x);
        const ComplexVector<double> ref = u * zero;
        CHECK((embed::embed(x, m).amplitudes() - ref).cwiseAbs().maxCoeff() < 1e-14);
    }
    CHECK_THROWS_AS(embed::embed(NAN, thetas(0, 0, 0)), InvalidInput);
}

TEST_CASE("exact overlap") {
    const Qubit zero = PureStated::basis(2, 0), one = PureStated::basis(2, 1);
    CHECK(overlap_exact(zero, zero) == 1.0);
    CHECK(overlap_exact(zero, one) == 0.0);
    for (double xi : {-1.0, 0.2})
        for (double xj : {0.5, 2.4}) {
            const double expected = std::pow(std::cos(2 * (xj - xi)), 2);
            CHECK(std::abs(overlap_exact(embed::embed(xi, {}), embed::embed(xj, {})) - expected) < 1e-14);
        }
}

TEST_CASE("SWAP test") {
    const Qubit zero = PureStated::basis(2, 0), one = PureStated::basis(2, 1);
    CHECK(swap_test_probability_zero(zero, zero) == doctest::Approx(1.0));
    CHECK(swap_test_probability_zero(zero, one) == doctest::Approx(0.5));
    const Qubit a = embed::embed(0.3, thetas(1, 2, 3)), b = embed::embed(-0.8, thetas(1, 2, 3));
    CHECK(std::abs(swap_test_probability_zero(a, b) - 0.5 * (1 + overlap_exact(a, b))) < 1e-14);

    const auto s = swap_test_sample(a, b, 100, 5);
    CHECK(s.shots == 100);
    CHECK(s.estimate == std::max(0.0, 2.0 * s.zeros / 100.0 - 1.0));
    CHECK(swap_test(a, b, 100, 5) == s.estimate);
    CHECK(swap_test(a, b, 100, 5) == swap_test(a, b, 100, 5));
    CHECK(swap_test(a, a, 50, 1) == 1.0);
    CHECK_THROWS_AS(swap_test(a, b, 0, 5), InvalidInput);
}

TEST_CASE("SWAP-test estimates fall in the binomial 99% interval") {
    for (double x : {0.1, 0.45, 0.7}) {
        const Qubit a = embed::embed(0.0, {}), b = embed::embed(x, {});
        const double v = overlap_exact(a, b);
        const auto [lo, hi] = binomial_interval(100, 0.5 * (1 + v));
        const double est_lo = std::max(0.0, 2.0 * lo / 100 - 1), est_hi = 2.0 * hi / 100 - 1;
        int inside = 0;
        for (std::uint64_t seed = 0; seed < 1000; ++seed) {
            const double e = swap_test(a, b, 100, seed);
            inside += (e >= est_lo - 1e-12 && e <= est_hi + 1e-12);
        }
        CHECK(inside >= 990);
    }
}

TEST_CASE("SWAP-test estimates are unbiased away from zero") {
    for (double x : {0.2, 0.5}) {
        const Qubit a = embed::embed(0.0, {}), b = embed::embed(x, {});
        const double v = overlap_exact(a, b);
        REQUIRE(v >= 0.1);
        double mean = 0.0;
        const int n = 4000;
        for (int seed = 0; seed < n; ++seed) mean += swap_test(a, b, 100, seed) / n;
        // standard error of the mean is about 2 sqrt(q(1-q)/100)/sqrt(n) < 0.0016
        CHECK(std::abs(mean - v) < 0.006);
    }
}

TEST_CASE("Gram matrices") {
    const auto data = synth_dataset(5, 1001);
    const auto m = thetas(0.5, -1.2, 2.0);
    const GramMatrix g = gram(data, m);
    REQUIRE(g.rows() == 10);
    CHECK(g.cols() == 10);
    CHECK(g == g.transpose());
    for (int i = 0; i < 10; ++i) CHECK(g(i, i) == 1.0);
    CHECK(g.minCoeff() >= 0.0);
    CHECK(g.maxCoeff() <= 1.0);

    SUBCASE("sampled entries come from per-pair seeds") {
        const GramMatrix s = gram(data, m, SampledOverlaps{100, 42});
        CHECK(s == s.transpose());
        for (std::size_t i = 0; i < 10; ++i)
            for (std::size_t j = i; j < 10; ++j) {
                const auto draw = swap_test_sample(embed::embed(data[i].x, m), embed::embed(data[j].x, m), 100, child_seed(42, i, j));
                CHECK(draw.shots == 100);
                CHECK(s(i, j) == draw.estimate);
            }
        CHECK(s == gram(data, m, SampledOverlaps{100, 42}));
        CHECK(s != gram(data, m, SampledOverlaps{100, 43}));
    }
    SUBCASE("many shots approach the exact matrix") {
        const GramMatrix s = gram(data, m, SampledOverlaps{100000, 7});
        CHECK((s - g).cwiseAbs().maxCoeff() <= 0.02);
    }
    CHECK_THROWS_AS(gram(std::span<const double>{}, m), InvalidInput);
}

TEST_CASE("loss") {
    const std::vector<LabeledPoint> same{{0.3, Label::A}, {0.3, Label::A}, {0.3, Label::A}};
    CHECK(loss(thetas(1, 2, 3), same) == doctest::Approx(0.0));
    // zero angles: x = 0 and pi give |0>, x = pi/4 and 3pi/4 give |1> up to phase
    const std::vector<LabeledPoint> split{{0.0, Label::A}, {pi, Label::A}, {pi / 4, Label::B}, {3 * pi / 4, Label::B}};
    CHECK(std::abs(loss({}, split)) < 1e-14);
    const std::vector<LabeledPoint> merged{{0.0, Label::A}, {pi, Label::B}};
    CHECK(loss({}, merged) == doctest::Approx(1.0));
    const std::vector<LabeledPoint> all_merged{{0.0, Label::A}, {0.0, Label::A}, {pi, Label::B}, {pi, Label::B}};
    CHECK(loss({}, all_merged) == doctest::Approx(1.0));
}

TEST_CASE("parameter-shift gradient") {
    SUBCASE("matches central differences") {
        Rng rng(8);
        for (int trial = 0; trial < 30; ++trial) {
            const auto m = thetas(rng.uniform(-pi, pi), rng.uniform(-pi, pi), rng.uniform(-pi, pi));
            const auto pts = random_points(rng, 6);
            const auto ps = gradient(m, pts);
            const auto fd = finite_difference(m, pts);
            for (int k = 0; k < 3; ++k) CHECK(std::abs(ps[k] - fd[k]) <= 1e-6);
        }
    }
    SUBCASE("symmetric data at zero angles") {
        const std::vector<LabeledPoint> pts{{-0.5, Label::B}, {0.5, Label::B}, {-2.0, Label::A}, {2.0, Label::A}};
        const auto ps = gradient({}, pts);
        const auto fd = finite_difference({}, pts);
        for (int k = 0; k < 3; ++k) {
            CHECK(std::abs(ps[k]) <= 1e-8);
            CHECK(std::abs(fd[k]) <= 1e-8);
        }
    }
    SUBCASE("2 pi periodicity") {
        const auto data = synth_dataset(4, 3);
        const auto m = thetas(0.3, 1.1, -2.0);
        for (int k = 0; k < 3; ++k) {
            auto shifted = m;
            shifted.thetas[k] += 2 * pi;
            CHECK(std::abs(loss(shifted, data) - loss(m, data)) <= 1e-12);
            const auto g0 = gradient(m, data), g1 = gradient(shifted, data);
            for (int j = 0; j < 3; ++j) CHECK(std::abs(g0[j] - g1[j]) <= 1e-12);
        }
    }
}

TEST_CASE("training") {
    const auto data = synth_dataset(6, 2);
    SUBCASE("zero learning rate leaves everything flat") {
        const auto r = train(data, {0.0, 5, 9});
        REQUIRE(r.history.size() == 6);
        for (const auto& s : r.history) {
            CHECK(s.loss == r.history.front().loss);
            CHECK(s.thetas == r.history.front().thetas);
        }
    }
    SUBCASE("deterministic and descending") {
        const auto a = train(data, {0.1, 60, 4});
        const auto b = train(data, {0.1, 60, 4});
        for (std::size_t k = 0; k < a.history.size(); ++k) CHECK(a.history[k].thetas == b.history[k].thetas);
        CHECK(a.history.back().loss <= a.history.front().loss);
        CHECK(a.history.back().thetas == a.model.thetas);
        for (double t : a.history.front().thetas) CHECK((t >= -pi && t < pi));
    }
    CHECK_THROWS_AS(train(data, {0.1, 0, 1}), InvalidInput);
    CHECK_THROWS_AS(train(data, {-0.1, 5, 1}), InvalidInput);
}

TEST_CASE("classification rule") {
    // zero angles: |x> = (cos 2x, -i sin 2x), so 0 and pi/4 are orthogonal
    const LabeledDataset1D train_set({{0.0, Label::A}, {0.05, Label::A}, {pi / 4, Label::B}, {pi / 4 - 0.05, Label::B}});
    CHECK(classify(0.02, {}, train_set) == Label::A);
    CHECK(classify(pi / 4 + 0.01, {}, train_set) == Label::B);
    // equidistant: tie goes to A
    const LabeledDataset1D sym({{0.0, Label::A}, {pi / 4, Label::B}});
    CHECK(classify(pi / 8, {}, sym) == Label::A);
    CHECK(classify(pi / 8 + 0.01, {}, sym) == Label::B);

    GramMatrix g(3, 3);
    g << 1, 0.8, 0.1, 0.8, 1, 0.3, 0.1, 0.3, 1;
    const std::vector<LabeledPoint> pts{{0, Label::A}, {0, Label::A}, {0, Label::B}};
    const auto blocks = block_means(g, pts);
    CHECK(blocks.intra_mean == doctest::Approx(0.8));
    CHECK(blocks.inter_mean == doctest::Approx(0.2));
}

TEST_CASE("synthetic dataset") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto d = synth_dataset(20, seed);
        REQUIRE(d.size() == 40);
        double min_a_pos = 1e9, max_a_neg = -1e9, min_b = 1e9, max_b = -1e9;
        int a_count = 0;
        for (const auto& p : d.points()) {
            if (p.label == Label::B) {
                CHECK(std::abs(p.x) <= 1.0);
                min_b = std::min(min_b, p.x);
                max_b = std::max(max_b, p.x);
            } else {
                ++a_count;
                CHECK(std::abs(p.x) >= 1.5);
                CHECK(std::abs(p.x) <= 3.0);
                if (p.x > 0)
                    min_a_pos = std::min(min_a_pos, p.x);
                else
                    max_a_neg = std::max(max_a_neg, p.x);
            }
        }
        CHECK(a_count == 20);
        // A on both sides of B: no single threshold separates the classes
        CHECK(min_a_pos > max_b);
        CHECK(max_a_neg < min_b);
        const auto again = synth_dataset(20, seed);
        for (std::size_t k = 0; k < d.size(); ++k) CHECK(again[k].x == d[k].x);
    }
    CHECK_THROWS_AS(synth_dataset(1, 0), InvalidInput);
    CHECK_THROWS_AS(LabeledDataset1D({{0.0, Label::A}}), InvalidInput);
    CHECK_THROWS_AS(LabeledDataset1D({{0.0, Label::A}, {INFINITY, Label::B}}), InvalidInput);
}

TEST_CASE("dataset JSON") {
    const auto d = synth_dataset(3, 5);
    const auto back = dataset_from_json(dataset_to_json(d));
    REQUIRE(back.size() == d.size());
    for (std::size_t k = 0; k < d.size(); ++k) {
        CHECK(back[k].x == d[k].x);
        CHECK(back[k].label == d[k].label);
    }
    auto location_of = [](const std::string& text) {
        try {
            dataset_from_json(text);
        } catch (const ParseError& e) {
            return e.location();
        }
        return std::string("<accepted>");
    };
    CHECK(location_of("[{\"x\": 1, \"label\": \"A\"}, {\"x\": 2, \"label\": \"C\"}]") == "/1/label");
    CHECK(location_of("[{\"x\": \"1\", \"label\": \"A\"}]") == "/0/x");
    CHECK(location_of("[{\"x\": 1, \"label\": \"A\"}]") == "/");
    CHECK(location_of("{}") == "/");
    CHECK(location_of("[") != "<accepted>");
    CHECK(parse_label("B") == Label::B);
    CHECK_THROWS_AS(parse_label("b"), InvalidInput);
}

TEST_CASE("CSV exports") {
    GramMatrix g(2, 2);
    g << 1, 0.25, 0.25, 1;
    std::ostringstream os;
    write_gram_csv(os, g, {{"mode", "exact"}});
    CHECK(os.str() == "# mode=exact\n1,0.25\n0.25,1\n");

    TrainResult r;
    r.history.push_back({0, 0.5, {0.0, 1.0, 2.0}});
    std::ostringstream log;
    write_training_log_csv(log, r, {});
    CHECK(log.str() == "epoch,loss,theta1,theta2,theta3\n0,0.5,0,1,2\n");
}
