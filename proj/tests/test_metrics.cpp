#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "lesen/metrics.hpp"
#include "lesen/rng.hpp"

using namespace lesen;

namespace {

Tensor random_mask(int h, int w, std::uint64_t seed, double density = 0.3) {
    Tensor m({h, w});
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : m.data) v = u(rng) < density ? 1.0 : 0.0;
    return m;
}

// test-only brute-force oracle: all-pairs boundary distances
std::vector<std::pair<int, int>> oracle_boundary(const Tensor& mask) {
    const int H = mask.shape[0], W = mask.shape[1];
    std::vector<std::pair<int, int>> out;
    auto bg = [&](int y, int x) {
        return y < 0 || y >= H || x < 0 || x >= W || mask.at(y, x) == 0.0;
    };
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            if (mask.at(y, x) == 1.0 &&
                (bg(y - 1, x) || bg(y + 1, x) || bg(y, x - 1) || bg(y, x + 1)))
                out.emplace_back(y, x);
    return out;
}

double oracle_asd(const Tensor& pred, const Tensor& gt, double sy = 1.0, double sx = 1.0) {
    auto bp = oracle_boundary(pred);
    auto bg = oracle_boundary(gt);
    auto dir = [&](const std::vector<std::pair<int, int>>& from,
                   const std::vector<std::pair<int, int>>& to) {
        double total = 0.0;
        for (auto& [y1, x1] : from) {
            double best = 1e300;
            for (auto& [y2, x2] : to) {
                const double dy = (y1 - y2) * sy, dx = (x1 - x2) * sx;
                best = std::min(best, dy * dy + dx * dx);
            }
            total += std::sqrt(best);
        }
        return total / from.size();
    };
    return 0.5 * (dir(bp, bg) + dir(bg, bp));
}

double oracle_dsc(const Tensor& p, const Tensor& g) {
    double inter = 0, np = 0, ng = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        inter += p[i] * g[i];
        np += p[i];
        ng += g[i];
    }
    if (np + ng == 0) return 1.0;
    return 2 * inter / (np + ng);
}

}  // namespace

TEST_CASE("dsc analytic cases") {
    Tensor a = random_mask(8, 8, 1);
    CHECK(dsc(a, a) == 1.0);

    Tensor p({4, 4}), g({4, 4});
    p[0] = p[1] = 1.0;
    g[14] = g[15] = 1.0;
    CHECK(dsc(p, g) == 0.0);  // disjoint

    Tensor p2({4, 4}), g2({4, 4});
    for (int i = 0; i < 4; ++i) p2[i] = 1.0;       // |P|=4
    for (int i = 2; i < 6; ++i) g2[i] = 1.0;       // |G|=4, overlap 2
    CHECK(dsc(p2, g2) == doctest::Approx(0.5).epsilon(1e-12));

    SUBCASE("empty-mask conventions") {
        Tensor e({4, 4});
        CHECK(dsc(e, e) == 1.0);
        CHECK(dsc(e, g2) == 0.0);
    }
    SUBCASE("symmetry") { CHECK(dsc(p2, g2) == dsc(g2, p2)); }
    SUBCASE("shape mismatch") {
        Tensor other({5, 5});
        CHECK_THROWS_AS(dsc(p2, other), std::invalid_argument);
    }
}

TEST_CASE("asd analytic cases") {
    Tensor a = random_mask(8, 8, 2);
    if (oracle_boundary(a).empty()) a[10] = 1.0;
    CHECK(asd(a, a) == 0.0);

    Tensor p({8, 8}), g({8, 8});
    p.at(4, 1) = 1.0;
    g.at(4, 4) = 1.0;  // 3 pixels apart horizontally
    CHECK(asd(p, g) == doctest::Approx(3.0).epsilon(1e-12));

    SUBCASE("empty mask is an undefined-distance error") {
        Tensor e({8, 8});
        CHECK_THROWS_AS(asd(e, g), std::runtime_error);
    }
    SUBCASE("anisotropic spacing scales distances") {
        CHECK(asd(p, g, 1.0, 2.0) == doctest::Approx(6.0).epsilon(1e-12));
    }
}

TEST_CASE("asd of a shifted rectangle matches the all-pairs oracle") {
    Tensor p({12, 12}), g({12, 12});
    for (int y = 3; y < 8; ++y)
        for (int x = 2; x < 9; ++x) p.at(y, x) = 1.0;
    for (int y = 3; y < 8; ++y)
        for (int x = 3; x < 10; ++x) g.at(y, x) = 1.0;  // shifted right by 1
    CHECK(asd(p, g) == doctest::Approx(oracle_asd(p, g)).epsilon(1e-9));
}

TEST_CASE("asd is translation invariant when both masks move together") {
    Tensor p({16, 16}), g({16, 16}), p2({16, 16}), g2({16, 16});
    for (int y = 2; y < 6; ++y)
        for (int x = 2; x < 6; ++x) p.at(y, x) = 1.0;
    for (int y = 3; y < 7; ++y)
        for (int x = 4; x < 8; ++x) g.at(y, x) = 1.0;
    for (int y = 2; y < 6; ++y)
        for (int x = 2; x < 6; ++x) p2.at(y + 5, x + 6) = 1.0;
    for (int y = 3; y < 7; ++y)
        for (int x = 4; x < 8; ++x) g2.at(y + 5, x + 6) = 1.0;
    CHECK(asd(p, g) == doctest::Approx(asd(p2, g2)).epsilon(1e-12));
    CHECK(asd(p, g) == doctest::Approx(asd(g, p)).epsilon(1e-12));
}

TEST_CASE("dsc and asd agree with brute-force oracles on random pairs") {
    auto rng = make_rng(33);
    int checked = 0;
    for (std::uint64_t s = 0; checked < 60; ++s) {
        const int h = 4 + static_cast<int>(rng() % 29);
        const int w = 4 + static_cast<int>(rng() % 29);
        Tensor p = random_mask(h, w, 1000 + s);
        Tensor g = random_mask(h, w, 2000 + s);
        CHECK(dsc(p, g) == oracle_dsc(p, g));
        if (oracle_boundary(p).empty() || oracle_boundary(g).empty()) continue;
        CHECK(asd(p, g) == doctest::Approx(oracle_asd(p, g)).epsilon(1e-9));
        ++checked;
    }
}

TEST_CASE("binarize thresholds the foreground channel strictly above one half") {
    Tensor p({2, 2, 2});
    // pixel 0: fg 0.6 -> 1; pixel 1: fg 0.4 -> 0; pixel 2: fg 0.5 -> 0 (tie rule)
    p.data = {0.4, 0.6, 0.5, 0.1, 0.6, 0.4, 0.5, 0.9};
    Tensor m = binarize(p);
    CHECK(m[0] == 1.0);
    CHECK(m[1] == 0.0);
    CHECK(m[2] == 0.0);
    CHECK(m[3] == 1.0);
}

TEST_CASE("eval report aggregates mean and std and serializes") {
    EvalReport r;
    r.rows = {{"s0", 0.8, 1.0}, {"s1", 0.6, 3.0}};
    CHECK(r.mean_dsc() == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(r.std_dsc() == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(r.mean_asd() == doctest::Approx(2.0).epsilon(1e-12));
    write_eval_report(r, "/tmp/lesen_test_report.tsv");
    std::ifstream in("/tmp/lesen_test_report.tsv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "sample_id\tdsc\tasd");
}
