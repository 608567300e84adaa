#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gslm/crf.hpp"
#include "gslm/rng.hpp"
#include "helpers.hpp"

using namespace gslm;
using gslm::test::rand_tensor;

namespace {

// Piecewise-smooth random scene: a base color, a few random rectangles of
// other colors, small per-pixel noise. Mirrors the regime the production
// window truncation is specified for.
Tensor random_scene(int h, int w, Xoshiro256ss& rng) {
    Tensor img({3, h, w});
    auto paint = [&](int y0, int x0, int hh, int ww, double r, double g, double b) {
        for (int y = y0; y < std::min(h, y0 + hh); ++y)
            for (int x = x0; x < std::min(w, x0 + ww); ++x) {
                img.at(0, y, x) = r;
                img.at(1, y, x) = g;
                img.at(2, y, x) = b;
            }
    };
    paint(0, 0, h, w, rng.uniform(0.1, 0.4), rng.uniform(0.1, 0.4), rng.uniform(0.1, 0.4));
    const int rects = 2 + rng.uniform_int(3);
    for (int i = 0; i < rects; ++i)
        paint(rng.uniform_int(h), rng.uniform_int(w), 3 + rng.uniform_int(h / 2),
              3 + rng.uniform_int(w / 2), rng.uniform(0.3, 0.95), rng.uniform(0.3, 0.95),
              rng.uniform(0.3, 0.95));
    for (size_t i = 0; i < img.size(); ++i)
        img[i] = std::clamp(img[i] + rng.uniform(-0.02, 0.02), 0.0, 1.0);
    return img;
}

Tensor smooth_prob(int h, int w, Xoshiro256ss& rng) {
    Tensor p({h, w});
    // blocky random field in [0.05, 0.95]
    const int cell = 4;
    for (int y = 0; y < h; y += cell)
        for (int x = 0; x < w; x += cell) {
            const double v = rng.uniform(0.05, 0.95);
            for (int yy = y; yy < std::min(h, y + cell); ++yy)
                for (int xx = x; xx < std::min(w, x + cell); ++xx) p.at(yy, xx) = v;
        }
    return p;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("vanishing pairwise weights reduce to the unary alone") {
    Xoshiro256ss rng(61);
    CrfParams p;
    p.spatial_weight = 1e-12;
    p.bilateral_weight = 1e-12;
    p.bilateral_bandwidth = 4.0;
    const Tensor img = random_scene(12, 12, rng);
    Tensor prob({12, 12});
    for (size_t i = 0; i < prob.size(); ++i) prob[i] = rng.uniform(0.0, 1.0);

    const Tensor out = densecrf_refine(img, prob, p);
    const Tensor ref = densecrf_refine_reference(img, prob, p);
    for (size_t i = 0; i < prob.size(); ++i) {
        CHECK(std::abs(out[i] - prob[i]) <= 1e-6);
        CHECK(std::abs(ref[i] - prob[i]) <= 1e-6);
    }
}

TEST_CASE("uniform image and uniform probability are a fixed point") {
    for (const double pv : {0.1, 0.5, 0.73, 0.9}) {
        CrfParams p;
        p.bilateral_bandwidth = 4.0;
        const Tensor img({3, 10, 10}, 0.5);
        const Tensor prob({10, 10}, pv);
        const Tensor out = densecrf_refine(img, prob, p);
        const Tensor ref = densecrf_refine_reference(img, prob, p);
        for (size_t i = 0; i < prob.size(); ++i) {
            CHECK(std::abs(out[i] - pv) <= 1e-6);
            CHECK(std::abs(ref[i] - pv) <= 1e-6);
        }
    }
}

TEST_CASE("a low-confidence hole inside a supported region fills in") {
    const int s = 16;
    Tensor img({3, s, s});
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
            const double v = x < s / 2 ? 0.15 : 0.85;  // dark left, bright right
            img.at(0, y, x) = v;
            img.at(1, y, x) = v;
            img.at(2, y, x) = v;
        }
    Tensor prob({s, s});
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) prob.at(y, x) = x < s / 2 ? 0.1 : 0.9;
    for (int y = 6; y < 8; ++y)
        for (int x = 10; x < 12; ++x) prob.at(y, x) = 0.4;

    CrfParams p;
    p.bilateral_bandwidth = 4.0;
    const Tensor out = densecrf_refine(img, prob, p);
    for (int y = 6; y < 8; ++y)
        for (int x = 10; x < 12; ++x) CHECK(out.at(y, x) > 0.5);

    const Tensor ref = densecrf_refine_reference(img, prob, p);
    CHECK(max_abs_diff(out, ref) <= 1e-5);
}

TEST_CASE("production path agrees with the exhaustive reference") {
    Xoshiro256ss rng(67);
    const int sizes[] = {8, 12, 16, 20, 24};
    for (int trial = 0; trial < 6; ++trial) {
        const int h = sizes[trial % 5];
        const int w = sizes[(trial + 2) % 5];
        CrfParams p;
        p.iterations = 10;
        p.spatial_weight = rng.uniform(1.0, 4.0);
        p.spatial_bandwidth = rng.uniform(1.5, 4.0);
        p.bilateral_weight = rng.uniform(4.0, 12.0);
        p.bilateral_bandwidth = rng.uniform(2.0, 6.0);
        p.color_bandwidth = trial % 2 == 0 ? 0.1 : 0.3;
        const Tensor img = random_scene(h, w, rng);
        const Tensor prob = smooth_prob(h, w, rng);
        const Tensor fast = densecrf_refine(img, prob, p);
        const Tensor ref = densecrf_refine_reference(img, prob, p);
        CHECK(max_abs_diff(fast, ref) <= 1e-5);
    }
}

TEST_CASE("per-pixel distributions stay normalized every iteration") {
    Xoshiro256ss rng(71);
    CrfParams p;
    p.bilateral_bandwidth = 3.0;
    const Tensor img = random_scene(10, 10, rng);
    const Tensor prob = smooth_prob(10, 10, rng);
    int iterations_seen = 0;
    CrfObserver obs = [&](int, const std::vector<double>& qf, const std::vector<double>& qb) {
        ++iterations_seen;
        for (size_t i = 0; i < qf.size(); ++i) CHECK(std::abs(qf[i] + qb[i] - 1.0) <= 1e-9);
    };
    densecrf_refine_reference(img, prob, p, &obs);
    CHECK(iterations_seen == p.iterations);
}

TEST_CASE("input validation") {
    const Tensor img({3, 4, 4}, 0.5);
    CrfParams p;
    p.bilateral_bandwidth = 2.0;

    Tensor neg({4, 4}, 0.5);
    neg[0] = -0.1;
    CHECK_THROWS_AS(densecrf_refine(img, neg, p), std::invalid_argument);

    Tensor above({4, 4}, 0.5);
    above[0] = 1.0 + 2e-9;
    CHECK_THROWS_AS(densecrf_refine(img, above, p), std::invalid_argument);

    Tensor barely({4, 4}, 0.5);
    barely[0] = 1.0 + 0.5e-9;  // inside tolerance, clamped
    CHECK_NOTHROW(densecrf_refine(img, barely, p));

    CrfParams bad = p;
    bad.iterations = 0;
    CHECK_THROWS_AS(densecrf_refine(img, Tensor({4, 4}, 0.5), bad), std::invalid_argument);
    bad = p;
    bad.spatial_weight = 0.0;
    CHECK_THROWS_AS(densecrf_refine(img, Tensor({4, 4}, 0.5), bad), std::invalid_argument);
    CHECK_THROWS_AS(densecrf_refine(Tensor({1, 4, 4}), Tensor({4, 4}, 0.5), p),
                    std::invalid_argument);
    CHECK_THROWS_AS(densecrf_refine(img, Tensor({3, 3}, 0.5), p), std::invalid_argument);
}
