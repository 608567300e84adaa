#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gslm/cam.hpp"
#include "gslm/rng.hpp"
#include "helpers.hpp"

using namespace gslm;
using gslm::test::rand_tensor;

TEST_CASE("global-max normalization follows the formula") {
    Tensor logits = Tensor::from_data({1, 2, 2}, {1.0, 2.0, -1.0, 4.0});
    const Cam cam = compute_cam(logits, {1});
    const Tensor& m = cam.maps.at(1);
    CHECK(m[0] == 0.25);
    CHECK(m[1] == 0.5);
    CHECK(m[2] == 0.0);
    CHECK(m[3] == 1.0);

    const Cam constant = compute_cam(Tensor({1, 3, 3}, 2.5), {1});
    for (size_t i = 0; i < 9; ++i) CHECK(constant.maps.at(1)[i] == 1.0);
}

TEST_CASE("normalized map peaks at exactly 1 when any logit is positive") {
    Xoshiro256ss rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor logits = rand_tensor({2, 4, 4}, rng, -2.0, 3.0);
        const Cam cam = compute_cam(logits, {1, 1});
        for (const auto& [cls, m] : cam.maps) {
            double mx_logit = -1e300, mx_map = 0.0;
            for (size_t i = 0; i < 16; ++i) {
                mx_logit = std::max(mx_logit, logits[(static_cast<size_t>(cls) - 1) * 16 + i]);
                mx_map = std::max(mx_map, m[i]);
            }
            if (mx_logit > 0.0) CHECK(mx_map == 1.0);
        }
    }
}

TEST_CASE("normalization is invariant to doubling the logits") {
    Xoshiro256ss rng(43);
    Tensor logits = rand_tensor({1, 4, 4}, rng, -1.0, 2.0);
    Tensor doubled = logits;
    for (size_t i = 0; i < doubled.size(); ++i) doubled[i] *= 2.0;
    const Cam a = compute_cam(logits, {1});
    const Cam b = compute_cam(doubled, {1});
    for (size_t i = 0; i < 16; ++i) CHECK(a.maps.at(1)[i] == b.maps.at(1)[i]);
}

TEST_CASE("degenerate and invalid inputs") {
    // no positive evidence -> all-zero map
    const Cam cam = compute_cam(Tensor({1, 2, 2}, -0.5), {1});
    for (size_t i = 0; i < 4; ++i) CHECK(cam.maps.at(1)[i] == 0.0);

    CHECK_THROWS_AS(compute_cam(Tensor({2, 2, 2}), {0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(compute_cam(Tensor({2, 2, 2}), {1}), std::invalid_argument);
    Tensor bad({1, 2, 2});
    bad[0] = std::nan("");
    CHECK_THROWS_AS(compute_cam(bad, {1}), std::runtime_error);
}

TEST_CASE("bounded normalization branches at k=6") {
    Tensor logits = Tensor::from_data({1, 2, 2}, {7.0, 3.0, -2.0, 6.0});
    const Cam cam = seed_reactivation_cam(logits, {1}, 6.0);
    const Tensor& m = cam.maps.at(1);
    CHECK(m[0] == 1.0);
    CHECK(m[1] == 0.5);
    CHECK(m[2] == 0.0);
    CHECK(m[3] == 1.0);
    CHECK_THROWS_AS(seed_reactivation_cam(logits, {1}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(seed_reactivation_cam(logits, {1}, -3.0), std::invalid_argument);
}

TEST_CASE("bounded normalization with k=1 is the identity on [0,1] logits") {
    Xoshiro256ss rng(47);
    Tensor logits = rand_tensor({1, 3, 3}, rng, 0.0, 1.0);
    const Cam cam = seed_reactivation_cam(logits, {1}, 1.0);
    for (size_t i = 0; i < 9; ++i) CHECK(cam.maps.at(1)[i] == logits[i]);
}

TEST_CASE("saturation hides any change above k") {
    Tensor logits = Tensor::from_data({1, 1, 2}, {7.0, 2.0});
    const Cam a = seed_reactivation_cam(logits, {1}, 6.0);
    logits[0] = 700.0;
    const Cam b = seed_reactivation_cam(logits, {1}, 6.0);
    CHECK(a.maps.at(1)[0] == b.maps.at(1)[0]);
    CHECK(a.maps.at(1)[1] == b.maps.at(1)[1]);
}

TEST_CASE("bounded normalization is monotone and bounded") {
    Xoshiro256ss rng(53);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor x = rand_tensor({1, 3, 3}, rng, -10.0, 10.0);
        Tensor y = x;
        for (size_t i = 0; i < y.size(); ++i) y[i] += rng.uniform(0.0, 5.0);
        const Cam cx = seed_reactivation_cam(x, {1}, 6.0);
        const Cam cy = seed_reactivation_cam(y, {1}, 6.0);
        for (size_t i = 0; i < 9; ++i) {
            CHECK(cx.maps.at(1)[i] >= 0.0);
            CHECK(cx.maps.at(1)[i] <= 1.0);
            CHECK(cy.maps.at(1)[i] >= cx.maps.at(1)[i]);
        }
    }
    // strictly inside (0,k): exactly logits/k
    Tensor inside = Tensor::from_data({1, 1, 3}, {0.5, 3.0, 5.9});
    const Cam cam = seed_reactivation_cam(inside, {1}, 6.0);
    for (size_t i = 0; i < 3; ++i) CHECK(cam.maps.at(1)[i] == inside[i] / 6.0);
}

TEST_CASE("only present classes get maps") {
    Tensor logits({3, 2, 2}, 1.0);
    const Cam cam = compute_cam(logits, {0, 1, 0});
    CHECK(cam.maps.size() == 1);
    CHECK(cam.maps.count(2) == 1);
}
