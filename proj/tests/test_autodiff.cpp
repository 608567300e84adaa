#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gslm/autodiff.hpp"
#include "gslm/rng.hpp"
#include "helpers.hpp"

using namespace gslm;
using gslm::test::fd_check;
using gslm::test::rand_tensor;

namespace {

// Independent direct cross-correlation; per output the sum runs over
// (c_in, ky, kx) in that order, the order the production kernel commits to.
Tensor conv2d_oracle(const Tensor& x, const Tensor& w, const Tensor* bias, int stride, int pad) {
    const int ci = x.extent(0), h = x.extent(1), wd = x.extent(2);
    const int co = w.extent(0), kh = w.extent(2), kw = w.extent(3);
    const int oh = (h + 2 * pad - kh) / stride + 1;
    const int ow = (wd + 2 * pad - kw) / stride + 1;
    Tensor out({co, oh, ow});
    for (int oc = 0; oc < co; ++oc)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double acc = bias ? (*bias)[static_cast<size_t>(oc)] : 0.0;
                for (int c = 0; c < ci; ++c)
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx) {
                            const int iy = oy * stride + ky - pad;
                            const int ix = ox * stride + kx - pad;
                            if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                            acc += x.at(c, iy, ix) * w.at(oc, c, ky, kx);
                        }
                out.at(oc, oy, ox) = acc;
            }
    return out;
}

bool exactly_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

}  // namespace

TEST_CASE("conv2d scalar scaling") {
    Tape tape;
    const auto x = tape.input(Tensor({1, 3, 3}, 1.0));
    Parameter k("k", Tensor::from_data({1, 1, 1, 1}, {2.0}));
    const auto y = tape.conv2d(x, tape.param(k), -1, 1, 0);
    CHECK(tape.value(y).shape() == std::vector<int>{1, 3, 3});
    for (size_t i = 0; i < 9; ++i) CHECK(tape.value(y)[i] == 2.0);
}

TEST_CASE("conv2d identity kernel with padding") {
    Xoshiro256ss rng(3);
    Tensor x = rand_tensor({1, 5, 5}, rng);
    Tensor k({1, 1, 3, 3});
    k.at(0, 0, 1, 1) = 1.0;
    Tape tape;
    Parameter kp("k", k);
    const auto y = tape.conv2d(tape.input(x), tape.param(kp), -1, 1, 1);
    CHECK(exactly_equal(tape.value(y), x));
}

TEST_CASE("conv2d matches the direct-loop oracle bit for bit") {
    Xoshiro256ss rng(11);
    for (const auto& [stride, pad] : {std::pair{1, 0}, {1, 1}, {2, 1}}) {
        Tensor x = rand_tensor({2, 4, 4}, rng);
        Tensor w = rand_tensor({3, 2, 3, 3}, rng);
        Tensor b = rand_tensor({3}, rng);
        Tape tape;
        Parameter wp("w", w), bp("b", b);
        const auto y = tape.conv2d(tape.input(x), tape.param(wp), tape.param(bp), stride, pad);
        CHECK(exactly_equal(tape.value(y), conv2d_oracle(x, w, &b, stride, pad)));
    }
    // larger instance, no bias
    Tensor x = rand_tensor({3, 8, 8}, rng);
    Tensor w = rand_tensor({4, 3, 3, 3}, rng);
    Tape tape;
    Parameter wp("w", w);
    const auto y = tape.conv2d(tape.input(x), tape.param(wp), -1, 1, 1);
    CHECK(exactly_equal(tape.value(y), conv2d_oracle(x, w, nullptr, 1, 1)));
}

TEST_CASE("conv2d rejects bad shapes with extents in the message") {
    Tape tape;
    const auto x = tape.input(Tensor({2, 4, 4}));
    Parameter w("w", Tensor({3, 5, 3, 3}));  // wrong input channels
    try {
        tape.conv2d(x, tape.param(w), -1, 1, 1);
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("5") != std::string::npos);
        CHECK(msg.find("2") != std::string::npos);
    }
    Parameter even("e", Tensor({1, 2, 2, 2}));
    CHECK_THROWS_AS(tape.conv2d(x, tape.param(even), -1, 1, 0), std::invalid_argument);
}

TEST_CASE("relu values and subgradient at zero") {
    Tape tape;
    Parameter p("p", Tensor::from_data({3}, {-1.0, 0.0, 2.0}));
    const auto y = tape.relu(tape.param(p));
    CHECK(tape.value(y)[0] == 0.0);
    CHECK(tape.value(y)[1] == 0.0);
    CHECK(tape.value(y)[2] == 2.0);
    const auto loss = tape.sum(y);
    tape.backward(loss);
    CHECK(p.grad[0] == 0.0);
    CHECK(p.grad[1] == 0.0);  // gradient 0 at exactly 0
    CHECK(p.grad[2] == 1.0);

    Tape t2;
    const auto neg = t2.relu(t2.input(Tensor({2, 2}, -3.0)));
    for (size_t i = 0; i < 4; ++i) CHECK(t2.value(neg)[i] == 0.0);
}

TEST_CASE("relu_k clamps and gates gradients at both boundaries") {
    Tape tape;
    Parameter p("p", Tensor::from_data({4}, {7.0, -1.0, 3.0, 6.0}));
    const auto y = tape.relu_k(tape.param(p), 6.0);
    CHECK(tape.value(y)[0] == 6.0);
    CHECK(tape.value(y)[1] == 0.0);
    CHECK(tape.value(y)[2] == 3.0);
    CHECK(tape.value(y)[3] == 6.0);
    tape.backward(tape.sum(y));
    CHECK(p.grad[0] == 0.0);  // saturated
    CHECK(p.grad[1] == 0.0);
    CHECK(p.grad[2] == 1.0);  // pass-through
    CHECK(p.grad[3] == 0.0);  // boundary value k

    CHECK_THROWS_AS(tape.relu_k(tape.input(Tensor({1})), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(tape.relu_k(tape.input(Tensor({1})), -2.0), std::invalid_argument);
}

TEST_CASE("relu_k with huge k equals relu") {
    Xoshiro256ss rng(5);
    Tensor x = rand_tensor({4, 4}, rng, -100.0, 100.0);
    Tape tape;
    const auto id = tape.input(x);
    const auto a = tape.relu_k(id, 1e12);
    const auto b = tape.relu(id);
    CHECK(exactly_equal(tape.value(a), tape.value(b)));
}

TEST_CASE("global average pool") {
    Tape tape;
    Parameter p("p", Tensor::from_data({1, 2, 2}, {1.0, 2.0, 3.0, 4.0}));
    const auto y = tape.global_average_pool(tape.param(p));
    CHECK(tape.value(y)[0] == doctest::Approx(2.5).epsilon(1e-15));
    tape.backward(tape.sum(y));
    for (size_t i = 0; i < 4; ++i) CHECK(p.grad[i] == 0.25);

    Tape t2;
    const auto c = t2.global_average_pool(t2.input(Tensor({3, 4, 4}, 0.7)));
    for (size_t i = 0; i < 3; ++i) CHECK(t2.value(c)[i] == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("sigmoid is stable and symmetric") {
    Tape tape;
    const auto y = tape.sigmoid(tape.input(Tensor::from_data({3}, {0.0, 50.0, -50.0})));
    CHECK(tape.value(y)[0] == 0.5);
    CHECK(tape.value(y)[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::isfinite(tape.value(y)[2]));
    Xoshiro256ss rng(9);
    for (int i = 0; i < 20; ++i) {
        const double x = rng.uniform(-30, 30);
        Tape t;
        const auto s = t.sigmoid(t.input(Tensor::from_data({2}, {x, -x})));
        CHECK(t.value(s)[0] + t.value(s)[1] == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("backward basics") {
    // sum of a 2-element parameter -> gradient [1, 1]
    Parameter p("p", Tensor::from_data({2}, {5.0, -3.0}));
    Tape tape;
    tape.backward(tape.sum(tape.param(p)));
    CHECK(p.grad[0] == 1.0);
    CHECK(p.grad[1] == 1.0);

    // p*p for scalar p=3 -> gradient 6
    Parameter q("q", Tensor::scalar(3.0));
    Tape t2;
    const auto qid = t2.param(q);
    t2.backward(t2.mul(qid, qid));
    CHECK(q.grad[0] == 6.0);

    // non-scalar loss rejected
    Tape t3;
    const auto vec = t3.param(p);
    CHECK_THROWS_AS(t3.backward(vec), std::invalid_argument);
}

TEST_CASE("gradients accumulate additively across uses and backward calls") {
    Parameter p("p", Tensor::from_data({2}, {1.0, 2.0}));
    Tape tape;
    const auto a = tape.param(p);
    const auto b = tape.param(p);  // second use
    const auto loss = tape.sum(tape.add(a, b));
    tape.backward(loss);
    CHECK(p.grad[0] == 2.0);
    tape.backward(loss);  // no zeroing: accumulates
    CHECK(p.grad[0] == 4.0);
    p.zero_grad();
    CHECK(p.grad[0] == 0.0);
}

TEST_CASE("composed graph matches finite differences") {
    Xoshiro256ss rng(21);
    Parameter w("w", rand_tensor({2, 2, 3, 3}, rng, -0.5, 0.5));
    Parameter b("b", rand_tensor({2}, rng, -0.1, 0.1));
    const Tensor x = rand_tensor({2, 4, 4}, rng);
    const std::vector<double> target = {1.0, 0.0};

    auto build = [&](Tape& t) {
        const auto logits = t.conv2d(t.input(x), t.param(w), t.param(b), 1, 1);
        const auto pred = t.sigmoid(t.global_average_pool(t.relu_k(logits, 2.0)));
        return t.bce_mean(pred, target);
    };
    auto loss_value = [&] {
        Tape t;
        return t.value(build(t)).item();
    };
    auto run_backward = [&] {
        w.zero_grad();
        b.zero_grad();
        Tape t;
        t.backward(build(t));
    };
    CHECK(fd_check({&w, &b}, loss_value, run_backward) < 1e-4);
}

TEST_CASE("max_norm_cam forward and gradient") {
    Parameter p("p", Tensor::from_data({1, 2, 2}, {1.0, 2.0, -1.0, 4.0}));
    Tape tape;
    const auto y = tape.max_norm_cam(tape.param(p));
    CHECK(tape.value(y)[0] == 0.25);
    CHECK(tape.value(y)[1] == 0.5);
    CHECK(tape.value(y)[2] == 0.0);
    CHECK(tape.value(y)[3] == 1.0);

    auto loss_value = [&] {
        Tape t;
        return t.value(t.sum(t.mul(t.max_norm_cam(t.param(p)), t.max_norm_cam(t.param(p))))).item();
    };
    auto run_backward = [&] {
        p.zero_grad();
        Tape t;
        const auto m = t.max_norm_cam(t.param(p));
        t.backward(t.sum(t.mul(m, m)));
    };
    CHECK(fd_check({&p}, loss_value, run_backward) < 1e-4);

    // all negative channel -> zero map, zero grads
    Parameter n("n", Tensor({1, 2, 2}, -2.0));
    Tape t2;
    const auto z = t2.max_norm_cam(t2.param(n));
    for (size_t i = 0; i < 4; ++i) CHECK(t2.value(z)[i] == 0.0);
    t2.backward(t2.sum(z));
    for (size_t i = 0; i < 4; ++i) CHECK(n.grad[i] == 0.0);
}

TEST_CASE("polynomial decay schedule") {
    CHECK(poly_lr(0.4, 0, 10, 0.9) == 0.4);
    CHECK(poly_lr(1.0, 9, 10, 0.9) == doctest::Approx(std::pow(0.1, 0.9)).epsilon(1e-15));
    CHECK_THROWS_AS(poly_lr(-1.0, 0, 10, 0.9), std::invalid_argument);
    CHECK_THROWS_AS(poly_lr(1.0, 10, 10, 0.9), std::invalid_argument);
    CHECK_THROWS_AS(poly_lr(1.0, -1, 10, 0.9), std::invalid_argument);
}

TEST_CASE("sgd_step update rule") {
    Parameter head("head.w", Tensor::from_data({2}, {1.0, -2.0}));
    Parameter body("backbone.w", Tensor::from_data({1}, {4.0}));
    head.grad = Tensor::from_data({2}, {0.5, 0.5});
    body.grad = Tensor::from_data({1}, {1.0});
    std::vector<Parameter*> params = {&head, &body};

    sgd_step(params, 0.1, 0, 10, 0.9, 0.0, {{"backbone.", 0.1}});
    CHECK(head.value[0] == doctest::Approx(1.0 - 0.1 * 0.5).epsilon(1e-15));
    CHECK(body.value[0] == doctest::Approx(4.0 - 0.1 * 0.1 * 1.0).epsilon(1e-15));

    // weight decay alone still shrinks the value
    Parameter w("w", Tensor::from_data({1}, {10.0}));
    w.zero_grad();
    std::vector<Parameter*> one = {&w};
    sgd_step(one, 1.0, 0, 10, 0.9, 0.001, {});
    CHECK(w.value[0] == doctest::Approx(10.0 - 1.0 * 0.001 * 10.0).epsilon(1e-12));

    CHECK_THROWS_AS(sgd_step(one, -0.1, 0, 10, 0.9, 0.0, {}), std::invalid_argument);
    CHECK_THROWS_AS(sgd_step(one, 0.1, 0, 10, 0.9, -0.5, {}), std::invalid_argument);
}

TEST_CASE("optimizer with zero momentum equals the plain step") {
    Xoshiro256ss rng(33);
    Parameter a("x", rand_tensor({4}, rng));
    Parameter b("x", a.value);
    a.grad = rand_tensor({4}, rng);
    b.grad = a.grad;
    std::vector<Parameter*> va = {&a}, vb = {&b};
    SgdOptimizer opt(0.05, 10, 0.9, 0.001, 0.0, {});
    opt.step(va, 3);
    sgd_step(vb, 0.05, 3, 10, 0.9, 0.001, {});
    for (size_t i = 0; i < 4; ++i) CHECK(a.value[i] == b.value[i]);
}
