#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "gslm/autodiff.hpp"
#include "gslm/rng.hpp"
#include "gslm/tensor.hpp"

namespace gslm::test {

inline Tensor rand_tensor(const std::vector<int>& shape, Xoshiro256ss& rng, double lo = -1.0,
                          double hi = 1.0) {
    Tensor t(shape);
    for (size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

inline double rel_err(double got, double want) {
    return std::abs(got - want) / std::max({std::abs(got), std::abs(want), 1e-6});
}

// Central finite differences against reverse-mode gradients. `loss_value`
// must rebuild the computation from current parameter values; `run_backward`
// must zero gradients and fill Parameter::grad. Returns the worst relative
// error over every element of every parameter.
inline double fd_check(const std::vector<Parameter*>& params,
                       const std::function<double()>& loss_value,
                       const std::function<void()>& run_backward, double eps = 1e-5) {
    run_backward();
    std::vector<Tensor> grads;
    grads.reserve(params.size());
    for (Parameter* p : params) grads.push_back(p->grad);

    double worst = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Parameter* p = params[pi];
        for (size_t i = 0; i < p->value.size(); ++i) {
            const double orig = p->value[i];
            p->value[i] = orig + eps;
            const double up = loss_value();
            p->value[i] = orig - eps;
            const double down = loss_value();
            p->value[i] = orig;
            const double fd = (up - down) / (2.0 * eps);
            worst = std::max(worst, rel_err(grads[pi][i], fd));
        }
    }
    return worst;
}

}  // namespace gslm::test
