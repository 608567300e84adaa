#include "gslm/cam.hpp"

#include <algorithm>

namespace gslm {

namespace {

void check_args(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 3)
        throw std::invalid_argument("cam: logits must be CxHxW, got " + shape_str(logits.shape()));
    if (static_cast<size_t>(logits.extent(0)) != labels.size())
        throw std::invalid_argument("cam: label vector length " + std::to_string(labels.size()) +
                                    " does not match " + std::to_string(logits.extent(0)) + " channels");
    if (std::none_of(labels.begin(), labels.end(), [](int v) { return v != 0; }))
        throw std::invalid_argument("cam: all-zero label vector");
    logits.check_finite("cam logits");
}

}  // namespace

Cam compute_cam(const Tensor& logits, const std::vector<int>& labels) {
    check_args(logits, labels);
    const int h = logits.extent(1), w = logits.extent(2);
    const int hw = h * w;
    Cam cam;
    cam.source = CamSource::Glm;
    for (size_t c = 0; c < labels.size(); ++c) {
        if (!labels[c]) continue;
        const double* p = logits.data() + c * static_cast<size_t>(hw);
        double mx = p[0];
        for (int i = 1; i < hw; ++i) mx = std::max(mx, p[i]);
        Tensor map({h, w});
        if (mx > 0.0)
            for (int i = 0; i < hw; ++i) map[static_cast<size_t>(i)] = p[i] > 0.0 ? p[i] / mx : 0.0;
        cam.maps.emplace(static_cast<int>(c) + 1, std::move(map));
    }
    return cam;
}

Cam seed_reactivation_cam(const Tensor& logits, const std::vector<int>& labels, double k) {
    if (!(k > 0.0)) throw std::invalid_argument("seed_reactivation_cam: k must be positive");
    check_args(logits, labels);
    const int h = logits.extent(1), w = logits.extent(2);
    const int hw = h * w;
    Cam cam;
    cam.source = CamSource::Slm;
    for (size_t c = 0; c < labels.size(); ++c) {
        if (!labels[c]) continue;
        const double* p = logits.data() + c * static_cast<size_t>(hw);
        Tensor map({h, w});
        for (int i = 0; i < hw; ++i)
            map[static_cast<size_t>(i)] = std::min(std::max(p[i], 0.0), k) / k;
        cam.maps.emplace(static_cast<int>(c) + 1, std::move(map));
    }
    return cam;
}

}  // namespace gslm
