#include "gslm/coarse.hpp"

#include <optional>

#include "gslm/image.hpp"

namespace gslm {

std::vector<int8_t> confidence_map(const Tensor& cam_map, double theta_fg, double theta_bg,
                                   int out_h, int out_w) {
    if (!(theta_bg >= 0.0 && theta_bg < theta_fg && theta_fg <= 1.0))
        throw std::invalid_argument("confidence_map: need 0 <= theta_bg < theta_fg <= 1, got bg=" +
                                    std::to_string(theta_bg) + " fg=" + std::to_string(theta_fg));
    Tensor up = cam_map.extent(0) == out_h && cam_map.extent(1) == out_w
                    ? cam_map
                    : nearest_resize(cam_map, out_h, out_w);
    std::vector<int8_t> out(static_cast<size_t>(out_h) * out_w);
    for (size_t i = 0; i < out.size(); ++i) {
        const double v = up[i];
        out[i] = v >= theta_fg ? 1 : (v < theta_bg ? 0 : -1);
    }
    return out;
}

int8_t relabel_marginal(double q, int8_t prior, double theta_fg, double theta_bg) {
    constexpr double kSlack = 1e-9;
    if (prior == 1) {
        if (q >= 0.5 - kSlack) return 1;
        return q <= theta_fg + kSlack ? 0 : -1;  // clearly background-side: reassign
    }
    if (prior == 0) {
        if (q <= 0.5 + kSlack) return 0;
        return q >= 1.0 - theta_fg - kSlack ? 1 : -1;
    }
    if (q >= 1.0 - theta_fg - kSlack) return 1;
    if (q <= theta_bg + kSlack) return 0;
    return -1;
}

ConfidenceCam coarse_generate(const Tensor& image, const Cam& cam, double theta_fg,
                              double theta_bg, const CrfParams& params, bool boundary_constraint) {
    if (image.rank() != 3 || image.extent(0) != 3)
        throw std::invalid_argument("coarse_generate: image must be 3xHxW");
    const int h = image.extent(1), w = image.extent(2);
    ConfidenceCam out;
    out.h = h;
    out.w = w;
    // The pair structure depends only on the image; build it once and refine
    // every present class against it.
    std::optional<DenseCrfSolver> solver;
    if (boundary_constraint) solver.emplace(image, params);
    for (const auto& [cls, map] : cam.maps) {
        std::vector<int8_t> g = confidence_map(map, theta_fg, theta_bg, h, w);
        if (boundary_constraint) {
            Tensor prob({h, w});
            for (size_t i = 0; i < g.size(); ++i)
                prob[i] = g[i] == 1 ? kFgLift : (g[i] == 0 ? kBgLift : kIgnoreLift);
            Tensor refined = solver->refine(prob);
            for (size_t i = 0; i < g.size(); ++i)
                g[i] = relabel_marginal(refined[i], g[i], theta_fg, theta_bg);
        }
        out.maps.emplace(cls, std::move(g));
    }
    return out;
}

void write_confidence_pgm(const std::filesystem::path& path, const std::vector<int8_t>& map,
                          int h, int w) {
    std::vector<uint8_t> px(map.size());
    for (size_t i = 0; i < map.size(); ++i)
        px[i] = map[i] == 1 ? 255 : (map[i] == 0 ? 0 : 128);
    write_pgm(path, w, h, px);
}

Tensor confidence_to_tensor(const std::vector<int8_t>& map, int h, int w) {
    Tensor t({h, w});
    for (size_t i = 0; i < map.size(); ++i) t[i] = static_cast<double>(map[i]);
    return t;
}

std::vector<int8_t> confidence_from_tensor(const Tensor& t) {
    std::vector<int8_t> out(t.size());
    for (size_t i = 0; i < t.size(); ++i) {
        const double v = t[i];
        if (v != 1.0 && v != 0.0 && v != -1.0)
            throw std::runtime_error("confidence map holds value outside {1,0,-1}");
        out[i] = static_cast<int8_t>(v);
    }
    return out;
}

}  // namespace gslm
