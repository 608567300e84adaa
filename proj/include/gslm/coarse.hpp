#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "gslm/cam.hpp"
#include "gslm/crf.hpp"

namespace gslm {

// Three-valued supervision map at image resolution:
// 1 salient foreground, 0 salient background, -1 ignore (confusion).
struct ConfidenceCam {
    int h = 0, w = 0;
    std::map<int, std::vector<int8_t>> maps;  // class id -> HxW values in {1,0,-1}
};

// Three-way confidence mapping applied after nearest-neighbor upsampling of
// the activation map to (out_h, out_w):
//   1 where value >= theta_fg, 0 where value < theta_bg, -1 otherwise.
// Requires 0 <= theta_bg < theta_fg <= 1.
std::vector<int8_t> confidence_map(const Tensor& cam_map, double theta_fg, double theta_bg,
                                   int out_h, int out_w);

// Confidence values embedded as foreground probability for the CRF.
inline constexpr double kFgLift = 0.95;
inline constexpr double kBgLift = 0.05;
inline constexpr double kIgnoreLift = 0.5;

// Relabeling of a refined foreground marginal back to {1,0,-1}, conditioned
// on the pre-refinement label. A salient label survives unless the marginal
// crosses 0.5 against it; a confusion pixel is reassigned only on strong
// consensus, with the thresholds mirrored into probability space
// (foreground needs >= 1 - theta_fg, background needs <= theta_bg). This
// reinforces salient regions and reassigns confusion without letting the
// color-blind spatial kernel erode small seeds. A 1e-9 slack keeps exact
// fixed points (the lifted values under zero net force) on their side.
int8_t relabel_marginal(double q, int8_t prior, double theta_fg, double theta_bg);

// Per class: confidence_map, then (when boundary_constraint is set) lift to
// probabilities, run the dense CRF against the image, and relabel. Without
// the flag the thresholded map is returned unchanged.
ConfidenceCam coarse_generate(const Tensor& image, const Cam& cam, double theta_fg,
                              double theta_bg, const CrfParams& params, bool boundary_constraint);

// PGM encoding {-1 -> 128, 0 -> 0, 1 -> 255}, plus exact values as a tensor
// container.
void write_confidence_pgm(const std::filesystem::path& path, const std::vector<int8_t>& map,
                          int h, int w);
Tensor confidence_to_tensor(const std::vector<int8_t>& map, int h, int w);
std::vector<int8_t> confidence_from_tensor(const Tensor& t);

}  // namespace gslm
