#pragma once

#include <map>
#include <vector>

#include "gslm/tensor.hpp"

namespace gslm {

enum class CamSource { Glm, Slm };

// Per-class activation maps in [0,1], held only for classes present in the
// image-level label vector. Class ids are 1-based (0 is background in masks);
// labels[c-1] flags class id c.
struct Cam {
    CamSource source = CamSource::Glm;
    int stage = 0;
    std::map<int, Tensor> maps;  // class id -> HxW map
};

// Global-max normalization: relu(logits_c) / max(logits_c), max over raw
// logits. A channel whose max is <= 0 yields an all-zero map. Rejects an
// all-zero label vector.
Cam compute_cam(const Tensor& logits, const std::vector<int>& labels);

// Bounded normalization: clamp(logits_c, 0, k) / k.
Cam seed_reactivation_cam(const Tensor& logits, const std::vector<int>& labels, double k);

}  // namespace gslm
