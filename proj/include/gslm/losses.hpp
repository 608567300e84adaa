#pragma once

#include <vector>

#include "gslm/autodiff.hpp"

namespace gslm {

// Per-step objective breakdown as logged to the training CSV.
struct LossBreakdown {
    double total = 0.0;
    double cls = 0.0;
    double act = 0.0;
    long supervised_pixels = 0;
};

// Mean binary cross-entropy between a sigmoid prediction vector and a 0/1
// target vector.
Tape::Id classification_loss(Tape& tape, Tape::Id pred, const std::vector<double>& target);

// Masked smooth-L1 between bounded activation maps and a three-valued
// supervision tensor (1 foreground, 0 background, -1 ignore), averaged per
// class over supervised pixels and then over present classes. Ignored pixels
// contribute exactly nothing to value or gradient.
Tape::Id activation_loss(Tape& tape, Tape::Id maps, const Tensor& confidence,
                         const std::vector<char>& present_classes,
                         long* supervised_count_out = nullptr);

// total = cls + alpha * act
Tape::Id total_loss(Tape& tape, Tape::Id cls, Tape::Id act, double alpha);

}  // namespace gslm
