#include "gslm/losses.hpp"

namespace gslm {

Tape::Id classification_loss(Tape& tape, Tape::Id pred, const std::vector<double>& target) {
    return tape.bce_mean(pred, target);
}

Tape::Id activation_loss(Tape& tape, Tape::Id maps, const Tensor& confidence,
                         const std::vector<char>& present_classes, long* supervised_count_out) {
    return tape.masked_smooth_l1(maps, confidence, present_classes, supervised_count_out);
}

Tape::Id total_loss(Tape& tape, Tape::Id cls, Tape::Id act, double alpha) {
    if (alpha < 0.0) throw std::invalid_argument("total_loss: alpha must be non-negative");
    return tape.add_scaled(cls, act, alpha);
}

}  // namespace gslm
