#pragma once

#include <filesystem>
#include <memory>

#include "gslm/autodiff.hpp"

namespace gslm {

// Small CAM network: four 3x3 conv+relu blocks (widths 16/32/64/64, stride-2
// downsampling entering blocks 2 and 3) and a bias-free 1x1 classifier head.
// Logit maps come out at 1/4 of the input resolution. Every training stage
// shares this exact topology; stages differ only in weights and losses.
class TinyCamNet {
public:
    TinyCamNet(int classes, uint64_t init_seed);
    TinyCamNet(int classes, uint64_t init_seed, double conv_gain, double head_gain);

    Tape::Id forward(Tape& tape, Tape::Id image) const;  // -> logits Cx(S/4)x(S/4)

    std::vector<Parameter*> parameters() const;
    int classes() const { return classes_; }

    void save(const std::filesystem::path& dir) const;   // one container per parameter
    void load(const std::filesystem::path& dir);

    std::vector<Tensor> snapshot_values() const;
    void restore_values(const std::vector<Tensor>& values);

    static constexpr int kBlocks = 4;
    static constexpr int kWidths[kBlocks] = {16, 32, 64, 64};
    static constexpr int kStrides[kBlocks] = {1, 2, 2, 1};

private:
    int classes_;
    std::vector<std::unique_ptr<Parameter>> params_;
    Parameter* conv_w_[kBlocks];
    Parameter* conv_b_[kBlocks];
    Parameter* head_w_;
    Parameter* head_b_;
};

}  // namespace gslm
