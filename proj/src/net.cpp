#include "gslm/net.hpp"

#include <cmath>

#include "gslm/rng.hpp"
#include "gslm/tensor_io.hpp"

namespace gslm {

namespace {

Tensor he_uniform(const std::vector<int>& shape, int fan_in, double gain, Xoshiro256ss& rng) {
    Tensor t(shape);
    const double bound = gain * std::sqrt(6.0 / fan_in);
    for (size_t i = 0; i < t.size(); ++i) t[i] = (rng.uniform() * 2.0 - 1.0) * bound;
    return t;
}

}  // namespace

TinyCamNet::TinyCamNet(int classes, uint64_t init_seed)
    : TinyCamNet(classes, init_seed, 1.0, 2.0) {}

TinyCamNet::TinyCamNet(int classes, uint64_t init_seed, double conv_gain, double head_gain)
    : classes_(classes) {
    if (classes < 1) throw std::invalid_argument("TinyCamNet: need at least one class");
    Xoshiro256ss rng(mix_seed(init_seed, 0xC0DEBA5EULL));
    int in_ch = 3;
    for (int b = 0; b < kBlocks; ++b) {
        const int out_ch = kWidths[b];
        const int fan_in = in_ch * 9;
        auto w = std::make_unique<Parameter>("backbone.conv" + std::to_string(b + 1) + ".weight",
                                             he_uniform({out_ch, in_ch, 3, 3}, fan_in, conv_gain, rng));
        auto bias = std::make_unique<Parameter>("backbone.conv" + std::to_string(b + 1) + ".bias",
                                                Tensor({out_ch}));
        conv_w_[b] = w.get();
        conv_b_[b] = bias.get();
        params_.push_back(std::move(w));
        params_.push_back(std::move(bias));
        in_ch = out_ch;
    }
    auto head = std::make_unique<Parameter>("head.weight",
                                            he_uniform({classes, in_ch, 1, 1}, in_ch, head_gain, rng));
    head_w_ = head.get();
    params_.push_back(std::move(head));
    auto head_b = std::make_unique<Parameter>("head.bias", Tensor({classes}));
    head_b_ = head_b.get();
    params_.push_back(std::move(head_b));
}

Tape::Id TinyCamNet::forward(Tape& tape, Tape::Id image) const {
    Tape::Id x = tape.shift(image, -0.5);  // center [0,1] inputs
    for (int b = 0; b < kBlocks; ++b) {
        const Tape::Id w = tape.param(*conv_w_[b]);
        const Tape::Id bias = tape.param(*conv_b_[b]);
        x = tape.relu(tape.conv2d(x, w, bias, kStrides[b], 1));
    }
    return tape.conv2d(x, tape.param(*head_w_), tape.param(*head_b_), 1, 0);
}

std::vector<Parameter*> TinyCamNet::parameters() const {
    std::vector<Parameter*> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.get());
    return out;
}

void TinyCamNet::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    for (const auto& p : params_) write_gten(dir / (p->name + ".gten"), p->value);
}

void TinyCamNet::load(const std::filesystem::path& dir) {
    for (auto& p : params_) {
        Tensor t = read_gten(dir / (p->name + ".gten"));
        if (!t.same_shape(p->value))
            throw std::runtime_error("TinyCamNet::load: shape mismatch for " + p->name);
        p->value = std::move(t);
    }
}

std::vector<Tensor> TinyCamNet::snapshot_values() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p->value);
    return out;
}

void TinyCamNet::restore_values(const std::vector<Tensor>& values) {
    if (values.size() != params_.size())
        throw std::invalid_argument("TinyCamNet::restore_values: parameter count mismatch");
    for (size_t i = 0; i < values.size(); ++i) params_[i]->value = values[i];
}

}  // namespace gslm
