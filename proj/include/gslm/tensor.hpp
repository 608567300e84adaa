#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gslm {

inline std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
}

// Dense row-major tensor of 64-bit reals. Rank 0 is a scalar with one element.
class Tensor {
public:
    Tensor() : data_(1, 0.0) {}

    explicit Tensor(std::vector<int> shape, double fill = 0.0)
        : shape_(std::move(shape)) {
        size_t n = 1;
        for (int e : shape_) {
            if (e <= 0) throw std::invalid_argument("Tensor: non-positive extent in " + shape_str(shape_));
            n *= static_cast<size_t>(e);
        }
        data_.assign(n, fill);
    }

    static Tensor scalar(double v) {
        Tensor t;
        t.data_[0] = v;
        return t;
    }

    static Tensor from_data(std::vector<int> shape, std::vector<double> data) {
        Tensor t(std::move(shape));
        if (data.size() != t.data_.size())
            throw std::invalid_argument("Tensor: data length " + std::to_string(data.size()) +
                                        " does not match shape " + shape_str(t.shape_));
        t.data_ = std::move(data);
        return t;
    }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int extent(int axis) const { return shape_.at(static_cast<size_t>(axis)); }
    size_t size() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    // Row-major element access; index count must equal rank.
    template <class... I>
    double& at(I... idx) {
        return data_[offset(idx...)];
    }
    template <class... I>
    double at(I... idx) const {
        return data_[offset(idx...)];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    void fill(double v) { data_.assign(data_.size(), v); }

    double item() const {
        if (data_.size() != 1)
            throw std::logic_error("Tensor::item on tensor of size " + std::to_string(data_.size()));
        return data_[0];
    }

    // NaN/Inf is a fault, never silent.
    void check_finite(const std::string& what) const {
        for (double v : data_)
            if (!std::isfinite(v))
                throw std::runtime_error("non-finite value in " + what);
    }

private:
    template <class... I>
    size_t offset(I... idx) const {
        const int ids[] = {static_cast<int>(idx)...};
        const size_t n = sizeof...(idx);
        if (n != shape_.size())
            throw std::logic_error("Tensor: index rank mismatch");
        size_t off = 0;
        for (size_t a = 0; a < n; ++a) off = off * static_cast<size_t>(shape_[a]) + static_cast<size_t>(ids[a]);
        return off;
    }

    std::vector<int> shape_;
    std::vector<double> data_;
};

}  // namespace gslm
