#include "tobo/tensor.hpp"

#include <string>

#include "tobo/error.hpp"

namespace tobo {

TensorShape::TensorShape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    if (dims_.empty()) throw ShapeError("tensor shape needs at least one mode");
    total_ = 1;
    for (std::size_t d : dims_) {
        if (d == 0) throw ShapeError("tensor mode sizes must be positive");
        total_ *= d;
    }
}

std::size_t TensorShape::linear_index(std::span<const std::size_t> multi) const {
    if (multi.size() != dims_.size())
        throw ShapeError("multi-index has " + std::to_string(multi.size()) + " modes, expected " +
                         std::to_string(dims_.size()));
    std::size_t idx = 0;
    std::size_t stride = 1;
    for (std::size_t l = 0; l < dims_.size(); ++l) {
        if (multi[l] >= dims_[l]) throw ShapeError("multi-index out of range");
        idx += multi[l] * stride;
        stride *= dims_[l];
    }
    return idx;
}

std::vector<std::size_t> TensorShape::multi_index(std::size_t linear) const {
    if (linear >= total_) throw ShapeError("linear index out of range");
    std::vector<std::size_t> out(dims_.size());
    for (std::size_t l = 0; l < dims_.size(); ++l) {
        out[l] = linear % dims_[l];
        linear /= dims_[l];
    }
    return out;
}

DenseTensor::DenseTensor(TensorShape shape) : shape_(std::move(shape)), data_(shape_.total(), 0.0) {}

DenseTensor::DenseTensor(TensorShape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_.total()) throw ShapeError("tensor data length does not match shape");
}

Eigen::VectorXd vec(const DenseTensor& t) {
    const auto d = t.data();
    return Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
}

DenseTensor unvec(const Eigen::VectorXd& v, const TensorShape& shape) {
    if (static_cast<std::size_t>(v.size()) != shape.total())
        throw ShapeError("unvec: vector length " + std::to_string(v.size()) + " != tensor size " +
                         std::to_string(shape.total()));
    return DenseTensor(shape, std::vector<double>(v.data(), v.data() + v.size()));
}

DenseTensor mode_product(const DenseTensor& t, std::size_t mode, const Eigen::MatrixXd& M) {
    const auto& shape = t.shape();
    if (mode >= shape.modes()) throw ShapeError("mode_product: mode out of range");
    const std::size_t n = shape.dim(mode);
    if (static_cast<std::size_t>(M.cols()) != n)
        throw ShapeError("mode_product: matrix has " + std::to_string(M.cols()) + " columns, mode has size " +
                         std::to_string(n));
    std::size_t inner = 1, outer = 1;
    for (std::size_t l = 0; l < mode; ++l) inner *= shape.dim(l);
    for (std::size_t l = mode + 1; l < shape.modes(); ++l) outer *= shape.dim(l);
    std::vector<std::size_t> dims = shape.dims();
    dims[mode] = static_cast<std::size_t>(M.rows());
    DenseTensor out{TensorShape(dims)};
    const auto src = t.data();
    auto dst = out.data();
    const auto m = static_cast<std::size_t>(M.rows());
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double c = M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                for (std::size_t a = 0; a < inner; ++a) dst[a + inner * (i + m * o)] += c * src[a + inner * (j + n * o)];
            }
    return out;
}

}  // namespace tobo
