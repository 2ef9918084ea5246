#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace tobo {

/// Geometry of an m-mode tensor t_1 x ... x t_m.
///
/// Linear indices follow the first-mode-fastest convention, the
/// multi-mode generalization of column-major storage:
/// idx = i_1 + t_1 * (i_2 + t_2 * (i_3 + ...)).
class TensorShape {
public:
    TensorShape() = default;
    explicit TensorShape(std::vector<std::size_t> dims);

    std::size_t modes() const noexcept { return dims_.size(); }
    std::size_t total() const noexcept { return total_; }
    std::size_t dim(std::size_t mode) const { return dims_.at(mode); }
    const std::vector<std::size_t>& dims() const noexcept { return dims_; }

    std::size_t linear_index(std::span<const std::size_t> multi) const;
    std::vector<std::size_t> multi_index(std::size_t linear) const;

    bool operator==(const TensorShape&) const = default;

private:
    std::vector<std::size_t> dims_;
    std::size_t total_ = 0;
};

class DenseTensor {
public:
    DenseTensor() = default;
    explicit DenseTensor(TensorShape shape);
    DenseTensor(TensorShape shape, std::vector<double> data);

    const TensorShape& shape() const noexcept { return shape_; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    double& operator()(std::span<const std::size_t> idx) { return data_[shape_.linear_index(idx)]; }
    double operator()(std::span<const std::size_t> idx) const { return data_[shape_.linear_index(idx)]; }

    bool operator==(const DenseTensor&) const = default;

private:
    TensorShape shape_;
    std::vector<double> data_;
};

/// Flattens a tensor into R^T in the canonical layout.
Eigen::VectorXd vec(const DenseTensor& t);

/// Inverse of vec(). Throws ShapeError if v.size() != shape.total().
DenseTensor unvec(const Eigen::VectorXd& v, const TensorShape& shape);

/// Mode product t x_mode M: the mode's index j is replaced by i with sum_j M(i, j) t[..j..].
DenseTensor mode_product(const DenseTensor& t, std::size_t mode, const Eigen::MatrixXd& M);

}  // namespace tobo
