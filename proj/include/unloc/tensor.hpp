#pragma once

#include "unloc/errors.hpp"

#include <Eigen/Core>

#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace unloc {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixXd = RowMatrix<double>;

std::string shape_str(const Shape& s);
Index shape_size(const Shape& s);

/// Dense row-major n-d array of doubles. The shape is fixed at construction;
/// the storage is an Eigen vector so elementwise work can go through `.array()`.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);
    Tensor(Shape shape, Eigen::VectorXd data);
    Tensor(Shape shape, std::initializer_list<double> values);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor ones(Shape shape);
    static Tensor full(Shape shape, double v);
    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    /// Wraps a row-major matrix as a rank-2 tensor.
    static Tensor from_matrix(const Eigen::Ref<const RowMatrixXd>& m);

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    Index dim(int axis) const;
    Index size() const { return data_.size(); }
    bool empty() const { return data_.size() == 0; }

    Eigen::VectorXd& data() { return data_; }
    const Eigen::VectorXd& data() const { return data_; }
    double* ptr() { return data_.data(); }
    const double* ptr() const { return data_.data(); }
    double& operator[](Index i) { return data_[i]; }
    double operator[](Index i) const { return data_[i]; }

    /// Row-major view with `rows` leading rows; columns span the rest.
    Eigen::Map<RowMatrixXd> matrix(Index rows);
    Eigen::Map<const RowMatrixXd> matrix(Index rows) const;
    /// View as shape[0] x (product of the remaining dims).
    Eigen::Map<RowMatrixXd> matrix() { return matrix(rank() == 0 ? 1 : shape_[0]); }
    Eigen::Map<const RowMatrixXd> matrix() const { return matrix(rank() == 0 ? 1 : shape_[0]); }

    /// Same data, new shape of equal size.
    Tensor reshaped(Shape shape) const;

    bool all_finite() const { return data_.allFinite(); }
    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

private:
    Shape shape_;
    Eigen::VectorXd data_;
};

inline void require_shape(const Tensor& t, const Shape& expected, const char* what) {
    if (t.shape() != expected)
        throw DimensionError(std::string(what) + ": expected shape " + shape_str(expected) + ", got " +
                             shape_str(t.shape()));
}

}  // namespace unloc
