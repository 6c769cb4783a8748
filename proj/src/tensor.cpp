#include "unloc/tensor.hpp"

#include <sstream>

namespace unloc {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ')';
    return os.str();
}

Index shape_size(const Shape& s) {
    Index n = 1;
    for (Index d : s) {
        if (d <= 0) throw DimensionError("non-positive dimension in shape " + shape_str(s));
        n *= d;
    }
    return n;
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(Eigen::VectorXd::Zero(shape_size(shape_))) {}

Tensor::Tensor(Shape shape, Eigen::VectorXd data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size())
        throw DimensionError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                             shape_str(shape_));
}

Tensor::Tensor(Shape shape, std::initializer_list<double> values) : shape_(std::move(shape)) {
    if (shape_size(shape_) != static_cast<Index>(values.size()))
        throw DimensionError("initializer length does not match shape " + shape_str(shape_));
    data_.resize(static_cast<Index>(values.size()));
    Index i = 0;
    for (double v : values) data_[i++] = v;
}

Tensor Tensor::ones(Shape shape) { return full(std::move(shape), 1.0); }

Tensor Tensor::full(Shape shape, double v) {
    Tensor t(std::move(shape));
    t.data_.setConstant(v);
    return t;
}

Tensor Tensor::from_matrix(const Eigen::Ref<const RowMatrixXd>& m) {
    Tensor t({m.rows(), m.cols()});
    t.matrix() = m;
    return t;
}

Index Tensor::dim(int axis) const {
    if (axis < 0) axis += rank();
    if (axis < 0 || axis >= rank()) throw DimensionError("axis out of range for shape " + shape_str(shape_));
    return shape_[static_cast<std::size_t>(axis)];
}

Eigen::Map<RowMatrixXd> Tensor::matrix(Index rows) {
    return {data_.data(), rows, rows ? data_.size() / rows : 0};
}

Eigen::Map<const RowMatrixXd> Tensor::matrix(Index rows) const {
    return {data_.data(), rows, rows ? data_.size() / rows : 0};
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_size(shape) != size())
        throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    return Tensor(std::move(shape), data_);
}

}  // namespace unloc
