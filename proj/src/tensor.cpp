#include "gtsad/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace gtsad {

namespace {

size_t checkedProduct(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
        if (d <= 0) {
            throw std::invalid_argument("tensor shape has nonpositive dimension " + shapeString(shape));
        }
        n *= static_cast<size_t>(d);
    }
    return n;
}

} // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)), values_(checkedProduct(shape_), 0.0) {}

Tensor Tensor::scalar(double v) {
    Tensor t({1});
    t.values_[0] = v;
    return t;
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    for (double& x : t.values_) x = v;
    return t;
}

Tensor Tensor::of(std::vector<int> shape, std::vector<double> values) {
    Tensor t;
    t.shape_ = std::move(shape);
    if (checkedProduct(t.shape_) != values.size()) {
        throw std::invalid_argument("tensor values length " + std::to_string(values.size()) +
                                    " does not match shape " + gtsad::shapeString(t.shape_));
    }
    t.values_ = std::move(values);
    return t;
}

bool Tensor::allFinite() const {
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double Tensor::asScalar() const {
    if (values_.size() != 1) {
        throw std::invalid_argument("tensor of shape " + gtsad::shapeString(shape_) + " is not a scalar");
    }
    return values_[0];
}

std::string Tensor::shapeString() const { return gtsad::shapeString(shape_); }

std::string shapeString(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '(';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ')';
    return os.str();
}

} // namespace gtsad
