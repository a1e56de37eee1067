#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace gtsad {

/// Dense float64 tensor with row-major storage. Immutable by convention once
/// produced by an operation; mutation is reserved for construction sites
/// (parameter initialization, optimizer updates).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);

    static Tensor scalar(double v);
    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double v);
    static Tensor of(std::vector<int> shape, std::vector<double> values);

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int size() const { return static_cast<int>(values_.size()); }
    bool isScalar() const { return values_.size() == 1; }

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    double& operator[](size_t i) { return values_[i]; }
    double operator[](size_t i) const { return values_[i]; }

    // rank-2 accessors
    double& at(int i, int j) { return values_[static_cast<size_t>(i) * shape_[1] + j]; }
    double at(int i, int j) const { return values_[static_cast<size_t>(i) * shape_[1] + j]; }

    bool sameShape(const Tensor& o) const { return shape_ == o.shape_; }
    bool allFinite() const;
    double asScalar() const;

    std::string shapeString() const;

private:
    std::vector<int> shape_;
    std::vector<double> values_;
};

std::string shapeString(const std::vector<int>& shape);

} // namespace gtsad
