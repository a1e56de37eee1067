#pragma once

#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "gtsad/tape.hpp"
#include "gtsad/tensor.hpp"

namespace gtsad {

/// Undirected weighted graph: symmetric nonnegative weights, zero diagonal,
/// connected. Immutable after construction.
class WeightedGraph {
public:
    /// Validates symmetry, nonnegativity, zero diagonal and connectivity.
    WeightedGraph(int nodeCount, Tensor weights);

    int nodeCount() const { return n_; }
    const Tensor& weights() const { return weights_; }
    Tensor degrees() const;

private:
    int n_ = 0;
    Tensor weights_; // (n, n)
};

/// 4-neighborhood grid graph with unit edge weights. rows*cols >= 2.
WeightedGraph buildGridGraph(int rows, int cols);

/// L = I - D^{-1/2} W D^{-1/2}; every node must have positive degree.
Tensor normalizedLaplacian(const WeightedGraph& g);

/// Power iteration failed to converge; carries the best estimate so far.
struct PowerIterationError : std::runtime_error {
    PowerIterationError(const std::string& msg, double estimate)
        : std::runtime_error(msg), bestEstimate(estimate) {}
    double bestEstimate;
};

/// Largest eigenvalue of a symmetric matrix by power iteration with a
/// deterministic pseudo-random start vector.
double estimateLambdaMax(const Tensor& sym, double tol = 1e-6, int maxIterations = 10000);

/// Rescaled Laplacian Lt = 2 L / lambdaMax - I with a sparse entry list for
/// O(#edges) multiplies inside the Chebyshev recursion.
class ScaledLaplacian {
public:
    explicit ScaledLaplacian(const WeightedGraph& g, double lambdaTol = 1e-6);

    int nodeCount() const { return n_; }
    double lambdaMax() const { return lambdaMax_; }
    const SparseMatrix& matrix() const { return sparse_; }
    const Tensor& dense() const { return dense_; }
    const Tensor& laplacian() const { return laplacian_; }

private:
    int n_ = 0;
    double lambdaMax_ = 0.0;
    SparseMatrix sparse_;
    Tensor dense_;     // (n, n) rescaled
    Tensor laplacian_; // (n, n) unscaled normalized Laplacian
};

/// K-localized filter: order K with one coefficient per
/// (order, input channel, output channel) triple.
struct ChebyshevFilter {
    Tensor coefficients; // (K, cIn, cOut)

    int order() const { return coefficients.dim(0); }
    int inChannels() const { return coefficients.dim(1); }
    int outChannels() const { return coefficients.dim(2); }
};

/// y = sum_k T_k(Lt) x w_k with T_0 = I, T_1 = Lt, T_k = 2 Lt T_{k-1} - T_{k-2}.
/// x is (n, cIn); result (n, cOut). Differentiable w.r.t. coefficients and x.
Val chebyshevApply(Tape& tape, Val coefficients, const ScaledLaplacian& sl, Val x);
Tensor chebyshevApply(const ChebyshevFilter& filter, const ScaledLaplacian& sl, const Tensor& x);

/// Symmetric eigendecomposition by cyclic Jacobi rotations, iterating until
/// the off-diagonal Frobenius norm falls below tol * ||A||_F.
void jacobiEigen(const Tensor& sym, Tensor& eigenvalues, Tensor& eigenvectors, double tol = 1e-12);

/// Exact spectral filtering U g(Lambda) U^T x with g(l) = sum_k w_k l^k, via
/// full eigendecomposition. Refuses n > 64 (dense oracle only).
Tensor spectralOracle(const Tensor& laplacian, const Tensor& monomialCoefficients, const Tensor& x);

/// Edge-list text format: one "u v w" triple per line, 0-based indices, each
/// undirected edge written once with u < v.
void writeEdgeList(const WeightedGraph& g, std::ostream& out);
WeightedGraph readEdgeList(std::istream& in);

} // namespace gtsad
