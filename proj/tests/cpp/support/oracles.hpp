#pragma once

// Independent reference implementations used to cross-check the library.
// Everything here favors obviousness over speed and, where possible, uses a
// different algorithm than the code under test.

#include <functional>
#include <vector>

#include "gtsad/graph.hpp"
#include "gtsad/rng.hpp"
#include "gtsad/tensor.hpp"

namespace gtsad::testsupport {

using ScalarFn = std::function<double(const std::vector<gtsad::Tensor>&)>;

/// Largest relative disagreement between analytic gradients and central
/// finite differences of f at the given point. Relative error per element is
/// |g - fd| / max(|g|, |fd|, 1e-6).
double maxGradRelError(const ScalarFn& f, std::vector<gtsad::Tensor> point,
                       const std::vector<gtsad::Tensor>& analytic, double h = 1e-5);

/// Chebyshev-basis coefficients -> monomial-basis coefficients: with
/// T_0 = 1, T_1 = x, T_k = 2 x T_{k-1} - T_{k-2}, expands
/// sum_k c_k T_k(x) into sum_k m_k x^k.
gtsad::Tensor chebyshevToMonomial(const gtsad::Tensor& chebCoefficients);

/// Monte Carlo estimate of KL(q || p) between diagonal Gaussians by sampling
/// from q. Used as a sanity band around the closed form, not an exact check.
double mcKlDiagGaussians(const gtsad::Tensor& meanQ, const gtsad::Tensor& stdQ,
                         const gtsad::Tensor& meanP, const gtsad::Tensor& stdP,
                         int sampleCount, uint64_t seed);

/// Random connected undirected graph: spanning tree plus extra edges, weights
/// uniform in [0.5, 1.5].
gtsad::WeightedGraph randomConnectedGraph(gtsad::Rng& rng, int nodeCount, double extraEdgeProb = 0.3);

/// Chi-square CDF by adaptive Simpson quadrature of the density (df = 1 is
/// integrated after the u^2 substitution that removes the endpoint
/// singularity).
double chiSquareCdfQuadrature(double x, int df);

/// Metric references computed by direct definition: threshold sweep over all
/// distinct scores for average precision, full pair enumeration for AUC.
double averagePrecisionByDefinition(const std::vector<double>& scores, const std::vector<int>& labels);
double aucByPairCounting(const std::vector<double>& scores, const std::vector<int>& labels);

} // namespace gtsad::testsupport
