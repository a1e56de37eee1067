#pragma once

#include "gtsad/tape.hpp"
#include "gtsad/tensor.hpp"

namespace gtsad {

/// Diagonal Gaussian as (mean, stddev) value pair.
struct GaussianParams {
    Tensor mean;
    Tensor stddev;
};

/// Diagonal Gaussian built on a tape, differentiable through both heads.
struct GaussianVal {
    Val mean;
    Val stddev;
};

/// log N(x; mean, var) for a scalar observation.
double normalLogPdf(double x, double mean, double variance);

/// Sum over elements of the diagonal-Gaussian log density
/// sum_i [ -log(2*pi)/2 - log s_i - (x_i - m_i)^2 / (2 s_i^2) ].
/// Differentiable w.r.t. x, mean and stddev. Nonpositive stddev -> domain error.
Val gaussianLogDensity(Tape& tape, Val x, Val mean, Val stddev);
double gaussianLogDensity(const Tensor& x, const Tensor& mean, const Tensor& stddev);

/// Analytic KL(q || p) between diagonal Gaussians:
/// sum_i [ log(sp_i/sq_i) + (sq_i^2 + (mq_i - mp_i)^2) / (2 sp_i^2) - 1/2 ].
Val klDiagGaussians(Tape& tape, const GaussianVal& q, const GaussianVal& p);
double klDiagGaussians(const GaussianParams& q, const GaussianParams& p);

/// z = mean + stddev * noise (reparameterization; differentiable in both heads).
Val reparameterize(Tape& tape, const GaussianVal& g, Val noise);

} // namespace gtsad
