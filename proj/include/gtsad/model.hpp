#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "gtsad/gaussian.hpp"
#include "gtsad/graph.hpp"
#include "gtsad/series.hpp"
#include "gtsad/tape.hpp"

namespace gtsad {

struct ModelConfig {
    int nodeCount = 0;
    int channels = 2;
    int chebyshevOrder = 3; // K
    int graphFeatures = 8;  // channels produced by the graph filter
    int latentDim = 16;
    int hiddenDim = 64;
    int externalDim = kExternalDim;
    double stddevFloor = 1e-4;

    void validate() const;
    int flatInputDim() const { return nodeCount * channels; }
    int flatFeatureDim() const { return nodeCount * graphFeatures; }
};

struct RnnState {
    Tensor h;
    Tensor c;
};

/// All trainable weights. Traversal order of forEach/tensors is fixed and
/// shared by the optimizer, checkpoints and hashes.
struct ModelParams {
    Tensor chebCoeff; // (K, C, F)

    // latent feature extractor: d_z -> d_h (hidden d_h, tanh)
    Tensor zW1, zB1, zW2, zB2;
    // external-feature network: d_e -> d_z (hidden d_h, tanh)
    Tensor extW1, extB1, extW2, extB2;
    // prior head: d_h -> (d_z mean, d_z stddev)
    Tensor priorW1, priorB1, priorWm, priorBm, priorWs, priorBs;
    // encoder head: (n*F + d_h) -> (d_z mean, d_z stddev)
    Tensor encW1, encB1, encWm, encBm, encWs, encBs;
    // decoder head: (d_h + d_h) -> (n*C mean, n*C stddev)
    Tensor decW1, decB1, decWm, decBm, decWs, decBs;
    // LSTM gates over concat(x features, z features, h_prev)
    Tensor lstmWi, lstmBi, lstmWf, lstmBf, lstmWo, lstmBo, lstmWc, lstmBc;

    void forEach(const std::function<void(const char*, Tensor&)>& fn);
    void forEach(const std::function<void(const char*, const Tensor&)>& fn) const;
    std::vector<Tensor*> tensors();
    std::vector<const Tensor*> tensors() const;
    bool allFinite() const;
};

/// Empty parameter tensors with the shapes the config dictates.
ModelParams shapedParams(const ModelConfig& config);

/// Fan-balanced uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases
/// except the LSTM forget gate at 1.0, filter coefficients scaled by 1/K.
ModelParams initParams(const ModelConfig& config, uint64_t seed);

/// Per-parameter handles on one tape.
struct ParamVals {
    Val chebCoeff;
    Val zW1, zB1, zW2, zB2;
    Val extW1, extB1, extW2, extB2;
    Val priorW1, priorB1, priorWm, priorBm, priorWs, priorBs;
    Val encW1, encB1, encWm, encBm, encWs, encBs;
    Val decW1, decB1, decWm, decBm, decWs, decBs;
    Val lstmWi, lstmBi, lstmWf, lstmBf, lstmWo, lstmBo, lstmWc, lstmBc;

    std::vector<Val> list() const;
};

struct StateVal {
    Val h;
    Val c;
};

/// The variational RNN over graph signals: graph-spectral input features, a
/// latent Gaussian with recurrent prior, external features shifting only the
/// posterior mean, and an LSTM threading the state.
class Vrnn {
public:
    Vrnn(ModelConfig config, const ScaledLaplacian* laplacian);

    const ModelConfig& config() const { return config_; }

    // --- tape-level graph (params aliased; tape must not outlive them) ---
    ParamVals trackParams(Tape& tape, const ModelParams& params, bool trainable) const;
    StateVal initialState(Tape& tape) const;
    Val extractX(Tape& tape, const ParamVals& p, Val xt) const;   // (n,C) -> (n*F)
    Val extractZ(Tape& tape, const ParamVals& p, Val zt) const;   // (d_z) -> (d_h)
    Val extractExt(Tape& tape, const ParamVals& p, Val et) const; // (d_e) -> (d_z)
    GaussianVal priorStep(Tape& tape, const ParamVals& p, const StateVal& state) const;
    GaussianVal encodeFromFeatures(Tape& tape, const ParamVals& p, Val xFeat, Val et,
                                   const StateVal& state) const;
    GaussianVal decodeFromFeatures(Tape& tape, const ParamVals& p, Val zFeat,
                                   const StateVal& state) const;
    StateVal recurrenceFromFeatures(Tape& tape, const ParamVals& p, Val xFeat, Val zFeat,
                                    const StateVal& state) const;
    /// Single ELBO summand with explicit reparameterization noise; advances
    /// the state with the observed signal and the sampled latent.
    std::pair<Val, StateVal> stepElbo(Tape& tape, const ParamVals& p, Val xt, Val et,
                                      const StateVal& state, Val noise) const;
    /// Sum of per-step ELBO terms from a zero state, one seeded noise draw
    /// per step.
    Val sequenceElbo(Tape& tape, const ParamVals& p, const GraphSeries& x,
                     const ExternalSeries& e, uint64_t seed) const;

    // --- plain-tensor wrappers ---
    Tensor extractX(const ModelParams& params, const Tensor& xt) const;
    Tensor extractZ(const ModelParams& params, const Tensor& zt) const;
    Tensor extractExt(const ModelParams& params, const ExternalRecord& e) const;
    GaussianParams priorStep(const ModelParams& params, const RnnState& state) const;
    GaussianParams encodeStep(const ModelParams& params, const Tensor& xt, const ExternalRecord& e,
                              const RnnState& state) const;
    GaussianParams decodeStep(const ModelParams& params, const Tensor& zt, const RnnState& state) const;
    RnnState recurrenceStep(const ModelParams& params, const Tensor& xt, const Tensor& zt,
                            const RnnState& state) const;
    std::pair<double, RnnState> stepElbo(const ModelParams& params, const Tensor& xt,
                                         const ExternalRecord& e, const RnnState& state,
                                         const Tensor& noise) const;
    double sequenceElbo(const ModelParams& params, const GraphSeries& x, const ExternalSeries& e,
                        uint64_t seed) const;
    /// Ancestral sampling: z from the prior, x from the decoder, state threaded
    /// with the sampled values.
    GraphSeries generate(const ModelParams& params, int steps, uint64_t seed) const;

    RnnState zeroState() const;

private:
    ModelConfig config_;
    const ScaledLaplacian* laplacian_;
};

} // namespace gtsad
