#include "gtsad/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "gtsad/rng.hpp"

namespace gtsad {

// Single source of truth for parameter order and checkpoint names.
#define GTSAD_PARAMS(X)        \
    X(chebCoeff, "cheb_coeff") \
    X(zW1, "z_w1")             \
    X(zB1, "z_b1")             \
    X(zW2, "z_w2")             \
    X(zB2, "z_b2")             \
    X(extW1, "ext_w1")         \
    X(extB1, "ext_b1")         \
    X(extW2, "ext_w2")         \
    X(extB2, "ext_b2")         \
    X(priorW1, "prior_w1")     \
    X(priorB1, "prior_b1")     \
    X(priorWm, "prior_mean_w") \
    X(priorBm, "prior_mean_b") \
    X(priorWs, "prior_std_w")  \
    X(priorBs, "prior_std_b")  \
    X(encW1, "enc_w1")         \
    X(encB1, "enc_b1")         \
    X(encWm, "enc_mean_w")     \
    X(encBm, "enc_mean_b")     \
    X(encWs, "enc_std_w")      \
    X(encBs, "enc_std_b")      \
    X(decW1, "dec_w1")         \
    X(decB1, "dec_b1")         \
    X(decWm, "dec_mean_w")     \
    X(decBm, "dec_mean_b")     \
    X(decWs, "dec_std_w")      \
    X(decBs, "dec_std_b")      \
    X(lstmWi, "lstm_in_w")     \
    X(lstmBi, "lstm_in_b")     \
    X(lstmWf, "lstm_forget_w") \
    X(lstmBf, "lstm_forget_b") \
    X(lstmWo, "lstm_out_w")    \
    X(lstmBo, "lstm_out_b")    \
    X(lstmWc, "lstm_cell_w")   \
    X(lstmBc, "lstm_cell_b")

void ModelConfig::validate() const {
    if (nodeCount < 1 || channels < 1 || chebyshevOrder < 1 || graphFeatures < 1 || latentDim < 1 ||
        hiddenDim < 1 || externalDim < 1) {
        throw std::invalid_argument("model config has a nonpositive dimension");
    }
    if (!(stddevFloor > 0.0)) {
        throw std::invalid_argument("stddev floor must be positive, got " + std::to_string(stddevFloor));
    }
}

void ModelParams::forEach(const std::function<void(const char*, Tensor&)>& fn) {
#define GTSAD_APPLY(field, name) fn(name, field);
    GTSAD_PARAMS(GTSAD_APPLY)
#undef GTSAD_APPLY
}

void ModelParams::forEach(const std::function<void(const char*, const Tensor&)>& fn) const {
#define GTSAD_APPLY(field, name) fn(name, field);
    GTSAD_PARAMS(GTSAD_APPLY)
#undef GTSAD_APPLY
}

std::vector<Tensor*> ModelParams::tensors() {
    std::vector<Tensor*> out;
#define GTSAD_APPLY(field, name) out.push_back(&field);
    GTSAD_PARAMS(GTSAD_APPLY)
#undef GTSAD_APPLY
    return out;
}

std::vector<const Tensor*> ModelParams::tensors() const {
    std::vector<const Tensor*> out;
#define GTSAD_APPLY(field, name) out.push_back(&field);
    GTSAD_PARAMS(GTSAD_APPLY)
#undef GTSAD_APPLY
    return out;
}

bool ModelParams::allFinite() const {
    bool ok = true;
    forEach([&](const char*, const Tensor& t) { ok = ok && t.allFinite(); });
    return ok;
}

ModelParams shapedParams(const ModelConfig& config) {
    config.validate();
    int dh = config.hiddenDim;
    int dz = config.latentDim;
    int de = config.externalDim;
    int nf = config.flatFeatureDim();
    int nc = config.flatInputDim();

    ModelParams p;
    p.chebCoeff = Tensor::zeros({config.chebyshevOrder, config.channels, config.graphFeatures});
    p.zW1 = Tensor::zeros({dh, dz});
    p.zB1 = Tensor::zeros({dh});
    p.zW2 = Tensor::zeros({dh, dh});
    p.zB2 = Tensor::zeros({dh});
    p.extW1 = Tensor::zeros({dh, de});
    p.extB1 = Tensor::zeros({dh});
    p.extW2 = Tensor::zeros({dz, dh});
    p.extB2 = Tensor::zeros({dz});
    p.priorW1 = Tensor::zeros({dh, dh});
    p.priorB1 = Tensor::zeros({dh});
    p.priorWm = Tensor::zeros({dz, dh});
    p.priorBm = Tensor::zeros({dz});
    p.priorWs = Tensor::zeros({dz, dh});
    p.priorBs = Tensor::zeros({dz});
    p.encW1 = Tensor::zeros({dh, nf + dh});
    p.encB1 = Tensor::zeros({dh});
    p.encWm = Tensor::zeros({dz, dh});
    p.encBm = Tensor::zeros({dz});
    p.encWs = Tensor::zeros({dz, dh});
    p.encBs = Tensor::zeros({dz});
    p.decW1 = Tensor::zeros({dh, dh + dh});
    p.decB1 = Tensor::zeros({dh});
    p.decWm = Tensor::zeros({nc, dh});
    p.decBm = Tensor::zeros({nc});
    p.decWs = Tensor::zeros({nc, dh});
    p.decBs = Tensor::zeros({nc});
    int lstmIn = nf + dh + dh;
    p.lstmWi = Tensor::zeros({dh, lstmIn});
    p.lstmBi = Tensor::zeros({dh});
    p.lstmWf = Tensor::zeros({dh, lstmIn});
    p.lstmBf = Tensor::zeros({dh});
    p.lstmWo = Tensor::zeros({dh, lstmIn});
    p.lstmBo = Tensor::zeros({dh});
    p.lstmWc = Tensor::zeros({dh, lstmIn});
    p.lstmBc = Tensor::zeros({dh});
    return p;
}

ModelParams initParams(const ModelConfig& config, uint64_t seed) {
    ModelParams p = shapedParams(config);
    Rng rng(seed);
    p.forEach([&](const char*, Tensor& t) {
        if (t.rank() == 3) { // filter coefficients (K, C, F), damped by 1/K
            double bound = std::sqrt(6.0 / (t.dim(1) + t.dim(2)));
            double damp = 1.0 / t.dim(0);
            for (int i = 0; i < t.size(); ++i) t[static_cast<size_t>(i)] = damp * rng.uniform(-bound, bound);
        } else if (t.rank() == 2) {
            double bound = std::sqrt(6.0 / (t.dim(1) + t.dim(0)));
            for (int i = 0; i < t.size(); ++i) t[static_cast<size_t>(i)] = rng.uniform(-bound, bound);
        }
        // biases stay zero
    });
    p.lstmBf = Tensor::full({config.hiddenDim}, 1.0);
    return p;
}

std::vector<Val> ParamVals::list() const {
    std::vector<Val> out;
#define GTSAD_APPLY(field, name) out.push_back(field);
    GTSAD_PARAMS(GTSAD_APPLY)
#undef GTSAD_APPLY
    return out;
}

namespace {

Val affine(Tape& tape, Val w, Val b, Val x) { return tape.add(tape.matmul(w, x), b); }

void checkVector(const Tape& tape, Val v, int dim, const char* what) {
    const Tensor& t = tape.value(v);
    if (t.rank() != 1 || t.dim(0) != dim) {
        throw std::invalid_argument(std::string(what) + " must have shape (" + std::to_string(dim) +
                                    "), got " + t.shapeString());
    }
}

} // namespace

Vrnn::Vrnn(ModelConfig config, const ScaledLaplacian* laplacian)
    : config_(config), laplacian_(laplacian) {
    config_.validate();
    if (laplacian_ == nullptr) throw std::invalid_argument("model needs a graph Laplacian");
    if (laplacian_->nodeCount() != config_.nodeCount) {
        throw std::invalid_argument("Laplacian is over " + std::to_string(laplacian_->nodeCount()) +
                                    " nodes but config says " + std::to_string(config_.nodeCount));
    }
}

ParamVals Vrnn::trackParams(Tape& tape, const ModelParams& params, bool trainable) const {
    ParamVals v;
#define GTSAD_APPLY(field, name) \
    v.field = trainable ? tape.inputRef(&params.field) : tape.constantRef(&params.field);
    GTSAD_PARAMS(GTSAD_APPLY)
#undef GTSAD_APPLY
    return v;
}

StateVal Vrnn::initialState(Tape& tape) const {
    return {tape.constant(Tensor::zeros({config_.hiddenDim})),
            tape.constant(Tensor::zeros({config_.hiddenDim}))};
}

Val Vrnn::extractX(Tape& tape, const ParamVals& p, Val xt) const {
    const Tensor& x = tape.value(xt);
    if (x.rank() != 2 || x.dim(0) != config_.nodeCount || x.dim(1) != config_.channels) {
        throw std::invalid_argument("signal must have shape (" + std::to_string(config_.nodeCount) +
                                    ", " + std::to_string(config_.channels) + "), got " +
                                    x.shapeString());
    }
    Val filtered = chebyshevApply(tape, p.chebCoeff, *laplacian_, xt);
    return tape.reshape(filtered, {config_.flatFeatureDim()});
}

Val Vrnn::extractZ(Tape& tape, const ParamVals& p, Val zt) const {
    checkVector(tape, zt, config_.latentDim, "latent vector");
    Val hidden = tape.tanh(affine(tape, p.zW1, p.zB1, zt));
    return affine(tape, p.zW2, p.zB2, hidden);
}

Val Vrnn::extractExt(Tape& tape, const ParamVals& p, Val et) const {
    checkVector(tape, et, config_.externalDim, "external features");
    Val hidden = tape.tanh(affine(tape, p.extW1, p.extB1, et));
    return affine(tape, p.extW2, p.extB2, hidden);
}

namespace {

GaussianVal gaussianHead(Tape& tape, Val hidden, Val wm, Val bm, Val ws, Val bs, int dim,
                         double floor) {
    Val mean = affine(tape, wm, bm, hidden);
    Val raw = affine(tape, ws, bs, hidden);
    Val stddev = tape.add(tape.softplus(raw), tape.constant(Tensor::full({dim}, floor)));
    return {mean, stddev};
}

} // namespace

GaussianVal Vrnn::priorStep(Tape& tape, const ParamVals& p, const StateVal& state) const {
    Val hidden = tape.tanh(affine(tape, p.priorW1, p.priorB1, state.h));
    return gaussianHead(tape, hidden, p.priorWm, p.priorBm, p.priorWs, p.priorBs, config_.latentDim,
                        config_.stddevFloor);
}

GaussianVal Vrnn::encodeFromFeatures(Tape& tape, const ParamVals& p, Val xFeat, Val et,
                                     const StateVal& state) const {
    Val input = tape.concat({xFeat, state.h});
    Val hidden = tape.tanh(affine(tape, p.encW1, p.encB1, input));
    GaussianVal enc = gaussianHead(tape, hidden, p.encWm, p.encBm, p.encWs, p.encBs,
                                   config_.latentDim, config_.stddevFloor);
    // external conditions shift only the mean; the variance never sees them
    Val shift = extractExt(tape, p, et);
    return {tape.add(enc.mean, shift), enc.stddev};
}

GaussianVal Vrnn::decodeFromFeatures(Tape& tape, const ParamVals& p, Val zFeat,
                                     const StateVal& state) const {
    Val input = tape.concat({zFeat, state.h});
    Val hidden = tape.tanh(affine(tape, p.decW1, p.decB1, input));
    return gaussianHead(tape, hidden, p.decWm, p.decBm, p.decWs, p.decBs, config_.flatInputDim(),
                        config_.stddevFloor);
}

StateVal Vrnn::recurrenceFromFeatures(Tape& tape, const ParamVals& p, Val xFeat, Val zFeat,
                                      const StateVal& state) const {
    Val input = tape.concat({xFeat, zFeat, state.h});
    Val gateIn = tape.sigmoid(affine(tape, p.lstmWi, p.lstmBi, input));
    Val gateForget = tape.sigmoid(affine(tape, p.lstmWf, p.lstmBf, input));
    Val gateOut = tape.sigmoid(affine(tape, p.lstmWo, p.lstmBo, input));
    Val candidate = tape.tanh(affine(tape, p.lstmWc, p.lstmBc, input));
    Val cell = tape.add(tape.mul(gateForget, state.c), tape.mul(gateIn, candidate));
    Val hidden = tape.mul(gateOut, tape.tanh(cell));
    return {hidden, cell};
}

std::pair<Val, StateVal> Vrnn::stepElbo(Tape& tape, const ParamVals& p, Val xt, Val et,
                                        const StateVal& state, Val noise) const {
    checkVector(tape, noise, config_.latentDim, "noise");
    Val xFeat = extractX(tape, p, xt);
    GaussianVal posterior = encodeFromFeatures(tape, p, xFeat, et, state);
    GaussianVal prior = priorStep(tape, p, state);
    Val z = reparameterize(tape, posterior, noise);
    Val zFeat = extractZ(tape, p, z);
    GaussianVal dec = decodeFromFeatures(tape, p, zFeat, state);
    Val xFlat = tape.reshape(xt, {config_.flatInputDim()});
    Val recon = gaussianLogDensity(tape, xFlat, dec.mean, dec.stddev);
    Val kl = klDiagGaussians(tape, posterior, prior);
    Val elbo = tape.sub(recon, kl);
    StateVal next = recurrenceFromFeatures(tape, p, xFeat, zFeat, state);
    return {elbo, next};
}

Val Vrnn::sequenceElbo(Tape& tape, const ParamVals& p, const GraphSeries& x,
                       const ExternalSeries& e, uint64_t seed) const {
    if (x.steps < 1) throw std::invalid_argument("sequence is empty");
    if (x.steps != e.size()) {
        throw std::invalid_argument("series has " + std::to_string(x.steps) + " steps but " +
                                    std::to_string(e.size()) + " external records");
    }
    if (x.nodes != config_.nodeCount || x.channels != config_.channels) {
        throw std::invalid_argument("series shape does not match model config");
    }
    Rng rng(seed);
    StateVal state = initialState(tape);
    Val total{};
    for (int t = 0; t < x.steps; ++t) {
        Val xt = tape.constant(x.stepSignal(t));
        Val et = tape.constant(e.records[static_cast<size_t>(t)].encode());
        Tensor noise = Tensor::zeros({config_.latentDim});
        for (int i = 0; i < config_.latentDim; ++i) noise[static_cast<size_t>(i)] = rng.normal();
        auto [elbo, next] = stepElbo(tape, p, xt, et, state, tape.constant(std::move(noise)));
        total = t == 0 ? elbo : tape.add(total, elbo);
        state = next;
    }
    return total;
}

Tensor Vrnn::extractX(const ModelParams& params, const Tensor& xt) const {
    Tape tape;
    ParamVals p = trackParams(tape, params, false);
    return tape.value(extractX(tape, p, tape.constantRef(&xt)));
}

Tensor Vrnn::extractZ(const ModelParams& params, const Tensor& zt) const {
    Tape tape;
    ParamVals p = trackParams(tape, params, false);
    return tape.value(extractZ(tape, p, tape.constantRef(&zt)));
}

Tensor Vrnn::extractExt(const ModelParams& params, const ExternalRecord& e) const {
    Tape tape;
    ParamVals p = trackParams(tape, params, false);
    return tape.value(extractExt(tape, p, tape.constant(e.encode())));
}

namespace {

StateVal liftState(Tape& tape, const RnnState& state, int dim) {
    if (state.h.rank() != 1 || state.h.dim(0) != dim || !state.h.sameShape(state.c)) {
        throw std::invalid_argument("recurrent state must hold two vectors of dimension " +
                                    std::to_string(dim));
    }
    return {tape.constantRef(&state.h), tape.constantRef(&state.c)};
}

} // namespace

GaussianParams Vrnn::priorStep(const ModelParams& params, const RnnState& state) const {
    Tape tape;
    ParamVals p = trackParams(tape, params, false);
    GaussianVal g = priorStep(tape, p, liftState(tape, state, config_.hiddenDim));
    return {tape.value(g.mean), tape.value(g.stddev)};
}

GaussianParams Vrnn::encodeStep(const ModelParams& params, const Tensor& xt, const ExternalRecord& e,
                                const RnnState& state) const {
    Tape tape;
    ParamVals p = trackParams(tape, params, false);
    StateVal s = liftState(tape, state, config_.hiddenDim);
    Val xFeat = extractX(tape, p, tape.constantRef(&xt));
    GaussianVal g = encodeFromFeatures(tape, p, xFeat, tape.constant(e.encode()), s);
    return {tape.value(g.mean), tape.value(g.stddev)};
}

GaussianParams Vrnn::decodeStep(const ModelParams& params, const Tensor& zt, const RnnState& state) const {
    Tape tape;
    ParamVals p = trackParams(tape, params, false);
    StateVal s = liftState(tape, state, config_.hiddenDim);
    Val zFeat = extractZ(tape, p, tape.constantRef(&zt));
    GaussianVal g = decodeFromFeatures(tape, p, zFeat, s);
    return {tape.value(g.mean), tape.value(g.stddev)};
}

RnnState Vrnn::recurrenceStep(const ModelParams& params, const Tensor& xt, const Tensor& zt,
                              const RnnState& state) const {
    Tape tape;
    ParamVals p = trackParams(tape, params, false);
    StateVal s = liftState(tape, state, config_.hiddenDim);
    Val xFeat = extractX(tape, p, tape.constantRef(&xt));
    Val zFeat = extractZ(tape, p, tape.constantRef(&zt));
    StateVal next = recurrenceFromFeatures(tape, p, xFeat, zFeat, s);
    return {tape.value(next.h), tape.value(next.c)};
}

std::pair<double, RnnState> Vrnn::stepElbo(const ModelParams& params, const Tensor& xt,
                                           const ExternalRecord& e, const RnnState& state,
                                           const Tensor& noise) const {
    Tape tape;
    ParamVals p = trackParams(tape, params, false);
    StateVal s = liftState(tape, state, config_.hiddenDim);
    auto [elbo, next] = stepElbo(tape, p, tape.constantRef(&xt), tape.constant(e.encode()), s,
                                 tape.constantRef(&noise));
    return {tape.value(elbo).asScalar(), {tape.value(next.h), tape.value(next.c)}};
}

double Vrnn::sequenceElbo(const ModelParams& params, const GraphSeries& x, const ExternalSeries& e,
                          uint64_t seed) const {
    Tape tape;
    ParamVals p = trackParams(tape, params, false);
    return tape.value(sequenceElbo(tape, p, x, e, seed)).asScalar();
}

GraphSeries Vrnn::generate(const ModelParams& params, int steps, uint64_t seed) const {
    if (steps < 1) throw std::invalid_argument("generate needs at least one step");
    Rng rng(seed);
    GraphSeries out = GraphSeries::zeros(steps, config_.channels, config_.nodeCount);
    RnnState state = zeroState();
    int nc = config_.flatInputDim();
    for (int t = 0; t < steps; ++t) {
        GaussianParams prior = priorStep(params, state);
        Tensor z = Tensor::zeros({config_.latentDim});
        for (int i = 0; i < config_.latentDim; ++i) {
            z[static_cast<size_t>(i)] = prior.mean[static_cast<size_t>(i)] +
                                        prior.stddev[static_cast<size_t>(i)] * rng.normal();
        }
        GaussianParams dec = decodeStep(params, z, state);
        std::vector<double> flat(static_cast<size_t>(nc));
        for (int i = 0; i < nc; ++i) {
            flat[static_cast<size_t>(i)] = dec.mean[static_cast<size_t>(i)] +
                                           dec.stddev[static_cast<size_t>(i)] * rng.normal();
        }
        Tensor xt = Tensor::of({config_.nodeCount, config_.channels}, std::move(flat));
        out.setStepSignal(t, xt);
        state = recurrenceStep(params, xt, z, state);
    }
    return out;
}

RnnState Vrnn::zeroState() const {
    return {Tensor::zeros({config_.hiddenDim}), Tensor::zeros({config_.hiddenDim})};
}

#undef GTSAD_PARAMS

} // namespace gtsad
