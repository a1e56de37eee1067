#include "gtsad/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gtsad {

namespace {

double stableSigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

double stableSoftplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

[[noreturn]] void shapeError(const char* op, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shapeString() + " vs " +
                                b.shapeString());
}

} // namespace

Tensor SparseMatrix::apply(const Tensor& x) const {
    const int c = x.rank() == 2 ? x.dim(1) : 1;
    if ((x.rank() != 1 && x.rank() != 2) || x.dim(0) != n) {
        throw std::invalid_argument("sparse apply: signal " + x.shapeString() + " does not match n=" +
                                    std::to_string(n));
    }
    Tensor y = Tensor::zeros(x.shape());
    const double* xv = x.data();
    double* yv = y.data();
    for (size_t e = 0; e < weights.size(); ++e) {
        const double w = weights[e];
        const double* src = xv + static_cast<size_t>(cols[e]) * c;
        double* dst = yv + static_cast<size_t>(rows[e]) * c;
        for (int j = 0; j < c; ++j) dst[j] += w * src[j];
    }
    return y;
}

Tensor SparseMatrix::applyTransposed(const Tensor& x) const {
    const int c = x.rank() == 2 ? x.dim(1) : 1;
    if ((x.rank() != 1 && x.rank() != 2) || x.dim(0) != n) {
        throw std::invalid_argument("sparse applyTransposed: signal " + x.shapeString() +
                                    " does not match n=" + std::to_string(n));
    }
    Tensor y = Tensor::zeros(x.shape());
    const double* xv = x.data();
    double* yv = y.data();
    for (size_t e = 0; e < weights.size(); ++e) {
        const double w = weights[e];
        const double* src = xv + static_cast<size_t>(rows[e]) * c;
        double* dst = yv + static_cast<size_t>(cols[e]) * c;
        for (int j = 0; j < c; ++j) dst[j] += w * src[j];
    }
    return y;
}

const Tape::Node& Tape::node(Val v) const {
    if (!v.valid() || static_cast<size_t>(v.idx) >= nodes_.size()) {
        throw std::invalid_argument("tape: invalid value handle");
    }
    return nodes_[static_cast<size_t>(v.idx)];
}

int32_t Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int32_t>(nodes_.size() - 1);
}

Val Tape::input(Tensor v) {
    Node n;
    n.op = Op::Leaf;
    n.track = true;
    n.value = std::move(v);
    return {push(std::move(n))};
}

Val Tape::constant(Tensor v) {
    Node n;
    n.op = Op::Leaf;
    n.track = false;
    n.value = std::move(v);
    return {push(std::move(n))};
}

Val Tape::inputRef(const Tensor* v) {
    Node n;
    n.op = Op::Leaf;
    n.track = true;
    n.ref = v;
    return {push(std::move(n))};
}

Val Tape::constantRef(const Tensor* v) {
    Node n;
    n.op = Op::Leaf;
    n.track = false;
    n.ref = v;
    return {push(std::move(n))};
}

const Tensor& Tape::value(Val v) const {
    const Node& n = node(v);
    return n.ref ? *n.ref : n.value;
}

bool Tape::tracked(Val v) const { return node(v).track; }

Val Tape::add(Val a, Val b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.sameShape(tb)) shapeError("add", ta, tb);
    Node n;
    n.op = Op::Add;
    n.a = a.idx;
    n.b = b.idx;
    n.track = trackOf(a) || trackOf(b);
    n.value = Tensor::zeros(ta.shape());
    for (int i = 0; i < ta.size(); ++i) n.value[i] = ta[i] + tb[i];
    return {push(std::move(n))};
}

Val Tape::sub(Val a, Val b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.sameShape(tb)) shapeError("sub", ta, tb);
    Node n;
    n.op = Op::Sub;
    n.a = a.idx;
    n.b = b.idx;
    n.track = trackOf(a) || trackOf(b);
    n.value = Tensor::zeros(ta.shape());
    for (int i = 0; i < ta.size(); ++i) n.value[i] = ta[i] - tb[i];
    return {push(std::move(n))};
}

Val Tape::mul(Val a, Val b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.sameShape(tb)) shapeError("mul", ta, tb);
    Node n;
    n.op = Op::Mul;
    n.a = a.idx;
    n.b = b.idx;
    n.track = trackOf(a) || trackOf(b);
    n.value = Tensor::zeros(ta.shape());
    for (int i = 0; i < ta.size(); ++i) n.value[i] = ta[i] * tb[i];
    return {push(std::move(n))};
}

Val Tape::div(Val a, Val b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.sameShape(tb)) shapeError("div", ta, tb);
    for (int i = 0; i < tb.size(); ++i) {
        if (tb[i] == 0.0) throw std::domain_error("div: zero denominator at index " + std::to_string(i));
    }
    Node n;
    n.op = Op::Div;
    n.a = a.idx;
    n.b = b.idx;
    n.track = trackOf(a) || trackOf(b);
    n.value = Tensor::zeros(ta.shape());
    for (int i = 0; i < ta.size(); ++i) n.value[i] = ta[i] / tb[i];
    return {push(std::move(n))};
}

Val Tape::matmul(Val a, Val b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.rank() != 2 || (tb.rank() != 1 && tb.rank() != 2) || ta.dim(1) != tb.dim(0)) {
        shapeError("matmul", ta, tb);
    }
    const int m = ta.dim(0);
    const int k = ta.dim(1);
    const int nn = tb.rank() == 2 ? tb.dim(1) : 1;
    Node n;
    n.op = Op::Matmul;
    n.a = a.idx;
    n.b = b.idx;
    n.track = trackOf(a) || trackOf(b);
    n.value = tb.rank() == 2 ? Tensor::zeros({m, nn}) : Tensor::zeros({m});
    const double* av = ta.data();
    const double* bv = tb.data();
    double* yv = n.value.data();
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double aip = av[static_cast<size_t>(i) * k + p];
            if (aip == 0.0) continue;
            const double* brow = bv + static_cast<size_t>(p) * nn;
            double* yrow = yv + static_cast<size_t>(i) * nn;
            for (int j = 0; j < nn; ++j) yrow[j] += aip * brow[j];
        }
    }
    return {push(std::move(n))};
}

Val Tape::scale(Val a, double c) {
    const Tensor& ta = value(a);
    Node n;
    n.op = Op::Scale;
    n.a = a.idx;
    n.c = c;
    n.track = trackOf(a);
    n.value = Tensor::zeros(ta.shape());
    for (int i = 0; i < ta.size(); ++i) n.value[i] = c * ta[i];
    return {push(std::move(n))};
}

Val Tape::tanh(Val a) {
    const Tensor& ta = value(a);
    Node n;
    n.op = Op::Tanh;
    n.a = a.idx;
    n.track = trackOf(a);
    n.value = Tensor::zeros(ta.shape());
    for (int i = 0; i < ta.size(); ++i) n.value[i] = std::tanh(ta[i]);
    return {push(std::move(n))};
}

Val Tape::sigmoid(Val a) {
    const Tensor& ta = value(a);
    Node n;
    n.op = Op::Sigmoid;
    n.a = a.idx;
    n.track = trackOf(a);
    n.value = Tensor::zeros(ta.shape());
    for (int i = 0; i < ta.size(); ++i) n.value[i] = stableSigmoid(ta[i]);
    return {push(std::move(n))};
}

Val Tape::softplus(Val a) {
    const Tensor& ta = value(a);
    Node n;
    n.op = Op::Softplus;
    n.a = a.idx;
    n.track = trackOf(a);
    n.value = Tensor::zeros(ta.shape());
    for (int i = 0; i < ta.size(); ++i) n.value[i] = stableSoftplus(ta[i]);
    return {push(std::move(n))};
}

Val Tape::exp(Val a) {
    const Tensor& ta = value(a);
    Node n;
    n.op = Op::Exp;
    n.a = a.idx;
    n.track = trackOf(a);
    n.value = Tensor::zeros(ta.shape());
    for (int i = 0; i < ta.size(); ++i) n.value[i] = std::exp(ta[i]);
    return {push(std::move(n))};
}

Val Tape::log(Val a) {
    const Tensor& ta = value(a);
    for (int i = 0; i < ta.size(); ++i) {
        if (ta[i] <= 0.0) {
            throw std::domain_error("log: nonpositive input " + std::to_string(ta[i]) + " at index " +
                                    std::to_string(i));
        }
    }
    Node n;
    n.op = Op::Log;
    n.a = a.idx;
    n.track = trackOf(a);
    n.value = Tensor::zeros(ta.shape());
    for (int i = 0; i < ta.size(); ++i) n.value[i] = std::log(ta[i]);
    return {push(std::move(n))};
}

Val Tape::sum(Val a) {
    const Tensor& ta = value(a);
    Node n;
    n.op = Op::Sum;
    n.a = a.idx;
    n.track = trackOf(a);
    double s = 0.0;
    for (int i = 0; i < ta.size(); ++i) s += ta[i];
    n.value = Tensor::scalar(s);
    return {push(std::move(n))};
}

Val Tape::concat(std::span<const Val> parts) {
    if (parts.empty()) throw std::invalid_argument("concat: no operands");
    int total = 0;
    bool track = false;
    for (Val p : parts) {
        const Tensor& t = value(p);
        if (t.rank() != 1) {
            throw std::invalid_argument("concat: rank-1 operands required, got " + t.shapeString());
        }
        total += t.size();
        track = track || trackOf(p);
    }
    Node n;
    n.op = Op::Concat;
    n.track = track;
    n.value = Tensor::zeros({total});
    int off = 0;
    for (Val p : parts) {
        const Tensor& t = value(p);
        for (int i = 0; i < t.size(); ++i) n.value[off + i] = t[i];
        off += t.size();
        n.many.push_back(p.idx);
    }
    return {push(std::move(n))};
}

Val Tape::concat(std::initializer_list<Val> parts) {
    return concat(std::span<const Val>(parts.begin(), parts.size()));
}

Val Tape::slice(Val a, int offset, int length) {
    const Tensor& ta = value(a);
    if (offset < 0 || length <= 0 || offset + length > ta.size()) {
        throw std::invalid_argument("slice: range [" + std::to_string(offset) + "," +
                                    std::to_string(offset + length) + ") exceeds size " +
                                    std::to_string(ta.size()));
    }
    Node n;
    n.op = Op::Slice;
    n.a = a.idx;
    n.i0 = offset;
    n.track = trackOf(a);
    n.value = Tensor::zeros({length});
    for (int i = 0; i < length; ++i) n.value[i] = ta[offset + i];
    return {push(std::move(n))};
}

Val Tape::reshape(Val a, std::vector<int> shape) {
    const Tensor& ta = value(a);
    Tensor out = Tensor::of(std::move(shape), ta.values());
    Node n;
    n.op = Op::Reshape;
    n.a = a.idx;
    n.track = trackOf(a);
    n.value = std::move(out);
    return {push(std::move(n))};
}

Val Tape::sparseMatmul(const SparseMatrix* m, Val x) {
    const Tensor& tx = value(x);
    Node n;
    n.op = Op::SparseMatmul;
    n.a = x.idx;
    n.sp = m;
    n.track = trackOf(x);
    n.value = m->apply(tx);
    return {push(std::move(n))};
}

Tensor& Tape::adj(int32_t i) {
    Tensor& t = adjoints_[static_cast<size_t>(i)];
    if (t.size() == 0) t = Tensor::zeros(val(i).shape());
    return t;
}

void Tape::accumulate(int32_t i, const Tensor& t) {
    Tensor& a = adj(i);
    for (int k = 0; k < t.size(); ++k) a[k] += t[k];
}

void Tape::backward(Val output) {
    const Tensor& out = value(output);
    if (!out.isScalar()) {
        throw std::invalid_argument("backward: output has shape " + out.shapeString() + ", expected scalar");
    }
    adjoints_.assign(nodes_.size(), Tensor());
    hasGrads_ = true;
    if (!node(output).track) return;
    adj(output.idx)[0] = 1.0;

    for (int32_t i = output.idx; i >= 0; --i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        if (!n.track || n.op == Op::Leaf) continue;
        Tensor& g = adjoints_[static_cast<size_t>(i)];
        if (g.size() == 0) continue; // node did not contribute to the output

        switch (n.op) {
        case Op::Add:
            if (trackOf({n.a})) accumulate(n.a, g);
            if (trackOf({n.b})) accumulate(n.b, g);
            break;
        case Op::Sub:
            if (trackOf({n.a})) accumulate(n.a, g);
            if (trackOf({n.b})) {
                Tensor& tb = adj(n.b);
                for (int k = 0; k < g.size(); ++k) tb[k] -= g[k];
            }
            break;
        case Op::Mul: {
            const Tensor& ta = val(n.a);
            const Tensor& tb = val(n.b);
            if (trackOf({n.a})) {
                Tensor& aa = adj(n.a);
                for (int k = 0; k < g.size(); ++k) aa[k] += g[k] * tb[k];
            }
            if (trackOf({n.b})) {
                Tensor& ab = adj(n.b);
                for (int k = 0; k < g.size(); ++k) ab[k] += g[k] * ta[k];
            }
            break;
        }
        case Op::Div: {
            const Tensor& ta = val(n.a);
            const Tensor& tb = val(n.b);
            if (trackOf({n.a})) {
                Tensor& aa = adj(n.a);
                for (int k = 0; k < g.size(); ++k) aa[k] += g[k] / tb[k];
            }
            if (trackOf({n.b})) {
                Tensor& ab = adj(n.b);
                for (int k = 0; k < g.size(); ++k) ab[k] -= g[k] * ta[k] / (tb[k] * tb[k]);
            }
            break;
        }
        case Op::Matmul: {
            const Tensor& ta = val(n.a);
            const Tensor& tb = val(n.b);
            const int m = ta.dim(0);
            const int k = ta.dim(1);
            const int nn = tb.rank() == 2 ? tb.dim(1) : 1;
            const double* gv = g.data();
            if (trackOf({n.a})) { // dA += G B^T
                Tensor& aa = adj(n.a);
                double* av = aa.data();
                const double* bv = tb.data();
                for (int i2 = 0; i2 < m; ++i2) {
                    const double* grow = gv + static_cast<size_t>(i2) * nn;
                    double* arow = av + static_cast<size_t>(i2) * k;
                    for (int p = 0; p < k; ++p) {
                        const double* brow = bv + static_cast<size_t>(p) * nn;
                        double s = 0.0;
                        for (int j = 0; j < nn; ++j) s += grow[j] * brow[j];
                        arow[p] += s;
                    }
                }
            }
            if (trackOf({n.b})) { // dB += A^T G
                Tensor& ab = adj(n.b);
                double* bv = ab.data();
                const double* av = ta.data();
                for (int i2 = 0; i2 < m; ++i2) {
                    const double* grow = gv + static_cast<size_t>(i2) * nn;
                    const double* arow = av + static_cast<size_t>(i2) * k;
                    for (int p = 0; p < k; ++p) {
                        const double aip = arow[p];
                        if (aip == 0.0) continue;
                        double* brow = bv + static_cast<size_t>(p) * nn;
                        for (int j = 0; j < nn; ++j) brow[j] += aip * grow[j];
                    }
                }
            }
            break;
        }
        case Op::Scale: {
            Tensor& aa = adj(n.a);
            for (int k = 0; k < g.size(); ++k) aa[k] += n.c * g[k];
            break;
        }
        case Op::Tanh: {
            Tensor& aa = adj(n.a);
            for (int k = 0; k < g.size(); ++k) {
                const double y = n.value[k];
                aa[k] += g[k] * (1.0 - y * y);
            }
            break;
        }
        case Op::Sigmoid: {
            Tensor& aa = adj(n.a);
            for (int k = 0; k < g.size(); ++k) {
                const double y = n.value[k];
                aa[k] += g[k] * y * (1.0 - y);
            }
            break;
        }
        case Op::Softplus: {
            const Tensor& ta = val(n.a);
            Tensor& aa = adj(n.a);
            for (int k = 0; k < g.size(); ++k) aa[k] += g[k] * stableSigmoid(ta[k]);
            break;
        }
        case Op::Exp: {
            Tensor& aa = adj(n.a);
            for (int k = 0; k < g.size(); ++k) aa[k] += g[k] * n.value[k];
            break;
        }
        case Op::Log: {
            const Tensor& ta = val(n.a);
            Tensor& aa = adj(n.a);
            for (int k = 0; k < g.size(); ++k) aa[k] += g[k] / ta[k];
            break;
        }
        case Op::Sum: {
            Tensor& aa = adj(n.a);
            const double gv = g[0];
            for (int k = 0; k < aa.size(); ++k) aa[k] += gv;
            break;
        }
        case Op::Concat: {
            int off = 0;
            for (int32_t p : n.many) {
                const int len = val(p).size();
                if (trackOf({p})) {
                    Tensor& ap = adj(p);
                    for (int k = 0; k < len; ++k) ap[k] += g[off + k];
                }
                off += len;
            }
            break;
        }
        case Op::Slice: {
            Tensor& aa = adj(n.a);
            for (int k = 0; k < g.size(); ++k) aa[n.i0 + k] += g[k];
            break;
        }
        case Op::Reshape: {
            Tensor& aa = adj(n.a);
            for (int k = 0; k < g.size(); ++k) aa[k] += g[k];
            break;
        }
        case Op::SparseMatmul: {
            Tensor contrib = n.sp->applyTransposed(g);
            accumulate(n.a, contrib);
            break;
        }
        case Op::Leaf:
            break;
        }
    }
}

const Tensor& Tape::grad(Val v) {
    const Node& n = node(v);
    if (!hasGrads_) throw std::logic_error("grad: backward() has not been run");
    if (!n.track) throw std::invalid_argument("grad: value is not tracked");
    Tensor& g = adjoints_[static_cast<size_t>(v.idx)];
    if (g.size() == 0) {
        // tracked but unreached by the output: gradient is exactly zero
        g = Tensor::zeros(value(v).shape());
    }
    return g;
}

void Tape::clear() {
    nodes_.clear();
    adjoints_.clear();
    hasGrads_ = false;
}

} // namespace gtsad
