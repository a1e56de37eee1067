#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gtsad/tensor.hpp"

namespace gtsad {

/// Square sparse matrix in coordinate form. Only what the graph filter needs:
/// a fixed operator applied to (n) or (n,C) signals in O(#entries * C).
struct SparseMatrix {
    int n = 0;
    std::vector<int> rows;
    std::vector<int> cols;
    std::vector<double> weights;

    void add(int r, int c, double w) {
        rows.push_back(r);
        cols.push_back(c);
        weights.push_back(w);
    }
    size_t entryCount() const { return weights.size(); }

    Tensor apply(const Tensor& x) const;           // y = M x
    Tensor applyTransposed(const Tensor& x) const; // y = M^T x
};

/// Handle to a node on a Tape.
struct Val {
    int32_t idx = -1;
    bool valid() const { return idx >= 0; }
};

/// Append-only record of primitive operations with enough information to
/// replay adjoints in exact reverse order. Single-threaded; distinct tapes
/// may run concurrently on disjoint data.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaves. The *Ref variants alias caller-owned tensors which must outlive
    // any use of the tape; they avoid copying large parameter blocks.
    Val input(Tensor v);                 // tracked: participates in gradients
    Val constant(Tensor v);              // untracked
    Val inputRef(const Tensor* v);
    Val constantRef(const Tensor* v);

    // Primitives. Shapes are validated on entry; mismatches throw
    // std::invalid_argument naming both shapes.
    Val add(Val a, Val b);
    Val sub(Val a, Val b);
    Val mul(Val a, Val b); // elementwise
    Val div(Val a, Val b); // elementwise; zero denominator -> std::domain_error
    Val matmul(Val a, Val b);
    Val scale(Val a, double c);
    Val tanh(Val a);
    Val sigmoid(Val a);
    Val softplus(Val a);
    Val exp(Val a);
    Val log(Val a); // nonpositive input -> std::domain_error
    Val sum(Val a); // -> scalar
    Val concat(std::span<const Val> parts); // rank-1 operands
    Val concat(std::initializer_list<Val> parts);
    Val slice(Val a, int offset, int length); // on flattened storage, -> rank-1
    Val reshape(Val a, std::vector<int> shape);
    Val sparseMatmul(const SparseMatrix* m, Val x); // x: (n) or (n,C); m outlives the tape

    const Tensor& value(Val v) const;
    bool tracked(Val v) const;

    /// Replays adjoints in reverse order from a scalar output. Adjoints from
    /// any previous backward call are discarded first, so repeated calls give
    /// bitwise-identical results.
    void backward(Val output);

    /// Adjoint of a tracked node after backward(). Untracked nodes throw.
    const Tensor& grad(Val v);

    size_t size() const { return nodes_.size(); }
    void clear();

private:
    enum class Op : uint8_t {
        Leaf,
        Add,
        Sub,
        Mul,
        Div,
        Matmul,
        Scale,
        Tanh,
        Sigmoid,
        Softplus,
        Exp,
        Log,
        Sum,
        Concat,
        Slice,
        Reshape,
        SparseMatmul,
    };

    struct Node {
        Op op = Op::Leaf;
        bool track = false;
        int32_t a = -1;
        int32_t b = -1;
        double c = 0.0;                 // scale factor
        int32_t i0 = 0;                 // slice offset
        std::vector<int32_t> many;      // concat inputs
        const SparseMatrix* sp = nullptr;
        Tensor value;                   // owned value (unused when ref != nullptr)
        const Tensor* ref = nullptr;    // aliased leaf value
    };

    const Tensor& val(int32_t i) const {
        const Node& n = nodes_[static_cast<size_t>(i)];
        return n.ref ? *n.ref : n.value;
    }
    const Node& node(Val v) const;
    int32_t push(Node n);
    bool trackOf(Val v) const { return nodes_[static_cast<size_t>(v.idx)].track; }
    Tensor& adj(int32_t i);
    void accumulate(int32_t i, const Tensor& t);

    std::vector<Node> nodes_;
    std::vector<Tensor> adjoints_;
    bool hasGrads_ = false;
};

} // namespace gtsad
