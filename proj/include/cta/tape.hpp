#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "cta/array.hpp"

namespace cta::ad {

// Named trainable tensor. Lives outside any tape; forward passes reference it
// through Tape::use(). `index` is assigned by the owning ParamStore.
struct Param {
    std::string name;
    Array value;
    int index = -1;
};

class Tape;

// Handle to a node on a tape. Cheap to copy; invalidated when the tape is
// cleared by backward().
struct Var {
    Tape* tape = nullptr;
    int id = -1;
    bool valid() const { return tape != nullptr && id >= 0; }
};

using GradMap = std::unordered_map<const Param*, Array>;

// Append-only record of one forward computation. Node order is a topological
// order, so backward() is a single reverse sweep. Fixed primitive set:
// matmul, add, sub, mul, smul, tanh, sigmoid, silu, elu, exp, square, abs,
// sqrt, sum, mean, concat, slice, reshape. Elementwise binary ops accept equal
// shapes or a numel-1 operand broadcast against the other.
class Tape {
public:
    enum class Op : std::uint8_t {
        Leaf, ParamLeaf, MatMul, Add, Sub, Mul, SMul, Tanh, Sigmoid, SiLU, ELU,
        Exp, Square, Abs, Sqrt, Sum, Mean, Concat, Slice, Reshape
    };

    struct Node {
        Op op;
        int a = -1, b = -1;    // parent node ids
        Array val;             // forward value
        double c = 0.0;        // scalar payload (smul factor, slice start)
        bool needs_grad = false;
        const Param* param = nullptr;  // ParamLeaf only
    };

    Var leaf(Array v);
    Var leaf(double v) { return leaf(Array::scalar(v)); }
    // Registers `p` as a differentiable leaf; repeated use() of the same
    // parameter on one tape returns the same node so adjoints accumulate.
    Var use(Param& p);

    const Array& val(Var x) const { return nodes_[x.id].val; }
    std::size_t size() const { return nodes_.size(); }

    // Reverse sweep from a scalar loss. Returns the adjoint of every parameter
    // referenced by the graph, then clears the tape (all Vars die).
    GradMap backward(Var loss);

    void clear();

    // --- graph construction (used by the free functions below) ---
    Var record(Op op, int a, int b, Array val, double c = 0.0);

    const Node& node(int id) const { return nodes_[id]; }

private:
    std::vector<Node> nodes_;
    std::unordered_map<const Param*, int> param_nodes_;
};

// --- primitives ---
Var matmul(Var a, Var b);          // {r,k}x{k,c}->{r,c} or {r,k}x{k}->{r}
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);             // elementwise
Var smul(Var a, double c);         // scale by constant
Var tanh(Var a);
Var sigmoid(Var a);
Var silu(Var a);                   // x * sigmoid(x)
Var elu(Var a);                    // x>0 ? x : exp(x)-1
Var exp(Var a);
Var square(Var a);
Var abs(Var a);
Var sqrt(Var a);
Var sum(Var a);                    // -> scalar
Var mean(Var a);                   // -> scalar
Var concat(Var a, Var b);          // rank-1 along axis 0
Var slice(Var a, std::size_t start, std::size_t len);  // rank-1 contiguous
Var reshape(Var a, Shape s);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(Var a, double c) { return smul(a, c); }
inline Var operator*(double c, Var a) { return smul(a, c); }

}  // namespace cta::ad
