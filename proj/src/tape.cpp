#include "cta/tape.hpp"

#include <cmath>

namespace cta::ad {

namespace {

void check_same_tape(Var a, Var b, const char* op) {
    if (a.tape == nullptr || b.tape == nullptr || a.tape != b.tape)
        throw Error(std::string(op) + ": operands live on different tapes");
}

// Elementwise binary operand relation.
enum class Bcast { Same, AScalar, BScalar };

Bcast bcast_kind(const Array& a, const Array& b, const char* op) {
    if (a.shape == b.shape) return Bcast::Same;
    if (a.numel() == 1) return Bcast::AScalar;
    if (b.numel() == 1) return Bcast::BScalar;
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a.shape) + " and " +
                     shape_str(b.shape));
}

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Var Tape::leaf(Array v) { return record(Op::Leaf, -1, -1, std::move(v)); }

Var Tape::use(Param& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Var{this, it->second};
    Var v = record(Op::ParamLeaf, -1, -1, p.value);
    nodes_[v.id].needs_grad = true;
    nodes_[v.id].param = &p;
    param_nodes_.emplace(&p, v.id);
    return v;
}

Var Tape::record(Op op, int a, int b, Array val, double c) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.val = std::move(val);
    n.c = c;
    if (a >= 0 && nodes_[a].needs_grad) n.needs_grad = true;
    if (b >= 0 && nodes_[b].needs_grad) n.needs_grad = true;
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::clear() {
    nodes_.clear();
    param_nodes_.clear();
}

GradMap Tape::backward(Var loss) {
    if (!loss.valid() || loss.tape != this)
        throw Error("backward: loss does not belong to this tape");
    const Node& ln = nodes_[loss.id];
    if (ln.val.numel() != 1)
        throw ShapeError("backward: loss must be scalar, got shape " + shape_str(ln.val.shape));

    // Adjoint per node, allocated lazily; only nodes with a parameter ancestor
    // participate.
    std::vector<Array> adj(nodes_.size());
    std::vector<char> has_adj(nodes_.size(), 0);
    auto seed = [&](int id, Array g) {
        adj[id] = std::move(g);
        has_adj[id] = 1;
    };
    auto accum = [&](int id, const Array& g) {
        if (!nodes_[id].needs_grad) return;
        if (!has_adj[id]) {
            adj[id] = g;
            has_adj[id] = 1;
        } else {
            for (std::size_t i = 0; i < g.numel(); ++i) adj[id].data[i] += g.data[i];
        }
    };
    // Accumulate g into a parent that may be a broadcast scalar.
    auto accum_bcast = [&](int id, const Array& g) {
        if (!nodes_[id].needs_grad) return;
        if (nodes_[id].val.numel() == 1 && g.numel() != 1) {
            double s = 0.0;
            for (double v : g.data) s += v;
            Array gs = Array::scalar(s);
            gs.shape = nodes_[id].val.shape;
            accum(id, gs);
        } else {
            accum(id, g);
        }
    };

    if (ln.needs_grad) {
        Array g = Array(ln.val.shape, 1.0);
        seed(loss.id, std::move(g));
    }

    for (int i = loss.id; i >= 0; --i) {
        if (!has_adj[i] || !nodes_[i].needs_grad) continue;
        const Node& n = nodes_[i];
        const Array& g = adj[i];
        switch (n.op) {
            case Op::Leaf:
            case Op::ParamLeaf:
                break;
            case Op::MatMul: {
                const Array& A = nodes_[n.a].val;
                const Array& B = nodes_[n.b].val;
                std::size_t r = A.rows(), k = A.cols(), c = B.cols();
                if (nodes_[n.a].needs_grad) {
                    Array ga(A.shape, 0.0);
                    for (std::size_t i1 = 0; i1 < r; ++i1)
                        for (std::size_t j = 0; j < c; ++j) {
                            double gij = g.data[i1 * c + j];
                            for (std::size_t l = 0; l < k; ++l)
                                ga.data[i1 * k + l] += gij * B.data[l * c + j];
                        }
                    accum(n.a, ga);
                }
                if (nodes_[n.b].needs_grad) {
                    Array gb(B.shape, 0.0);
                    for (std::size_t l = 0; l < k; ++l)
                        for (std::size_t j = 0; j < c; ++j) {
                            double s = 0.0;
                            for (std::size_t i1 = 0; i1 < r; ++i1)
                                s += A.data[i1 * k + l] * g.data[i1 * c + j];
                            gb.data[l * c + j] += s;
                        }
                    accum(n.b, gb);
                }
                break;
            }
            case Op::Add:
                accum_bcast(n.a, g);
                accum_bcast(n.b, g);
                break;
            case Op::Sub: {
                accum_bcast(n.a, g);
                if (nodes_[n.b].needs_grad) {
                    Array gn(g.shape, 0.0);
                    for (std::size_t j = 0; j < g.numel(); ++j) gn.data[j] = -g.data[j];
                    accum_bcast(n.b, gn);
                }
                break;
            }
            case Op::Mul: {
                const Array& A = nodes_[n.a].val;
                const Array& B = nodes_[n.b].val;
                if (nodes_[n.a].needs_grad) {
                    Array ga(g.shape, 0.0);
                    for (std::size_t j = 0; j < g.numel(); ++j)
                        ga.data[j] = g.data[j] * (B.numel() == 1 ? B.data[0] : B.data[j]);
                    accum_bcast(n.a, ga);
                }
                if (nodes_[n.b].needs_grad) {
                    Array gb(g.shape, 0.0);
                    for (std::size_t j = 0; j < g.numel(); ++j)
                        gb.data[j] = g.data[j] * (A.numel() == 1 ? A.data[0] : A.data[j]);
                    accum_bcast(n.b, gb);
                }
                break;
            }
            case Op::SMul: {
                Array ga(g.shape, 0.0);
                for (std::size_t j = 0; j < g.numel(); ++j) ga.data[j] = g.data[j] * n.c;
                accum(n.a, ga);
                break;
            }
            case Op::Tanh: {
                Array ga(g.shape, 0.0);
                for (std::size_t j = 0; j < g.numel(); ++j)
                    ga.data[j] = g.data[j] * (1.0 - n.val.data[j] * n.val.data[j]);
                accum(n.a, ga);
                break;
            }
            case Op::Sigmoid: {
                Array ga(g.shape, 0.0);
                for (std::size_t j = 0; j < g.numel(); ++j)
                    ga.data[j] = g.data[j] * n.val.data[j] * (1.0 - n.val.data[j]);
                accum(n.a, ga);
                break;
            }
            case Op::SiLU: {
                const Array& x = nodes_[n.a].val;
                Array ga(g.shape, 0.0);
                for (std::size_t j = 0; j < g.numel(); ++j) {
                    double s = sigm(x.data[j]);
                    ga.data[j] = g.data[j] * s * (1.0 + x.data[j] * (1.0 - s));
                }
                accum(n.a, ga);
                break;
            }
            case Op::ELU: {
                const Array& x = nodes_[n.a].val;
                Array ga(g.shape, 0.0);
                for (std::size_t j = 0; j < g.numel(); ++j)
                    ga.data[j] = g.data[j] * (x.data[j] > 0.0 ? 1.0 : n.val.data[j] + 1.0);
                accum(n.a, ga);
                break;
            }
            case Op::Exp: {
                Array ga(g.shape, 0.0);
                for (std::size_t j = 0; j < g.numel(); ++j) ga.data[j] = g.data[j] * n.val.data[j];
                accum(n.a, ga);
                break;
            }
            case Op::Square: {
                const Array& x = nodes_[n.a].val;
                Array ga(g.shape, 0.0);
                for (std::size_t j = 0; j < g.numel(); ++j)
                    ga.data[j] = g.data[j] * 2.0 * x.data[j];
                accum(n.a, ga);
                break;
            }
            case Op::Abs: {
                const Array& x = nodes_[n.a].val;
                Array ga(g.shape, 0.0);
                for (std::size_t j = 0; j < g.numel(); ++j) {
                    double s = x.data[j] > 0.0 ? 1.0 : (x.data[j] < 0.0 ? -1.0 : 0.0);
                    ga.data[j] = g.data[j] * s;
                }
                accum(n.a, ga);
                break;
            }
            case Op::Sqrt: {
                Array ga(g.shape, 0.0);
                for (std::size_t j = 0; j < g.numel(); ++j)
                    ga.data[j] = g.data[j] * 0.5 / n.val.data[j];
                accum(n.a, ga);
                break;
            }
            case Op::Sum: {
                const Array& x = nodes_[n.a].val;
                Array ga(x.shape, g.data[0]);
                accum(n.a, ga);
                break;
            }
            case Op::Mean: {
                const Array& x = nodes_[n.a].val;
                Array ga(x.shape, g.data[0] / static_cast<double>(x.numel()));
                accum(n.a, ga);
                break;
            }
            case Op::Concat: {
                const Array& A = nodes_[n.a].val;
                const Array& B = nodes_[n.b].val;
                if (nodes_[n.a].needs_grad) {
                    Array ga(A.shape, 0.0);
                    for (std::size_t j = 0; j < A.numel(); ++j) ga.data[j] = g.data[j];
                    accum(n.a, ga);
                }
                if (nodes_[n.b].needs_grad) {
                    Array gb(B.shape, 0.0);
                    for (std::size_t j = 0; j < B.numel(); ++j)
                        gb.data[j] = g.data[A.numel() + j];
                    accum(n.b, gb);
                }
                break;
            }
            case Op::Slice: {
                const Array& x = nodes_[n.a].val;
                Array ga(x.shape, 0.0);
                std::size_t start = static_cast<std::size_t>(n.c);
                for (std::size_t j = 0; j < g.numel(); ++j) ga.data[start + j] = g.data[j];
                accum(n.a, ga);
                break;
            }
            case Op::Reshape: {
                Array ga(nodes_[n.a].val.shape, 0.0);
                ga.data = g.data;
                accum(n.a, ga);
                break;
            }
        }
    }

    GradMap grads;
    for (const auto& [p, id] : param_nodes_) {
        if (has_adj[id]) {
            grads.emplace(p, std::move(adj[id]));
        } else {
            grads.emplace(p, Array(p->value.shape, 0.0));
        }
    }
    clear();
    return grads;
}

// --- forward primitives ---

Var matmul(Var a, Var b) {
    check_same_tape(a, b, "matmul");
    Tape& t = *a.tape;
    const Array& A = t.val(a);
    const Array& B = t.val(b);
    if (A.rank() != 2 || B.rank() < 1 || B.rank() > 2 || A.cols() != B.rows())
        throw ShapeError("matmul: incompatible shapes " + shape_str(A.shape) + " and " +
                         shape_str(B.shape));
    std::size_t r = A.rows(), k = A.cols(), c = B.cols();
    Array out(B.rank() == 1 ? Shape{r} : Shape{r, c}, 0.0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t l = 0; l < k; ++l) {
            double av = A.data[i * k + l];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] += av * B.data[l * c + j];
        }
    return t.record(Tape::Op::MatMul, a.id, b.id, std::move(out));
}

namespace {

template <class F>
Var binary_elemwise(Var a, Var b, Tape::Op op, const char* name, F f) {
    check_same_tape(a, b, name);
    Tape& t = *a.tape;
    const Array& A = t.val(a);
    const Array& B = t.val(b);
    Bcast k = bcast_kind(A, B, name);
    const Array& big = (k == Bcast::AScalar) ? B : A;
    Array out(big.shape, 0.0);
    for (std::size_t j = 0; j < big.numel(); ++j) {
        double av = (k == Bcast::AScalar) ? A.data[0] : A.data[j];
        double bv = (k == Bcast::BScalar) ? B.data[0] : B.data[j];
        out.data[j] = f(av, bv);
    }
    return t.record(op, a.id, b.id, std::move(out));
}

template <class F>
Var unary_elemwise(Var a, Tape::Op op, F f) {
    Tape& t = *a.tape;
    const Array& A = t.val(a);
    Array out(A.shape, 0.0);
    for (std::size_t j = 0; j < A.numel(); ++j) out.data[j] = f(A.data[j]);
    return t.record(op, a.id, -1, std::move(out));
}

}  // namespace

Var add(Var a, Var b) {
    return binary_elemwise(a, b, Tape::Op::Add, "add", [](double x, double y) { return x + y; });
}
Var sub(Var a, Var b) {
    return binary_elemwise(a, b, Tape::Op::Sub, "sub", [](double x, double y) { return x - y; });
}
Var mul(Var a, Var b) {
    return binary_elemwise(a, b, Tape::Op::Mul, "mul", [](double x, double y) { return x * y; });
}

Var smul(Var a, double c) {
    Tape& t = *a.tape;
    const Array& A = t.val(a);
    Array out(A.shape, 0.0);
    for (std::size_t j = 0; j < A.numel(); ++j) out.data[j] = A.data[j] * c;
    return t.record(Tape::Op::SMul, a.id, -1, std::move(out), c);
}

Var tanh(Var a) {
    return unary_elemwise(a, Tape::Op::Tanh, [](double x) { return std::tanh(x); });
}
Var sigmoid(Var a) {
    return unary_elemwise(a, Tape::Op::Sigmoid, [](double x) { return sigm(x); });
}
Var silu(Var a) {
    return unary_elemwise(a, Tape::Op::SiLU, [](double x) { return x * sigm(x); });
}
Var elu(Var a) {
    return unary_elemwise(a, Tape::Op::ELU,
                          [](double x) { return x > 0.0 ? x : std::exp(x) - 1.0; });
}
Var exp(Var a) {
    return unary_elemwise(a, Tape::Op::Exp, [](double x) { return std::exp(x); });
}
Var square(Var a) {
    return unary_elemwise(a, Tape::Op::Square, [](double x) { return x * x; });
}
Var abs(Var a) {
    return unary_elemwise(a, Tape::Op::Abs, [](double x) { return std::abs(x); });
}
Var sqrt(Var a) {
    return unary_elemwise(a, Tape::Op::Sqrt, [](double x) { return std::sqrt(x); });
}

Var sum(Var a) {
    Tape& t = *a.tape;
    const Array& A = t.val(a);
    double s = 0.0;
    for (double v : A.data) s += v;
    return t.record(Tape::Op::Sum, a.id, -1, Array::scalar(s));
}

Var mean(Var a) {
    Tape& t = *a.tape;
    const Array& A = t.val(a);
    if (A.numel() == 0) throw ShapeError("mean: empty operand");
    double s = 0.0;
    for (double v : A.data) s += v;
    return t.record(Tape::Op::Mean, a.id, -1,
                    Array::scalar(s / static_cast<double>(A.numel())));
}

Var concat(Var a, Var b) {
    check_same_tape(a, b, "concat");
    Tape& t = *a.tape;
    const Array& A = t.val(a);
    const Array& B = t.val(b);
    if (A.rank() != 1 || B.rank() != 1)
        throw ShapeError("concat: rank-1 operands required, got " + shape_str(A.shape) + " and " +
                         shape_str(B.shape));
    Array out(Shape{A.numel() + B.numel()}, 0.0);
    for (std::size_t j = 0; j < A.numel(); ++j) out.data[j] = A.data[j];
    for (std::size_t j = 0; j < B.numel(); ++j) out.data[A.numel() + j] = B.data[j];
    return t.record(Tape::Op::Concat, a.id, b.id, std::move(out));
}

Var slice(Var a, std::size_t start, std::size_t len) {
    Tape& t = *a.tape;
    const Array& A = t.val(a);
    if (A.rank() != 1 || start + len > A.numel())
        throw ShapeError("slice: range [" + std::to_string(start) + "," +
                         std::to_string(start + len) + ") out of bounds for " +
                         shape_str(A.shape));
    Array out(Shape{len}, 0.0);
    for (std::size_t j = 0; j < len; ++j) out.data[j] = A.data[start + j];
    return t.record(Tape::Op::Slice, a.id, -1, std::move(out), static_cast<double>(start));
}

Var reshape(Var a, Shape s) {
    Tape& t = *a.tape;
    const Array& A = t.val(a);
    if (shape_numel(s) != A.numel())
        throw ShapeError("reshape: cannot view " + shape_str(A.shape) + " as " + shape_str(s));
    Array out(std::move(s), A.data);
    return t.record(Tape::Op::Reshape, a.id, -1, std::move(out));
}

}  // namespace cta::ad
