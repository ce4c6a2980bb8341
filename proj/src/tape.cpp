#include "trigflow/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace trigflow {

const Tensor& Var::val() const { return tape->value(id); }

Var Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{this, int(nodes_.size()) - 1};
}

Var Tape::leaf(Tensor v) { return push({Op::Leaf, -1, -1, std::move(v)}); }
Var Tape::constant(Tensor v) { return push({Op::Const, -1, -1, std::move(v)}); }

void Tape::accum(int id, const Tensor& g) {
    Tensor& slot = grads_[id];
    if (slot.size() == 0) {
        slot = g;
        return;
    }
    for (size_t i = 0; i < slot.size(); ++i) slot.d[i] += g.d[i];
}

Tensor Tape::grad(const Var& v) const {
    const Tensor& g = grads_[v.id];
    if (g.size() == 0) {
        const Tensor& val = nodes_[v.id].value;
        return Tensor(val.rows, val.cols);
    }
    return g;
}

void Tape::backward(const Var& loss) {
    if (!nodes_[loss.id].value.is_scalar())
        throw std::invalid_argument("backward: loss is " + nodes_[loss.id].value.shape_str() + ", expected scalar");
    grads_.assign(nodes_.size(), Tensor());
    grads_[loss.id] = Tensor::scalar(1.0);

    for (int i = loss.id; i >= 0; --i) {
        const Node& n = nodes_[i];
        const Tensor& g = grads_[i];
        if (g.size() == 0) continue;
        const Tensor* av = n.a >= 0 ? &nodes_[n.a].value : nullptr;
        const Tensor* bv = n.b >= 0 ? &nodes_[n.b].value : nullptr;
        switch (n.op) {
            case Op::Leaf:
            case Op::Const:
            case Op::StopGrad:
                break;
            case Op::Add:
                accum(n.a, g);
                accum(n.b, g);
                break;
            case Op::Sub:
                accum(n.a, g);
                accum(n.b, neg(g));
                break;
            case Op::Mul:
                accum(n.a, mul(g, *bv));
                accum(n.b, mul(g, *av));
                break;
            case Op::Div: {
                Tensor ga = div(g, *bv);
                accum(n.a, ga);
                accum(n.b, neg(mul(ga, n.value)));
                break;
            }
            case Op::Neg:
                accum(n.a, neg(g));
                break;
            case Op::Scale:
                accum(n.a, scale(g, n.k));
                break;
            case Op::AddScalar:
                accum(n.a, g);
                break;
            case Op::MatMul:
                accum(n.a, matmul(g, transpose(*bv)));
                accum(n.b, matmul(transpose(*av), g));
                break;
            case Op::Transpose:
                accum(n.a, transpose(g));
                break;
            case Op::Exp:
                accum(n.a, mul(g, n.value));
                break;
            case Op::Log:
                accum(n.a, div(g, *av));
                break;
            case Op::Sin:
                accum(n.a, mul(g, vcos(*av)));
                break;
            case Op::Cos:
                accum(n.a, neg(mul(g, vsin(*av))));
                break;
            case Op::Tan: {
                Tensor c = vcos(*av);
                accum(n.a, div(g, mul(c, c)));
                break;
            }
            case Op::Atan:
                accum(n.a, div(g, add_scalar(mul(*av, *av), 1.0)));
                break;
            case Op::Sqrt:
                accum(n.a, div(scale(g, 0.5), n.value));
                break;
            case Op::Silu: {
                Tensor d(av->rows, av->cols);
                for (size_t j = 0; j < av->size(); ++j) {
                    const double x = av->d[j];
                    const double s = 1.0 / (1.0 + std::exp(-x));
                    d.d[j] = s + x * s * (1.0 - s);
                }
                accum(n.a, mul(g, d));
                break;
            }
            case Op::SumAll: {
                Tensor ga(av->rows, av->cols, g.d[0]);
                accum(n.a, ga);
                break;
            }
            case Op::MeanAll: {
                Tensor ga(av->rows, av->cols, g.d[0] / double(av->size()));
                accum(n.a, ga);
                break;
            }
            case Op::SumRows:
                accum(n.a, bcast_col(g, av->cols));
                break;
            case Op::MeanRows:
                accum(n.a, scale(bcast_col(g, av->cols), 1.0 / double(av->cols)));
                break;
            case Op::MaxRows: {
                Tensor ga(av->rows, av->cols);
                for (int r = 0; r < av->rows; ++r) ga.at(r, n.idx[r]) = g.d[r];
                accum(n.a, ga);
                break;
            }
            case Op::BcastRow: {
                Tensor ga(1, av->cols);
                for (int r = 0; r < g.rows; ++r)
                    for (int c = 0; c < g.cols; ++c) ga.d[c] += g.at(r, c);
                accum(n.a, ga);
                break;
            }
            case Op::BcastCol:
                accum(n.a, sum_rows(g));
                break;
            case Op::ConcatCols:
                accum(n.a, slice_cols(g, 0, av->cols));
                accum(n.b, slice_cols(g, av->cols, bv->cols));
                break;
            case Op::ConcatRows:
                accum(n.a, slice_rows(g, 0, av->rows));
                accum(n.b, slice_rows(g, av->rows, bv->rows));
                break;
            case Op::SliceRows: {
                Tensor ga(av->rows, av->cols);
                for (int r = 0; r < g.rows; ++r)
                    for (int c = 0; c < g.cols; ++c) ga.at(n.i0 + r, c) = g.at(r, c);
                accum(n.a, ga);
                break;
            }
            case Op::SliceCols: {
                Tensor ga(av->rows, av->cols);
                for (int r = 0; r < g.rows; ++r)
                    for (int c = 0; c < g.cols; ++c) ga.at(r, n.i0 + c) = g.at(r, c);
                accum(n.a, ga);
                break;
            }
            case Op::Reshape:
                accum(n.a, reshape(g, av->rows, av->cols));
                break;
        }
    }
}

namespace {
Tape& same_tape(const Var& a, const Var& b) {
    if (a.tape != b.tape) throw std::invalid_argument("tape op: operands from different tapes");
    return *a.tape;
}
} // namespace

using Op = Tape::Op;

Var add(const Var& a, const Var& b) { return same_tape(a, b).push({Op::Add, a.id, b.id, add(a.val(), b.val())}); }
Var sub(const Var& a, const Var& b) { return same_tape(a, b).push({Op::Sub, a.id, b.id, sub(a.val(), b.val())}); }
Var mul(const Var& a, const Var& b) { return same_tape(a, b).push({Op::Mul, a.id, b.id, mul(a.val(), b.val())}); }
Var div(const Var& a, const Var& b) { return same_tape(a, b).push({Op::Div, a.id, b.id, div(a.val(), b.val())}); }
Var neg(const Var& a) { return a.tape->push({Op::Neg, a.id, -1, neg(a.val())}); }
Var scale(const Var& a, double k) { return a.tape->push({Op::Scale, a.id, -1, scale(a.val(), k), k}); }
Var add_scalar(const Var& a, double k) { return a.tape->push({Op::AddScalar, a.id, -1, add_scalar(a.val(), k), k}); }
Var matmul(const Var& a, const Var& b) { return same_tape(a, b).push({Op::MatMul, a.id, b.id, matmul(a.val(), b.val())}); }
Var transpose(const Var& a) { return a.tape->push({Op::Transpose, a.id, -1, transpose(a.val())}); }
Var vexp(const Var& a) { return a.tape->push({Op::Exp, a.id, -1, vexp(a.val())}); }
Var vlog(const Var& a) { return a.tape->push({Op::Log, a.id, -1, vlog(a.val())}); }
Var vsin(const Var& a) { return a.tape->push({Op::Sin, a.id, -1, vsin(a.val())}); }
Var vcos(const Var& a) { return a.tape->push({Op::Cos, a.id, -1, vcos(a.val())}); }
Var vtan(const Var& a) { return a.tape->push({Op::Tan, a.id, -1, vtan(a.val())}); }
Var vatan(const Var& a) { return a.tape->push({Op::Atan, a.id, -1, vatan(a.val())}); }
Var vsqrt(const Var& a) { return a.tape->push({Op::Sqrt, a.id, -1, vsqrt(a.val())}); }
Var silu(const Var& a) { return a.tape->push({Op::Silu, a.id, -1, silu(a.val())}); }
Var sum_all(const Var& a) { return a.tape->push({Op::SumAll, a.id, -1, sum_all(a.val())}); }
Var mean_all(const Var& a) { return a.tape->push({Op::MeanAll, a.id, -1, mean_all(a.val())}); }
Var sum_rows(const Var& a) { return a.tape->push({Op::SumRows, a.id, -1, sum_rows(a.val())}); }
Var mean_rows(const Var& a) { return a.tape->push({Op::MeanRows, a.id, -1, mean_rows(a.val())}); }

Var max_rows(const Var& a) {
    Tape::Node n{Op::MaxRows, a.id, -1, max_rows(a.val())};
    n.idx = argmax_rows(a.val());
    return a.tape->push(std::move(n));
}

Var bcast_row(const Var& a, int rows) { return a.tape->push({Op::BcastRow, a.id, -1, bcast_row(a.val(), rows)}); }
Var bcast_col(const Var& a, int cols) { return a.tape->push({Op::BcastCol, a.id, -1, bcast_col(a.val(), cols)}); }
Var concat_cols(const Var& a, const Var& b) {
    return same_tape(a, b).push({Op::ConcatCols, a.id, b.id, concat_cols(a.val(), b.val())});
}
Var concat_rows(const Var& a, const Var& b) {
    return same_tape(a, b).push({Op::ConcatRows, a.id, b.id, concat_rows(a.val(), b.val())});
}
Var slice_rows(const Var& a, int start, int n) {
    Tape::Node nd{Op::SliceRows, a.id, -1, slice_rows(a.val(), start, n)};
    nd.i0 = start;
    nd.i1 = n;
    return a.tape->push(std::move(nd));
}
Var slice_cols(const Var& a, int start, int n) {
    Tape::Node nd{Op::SliceCols, a.id, -1, slice_cols(a.val(), start, n)};
    nd.i0 = start;
    nd.i1 = n;
    return a.tape->push(std::move(nd));
}
Var reshape(const Var& a, int r, int c) { return a.tape->push({Op::Reshape, a.id, -1, reshape(a.val(), r, c)}); }
Var stopgrad(const Var& a) { return a.tape->push({Op::StopGrad, a.id, -1, a.val()}); }

std::vector<Tensor> grad_eval(const std::vector<double>& flat,
                              const std::vector<std::pair<int, int>>& shapes,
                              const std::function<Var(Tape&, const std::vector<Var>&)>& loss_fn,
                              double* loss_out) {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(shapes.size());
    size_t off = 0;
    for (auto [r, c] : shapes) {
        Tensor t(r, c);
        const size_t n = size_t(r) * size_t(c);
        if (off + n > flat.size()) throw std::invalid_argument("grad_eval: parameter vector too short");
        std::copy(flat.begin() + off, flat.begin() + off + n, t.d.begin());
        off += n;
        leaves.push_back(tape.leaf(std::move(t)));
    }
    Var loss = loss_fn(tape, leaves);
    if (loss_out) *loss_out = loss.val().item();
    tape.backward(loss);
    std::vector<Tensor> grads;
    grads.reserve(leaves.size());
    for (const Var& v : leaves) grads.push_back(tape.grad(v));
    return grads;
}

} // namespace trigflow
