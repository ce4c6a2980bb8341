// Reverse-mode engine: ops append nodes to a Tape, backward() walks the node
// list in reverse and accumulates vector-Jacobian products. Replaying a tape
// is just re-running the builder, so forward values are bit-exact per seed.
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "trigflow/tensor.hpp"

namespace trigflow {

class Tape;

struct Var {
    Tape* tape = nullptr;
    int id = -1;
    const Tensor& val() const;
};

class Tape {
public:
    enum class Op : uint8_t {
        Leaf, Const, Add, Sub, Mul, Div, Neg, Scale, AddScalar, MatMul, Transpose,
        Exp, Log, Sin, Cos, Tan, Atan, Sqrt, Silu,
        SumAll, MeanAll, SumRows, MeanRows, MaxRows,
        BcastRow, BcastCol, ConcatCols, ConcatRows, SliceRows, SliceCols, Reshape, StopGrad
    };

    struct Node {
        Op op;
        int a = -1, b = -1;
        Tensor value;
        double k = 0.0;       // scalar payload
        int i0 = 0, i1 = 0;   // slice / reshape params
        std::vector<int> idx; // argmax rows
    };

    Var leaf(Tensor v);
    Var constant(Tensor v);

    // gradient of a scalar node w.r.t. every reachable node
    void backward(const Var& loss);
    // gradient after backward(); zero tensor if the node was not reached
    Tensor grad(const Var& v) const;

    const Tensor& value(int id) const { return nodes_[id].value; }
    size_t node_count() const { return nodes_.size(); }

    Var push(Node n);

private:
    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    void accum(int id, const Tensor& g);
};

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double k);
Var add_scalar(const Var& a, double k);
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var vexp(const Var& a);
Var vlog(const Var& a);
Var vsin(const Var& a);
Var vcos(const Var& a);
Var vtan(const Var& a);
Var vatan(const Var& a);
Var vsqrt(const Var& a);
Var silu(const Var& a);
Var sum_all(const Var& a);
Var mean_all(const Var& a);
Var sum_rows(const Var& a);
Var mean_rows(const Var& a);
Var max_rows(const Var& a);
Var bcast_row(const Var& a, int rows);
Var bcast_col(const Var& a, int cols);
Var concat_cols(const Var& a, const Var& b);
Var concat_rows(const Var& a, const Var& b);
Var slice_rows(const Var& a, int start, int n);
Var slice_cols(const Var& a, int start, int n);
Var reshape(const Var& a, int r, int c);
Var stopgrad(const Var& a);

// Gradients of a scalar loss w.r.t. a flat parameter vector. The builder
// receives one leaf per parameter block (shapes given by `shapes`, data taken
// contiguously from `flat`) and must return a scalar.
std::vector<Tensor> grad_eval(const std::vector<double>& flat,
                              const std::vector<std::pair<int, int>>& shapes,
                              const std::function<Var(Tape&, const std::vector<Var>&)>& loss_fn,
                              double* loss_out = nullptr);

} // namespace trigflow
