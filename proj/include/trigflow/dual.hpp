// Forward-mode JVP carrier: primal plus a tangent of identical shape, with
// dual-number propagation rules for every primitive in tensor.hpp.
#pragma once

#include <functional>
#include <utility>

#include "trigflow/tensor.hpp"

namespace trigflow {

struct DualTensor {
    Tensor primal;
    Tensor tangent;

    DualTensor() = default;
    DualTensor(Tensor p, Tensor t);
    // constant (zero tangent)
    static DualTensor constant(const Tensor& p) { return DualTensor(p, Tensor(p.rows, p.cols)); }
};

DualTensor add(const DualTensor& a, const DualTensor& b);
DualTensor sub(const DualTensor& a, const DualTensor& b);
DualTensor mul(const DualTensor& a, const DualTensor& b);
DualTensor div(const DualTensor& a, const DualTensor& b);
DualTensor neg(const DualTensor& a);
DualTensor scale(const DualTensor& a, double k);
DualTensor add_scalar(const DualTensor& a, double k);
DualTensor matmul(const DualTensor& a, const DualTensor& b);
DualTensor transpose(const DualTensor& a);
DualTensor vexp(const DualTensor& a);
DualTensor vlog(const DualTensor& a);
DualTensor vsin(const DualTensor& a);
DualTensor vcos(const DualTensor& a);
DualTensor vtan(const DualTensor& a);
DualTensor vatan(const DualTensor& a);
DualTensor vsqrt(const DualTensor& a);
DualTensor silu(const DualTensor& a);
DualTensor sum_all(const DualTensor& a);
DualTensor mean_all(const DualTensor& a);
DualTensor sum_rows(const DualTensor& a);
DualTensor mean_rows(const DualTensor& a);
DualTensor max_rows(const DualTensor& a);
DualTensor bcast_row(const DualTensor& a, int rows);
DualTensor bcast_col(const DualTensor& a, int cols);
DualTensor concat_cols(const DualTensor& a, const DualTensor& b);
DualTensor concat_rows(const DualTensor& a, const DualTensor& b);
DualTensor slice_rows(const DualTensor& a, int start, int n);
DualTensor slice_cols(const DualTensor& a, int start, int n);
DualTensor reshape(const DualTensor& a, int r, int c);

// forward-mode derivative blocking: value passes, tangent is zeroed
DualTensor stopgrad(const DualTensor& a);

// y = f(x), dy = J_f(x) v  for a computation built from the primitives above
std::pair<Tensor, Tensor> jvp_eval(const std::function<DualTensor(const DualTensor&)>& f,
                                   const Tensor& x, const Tensor& v);

} // namespace trigflow
