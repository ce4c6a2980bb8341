// Mode-generic building blocks. Everything here is written against the
// overloaded primitive set, so one definition serves plain Tensor evaluation,
// DualTensor JVPs and tape-backed gradients.
#pragma once

#include "trigflow/dual.hpp"
#include "trigflow/tape.hpp"
#include "trigflow/tensor.hpp"

namespace trigflow {

inline int nrows(const Tensor& t) { return t.rows; }
inline int ncols(const Tensor& t) { return t.cols; }
inline int nrows(const DualTensor& t) { return t.primal.rows; }
inline int ncols(const DualTensor& t) { return t.primal.cols; }
inline int nrows(const Var& v) { return v.val().rows; }
inline int ncols(const Var& v) { return v.val().cols; }

// lift a constant into the mode of `like`
inline Tensor lift(const Tensor&, Tensor value) { return value; }
inline DualTensor lift(const DualTensor&, Tensor value) { return DualTensor::constant(std::move(value)); }
inline Var lift(const Var& like, Tensor value) { return like.tape->constant(std::move(value)); }

constexpr double kPixelNormEps = 1e-8;

// v / sqrt(mean(v^2) + eps), per row
template <class T>
T pixel_norm(const T& v, double eps = kPixelNormEps) {
    T ms = mean_rows(mul(v, v));
    return div(v, bcast_col(vsqrt(add_scalar(ms, eps)), ncols(v)));
}

// (x - mean) / sqrt(var + eps), per row
template <class T>
T layer_norm(const T& x, double eps = 1e-8) {
    const int c = ncols(x);
    T xc = sub(x, bcast_col(mean_rows(x), c));
    T var = mean_rows(mul(xc, xc));
    return div(xc, bcast_col(vsqrt(add_scalar(var, eps)), c));
}

template <class T>
T softmax_rows(const T& x) {
    const int c = ncols(x);
    T e = vexp(sub(x, bcast_col(max_rows(x), c)));
    return div(e, bcast_col(sum_rows(e), c));
}

// per-row squared norm -> [r,1]
template <class T>
T sumsq_rows(const T& x) {
    return sum_rows(mul(x, x));
}

// x @ W + b with the bias row broadcast over the batch
template <class T>
T linear(const T& x, const T& w, const T& b) {
    return add(matmul(x, w), bcast_row(b, nrows(x)));
}

} // namespace trigflow
