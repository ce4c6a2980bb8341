#include "trigflow/dual.hpp"

#include <cmath>
#include <stdexcept>

namespace trigflow {

DualTensor::DualTensor(Tensor p, Tensor t) : primal(std::move(p)), tangent(std::move(t)) {
    check_shape(primal, tangent, "DualTensor");
}

DualTensor add(const DualTensor& a, const DualTensor& b) {
    return {add(a.primal, b.primal), add(a.tangent, b.tangent)};
}
DualTensor sub(const DualTensor& a, const DualTensor& b) {
    return {sub(a.primal, b.primal), sub(a.tangent, b.tangent)};
}
DualTensor mul(const DualTensor& a, const DualTensor& b) {
    return {mul(a.primal, b.primal), add(mul(a.tangent, b.primal), mul(a.primal, b.tangent))};
}
DualTensor div(const DualTensor& a, const DualTensor& b) {
    Tensor p = div(a.primal, b.primal);
    // (ta - p * tb) / b
    Tensor t = div(sub(a.tangent, mul(p, b.tangent)), b.primal);
    return {std::move(p), std::move(t)};
}
DualTensor neg(const DualTensor& a) { return {neg(a.primal), neg(a.tangent)}; }
DualTensor scale(const DualTensor& a, double k) { return {scale(a.primal, k), scale(a.tangent, k)}; }
DualTensor add_scalar(const DualTensor& a, double k) { return {add_scalar(a.primal, k), a.tangent}; }

DualTensor matmul(const DualTensor& a, const DualTensor& b) {
    return {matmul(a.primal, b.primal), add(matmul(a.tangent, b.primal), matmul(a.primal, b.tangent))};
}

DualTensor transpose(const DualTensor& a) { return {transpose(a.primal), transpose(a.tangent)}; }

DualTensor vexp(const DualTensor& a) {
    Tensor p = vexp(a.primal);
    return {p, mul(a.tangent, p)};
}
DualTensor vlog(const DualTensor& a) { return {vlog(a.primal), div(a.tangent, a.primal)}; }
DualTensor vsin(const DualTensor& a) { return {vsin(a.primal), mul(a.tangent, vcos(a.primal))}; }
DualTensor vcos(const DualTensor& a) { return {vcos(a.primal), neg(mul(a.tangent, vsin(a.primal)))}; }
DualTensor vtan(const DualTensor& a) {
    Tensor c = vcos(a.primal);
    return {vtan(a.primal), div(a.tangent, mul(c, c))};
}
DualTensor vatan(const DualTensor& a) {
    return {vatan(a.primal), div(a.tangent, add_scalar(mul(a.primal, a.primal), 1.0))};
}
DualTensor vsqrt(const DualTensor& a) {
    Tensor p = vsqrt(a.primal);
    return {p, div(scale(a.tangent, 0.5), p)};
}
DualTensor silu(const DualTensor& a) {
    Tensor sig(a.primal.rows, a.primal.cols);
    Tensor dsilu(a.primal.rows, a.primal.cols);
    for (size_t i = 0; i < a.primal.size(); ++i) {
        const double x = a.primal.d[i];
        const double s = 1.0 / (1.0 + std::exp(-x));
        sig.d[i] = x * s;
        dsilu.d[i] = s + x * s * (1.0 - s);
    }
    return {std::move(sig), mul(a.tangent, dsilu)};
}

DualTensor sum_all(const DualTensor& a) { return {sum_all(a.primal), sum_all(a.tangent)}; }
DualTensor mean_all(const DualTensor& a) { return {mean_all(a.primal), mean_all(a.tangent)}; }
DualTensor sum_rows(const DualTensor& a) { return {sum_rows(a.primal), sum_rows(a.tangent)}; }
DualTensor mean_rows(const DualTensor& a) { return {mean_rows(a.primal), mean_rows(a.tangent)}; }

DualTensor max_rows(const DualTensor& a) {
    Tensor p = max_rows(a.primal);
    std::vector<int> idx = argmax_rows(a.primal);
    Tensor t(p.rows, 1);
    for (int i = 0; i < p.rows; ++i) t.d[i] = a.tangent.at(i, idx[i]);
    return {std::move(p), std::move(t)};
}

DualTensor bcast_row(const DualTensor& a, int rows) {
    return {bcast_row(a.primal, rows), bcast_row(a.tangent, rows)};
}
DualTensor bcast_col(const DualTensor& a, int cols) {
    return {bcast_col(a.primal, cols), bcast_col(a.tangent, cols)};
}
DualTensor concat_cols(const DualTensor& a, const DualTensor& b) {
    return {concat_cols(a.primal, b.primal), concat_cols(a.tangent, b.tangent)};
}
DualTensor concat_rows(const DualTensor& a, const DualTensor& b) {
    return {concat_rows(a.primal, b.primal), concat_rows(a.tangent, b.tangent)};
}
DualTensor slice_rows(const DualTensor& a, int start, int n) {
    return {slice_rows(a.primal, start, n), slice_rows(a.tangent, start, n)};
}
DualTensor slice_cols(const DualTensor& a, int start, int n) {
    return {slice_cols(a.primal, start, n), slice_cols(a.tangent, start, n)};
}
DualTensor reshape(const DualTensor& a, int r, int c) {
    return {reshape(a.primal, r, c), reshape(a.tangent, r, c)};
}

DualTensor stopgrad(const DualTensor& a) { return {a.primal, Tensor(a.primal.rows, a.primal.cols)}; }

std::pair<Tensor, Tensor> jvp_eval(const std::function<DualTensor(const DualTensor&)>& f,
                                   const Tensor& x, const Tensor& v) {
    check_shape(x, v, "jvp_eval");
    DualTensor out = f(DualTensor(x, v));
    return {out.primal, out.tangent};
}

} // namespace trigflow
