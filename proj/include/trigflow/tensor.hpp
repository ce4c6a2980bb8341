// Dense f64 tensor (rank <= 2, row-major) and the primitive op set shared by
// the plain, dual and tape evaluation modes. Reductions run in a fixed order
// so results are bit-reproducible per seed.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "trigflow/rng.hpp"

namespace trigflow {

struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> d;

    Tensor() = default;
    Tensor(int r, int c, double fill = 0.0) : rows(r), cols(c), d(size_t(r) * size_t(c), fill) {}

    static Tensor scalar(double v) {
        Tensor t(1, 1);
        t.d[0] = v;
        return t;
    }
    static Tensor row(std::vector<double> v) {
        Tensor t;
        t.rows = 1;
        t.cols = int(v.size());
        t.d = std::move(v);
        return t;
    }
    static Tensor col(std::vector<double> v) {
        Tensor t;
        t.rows = int(v.size());
        t.cols = 1;
        t.d = std::move(v);
        return t;
    }
    static Tensor randn(int r, int c, Rng& rng, double std = 1.0) {
        Tensor t(r, c);
        for (auto& x : t.d) x = std * rng.normal();
        return t;
    }

    size_t size() const { return d.size(); }
    double& at(int i, int j) { return d[size_t(i) * cols + j]; }
    double at(int i, int j) const { return d[size_t(i) * cols + j]; }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
    bool is_scalar() const { return rows == 1 && cols == 1; }
    double item() const;

    bool all_finite() const;
    std::string shape_str() const;
};

// ---- elementwise / arithmetic ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double k);
Tensor add_scalar(const Tensor& a, double k);

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// ---- unary math ----
Tensor vexp(const Tensor& a);
Tensor vlog(const Tensor& a);
Tensor vsin(const Tensor& a);
Tensor vcos(const Tensor& a);
Tensor vtan(const Tensor& a);
Tensor vatan(const Tensor& a);
Tensor vsqrt(const Tensor& a);
Tensor silu(const Tensor& a);

// ---- reductions ----
Tensor sum_all(const Tensor& a);   // -> [1,1]
Tensor mean_all(const Tensor& a);  // -> [1,1]
Tensor sum_rows(const Tensor& a);  // [r,c] -> [r,1]
Tensor mean_rows(const Tensor& a); // [r,c] -> [r,1]
Tensor max_rows(const Tensor& a);  // [r,c] -> [r,1]
std::vector<int> argmax_rows(const Tensor& a);

// ---- shape ops ----
Tensor bcast_row(const Tensor& a, int rows); // [1,c] -> [rows,c]
Tensor bcast_col(const Tensor& a, int cols); // [r,1] -> [r,cols]
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor slice_rows(const Tensor& a, int start, int n);
Tensor slice_cols(const Tensor& a, int start, int n);
Tensor reshape(const Tensor& a, int r, int c);

// plain-mode stopgrad is the identity
inline Tensor stopgrad(const Tensor& a) { return a; }

// ---- misc helpers ----
double dot(const Tensor& a, const Tensor& b);
double norm2(const Tensor& a);          // sqrt(sum of squares)
double max_abs(const Tensor& a);
double rel_err(const Tensor& a, const Tensor& b); // max |a-b| / (max |b| + tiny)

void check_shape(const Tensor& a, const Tensor& b, const char* op);

} // namespace trigflow
