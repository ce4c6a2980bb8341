#include "trigflow/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace trigflow {

double Tensor::item() const {
    if (!is_scalar()) throw std::invalid_argument("item: tensor is " + shape_str() + ", expected [1,1]");
    return d[0];
}

bool Tensor::all_finite() const {
    for (double x : d)
        if (!std::isfinite(x)) return false;
    return true;
}

std::string Tensor::shape_str() const {
    return "[" + std::to_string(rows) + "," + std::to_string(cols) + "]";
}

void check_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

static Tensor map2(const Tensor& a, const Tensor& b, const char* op, double (*f)(double, double)) {
    check_shape(a, b, op);
    Tensor out(a.rows, a.cols);
    for (size_t i = 0; i < a.size(); ++i) out.d[i] = f(a.d[i], b.d[i]);
    return out;
}

static Tensor map1(const Tensor& a, double (*f)(double)) {
    Tensor out(a.rows, a.cols);
    for (size_t i = 0; i < a.size(); ++i) out.d[i] = f(a.d[i]);
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return map2(a, b, "add", [](double x, double y) { return x + y; }); }
Tensor sub(const Tensor& a, const Tensor& b) { return map2(a, b, "sub", [](double x, double y) { return x - y; }); }
Tensor mul(const Tensor& a, const Tensor& b) { return map2(a, b, "mul", [](double x, double y) { return x * y; }); }
Tensor div(const Tensor& a, const Tensor& b) { return map2(a, b, "div", [](double x, double y) { return x / y; }); }
Tensor neg(const Tensor& a) { return map1(a, [](double x) { return -x; }); }

Tensor scale(const Tensor& a, double k) {
    Tensor out(a.rows, a.cols);
    for (size_t i = 0; i < a.size(); ++i) out.d[i] = a.d[i] * k;
    return out;
}

Tensor add_scalar(const Tensor& a, double k) {
    Tensor out(a.rows, a.cols);
    for (size_t i = 0; i < a.size(); ++i) out.d[i] = a.d[i] + k;
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols != b.rows)
        throw std::invalid_argument("matmul: inner dims " + a.shape_str() + " x " + b.shape_str());
    Tensor out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = &a.d[size_t(i) * a.cols];
        double* orow = &out.d[size_t(i) * b.cols];
        for (int k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = &b.d[size_t(k) * b.cols];
            for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    Tensor out(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
    return out;
}

Tensor vexp(const Tensor& a) { return map1(a, [](double x) { return std::exp(x); }); }
Tensor vlog(const Tensor& a) { return map1(a, [](double x) { return std::log(x); }); }
Tensor vsin(const Tensor& a) { return map1(a, [](double x) { return std::sin(x); }); }
Tensor vcos(const Tensor& a) { return map1(a, [](double x) { return std::cos(x); }); }
Tensor vtan(const Tensor& a) { return map1(a, [](double x) { return std::tan(x); }); }
Tensor vatan(const Tensor& a) { return map1(a, [](double x) { return std::atan(x); }); }
Tensor vsqrt(const Tensor& a) { return map1(a, [](double x) { return std::sqrt(x); }); }

Tensor silu(const Tensor& a) {
    return map1(a, [](double x) { return x / (1.0 + std::exp(-x)); });
}

Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (double x : a.d) s += x;
    return Tensor::scalar(s);
}

Tensor mean_all(const Tensor& a) {
    if (a.size() == 0) throw std::invalid_argument("mean_all: empty tensor");
    return Tensor::scalar(sum_all(a).d[0] / double(a.size()));
}

Tensor sum_rows(const Tensor& a) {
    Tensor out(a.rows, 1);
    for (int i = 0; i < a.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < a.cols; ++j) s += a.at(i, j);
        out.d[i] = s;
    }
    return out;
}

Tensor mean_rows(const Tensor& a) {
    if (a.cols == 0) throw std::invalid_argument("mean_rows: zero columns");
    return scale(sum_rows(a), 1.0 / double(a.cols));
}

Tensor max_rows(const Tensor& a) {
    if (a.cols == 0) throw std::invalid_argument("max_rows: zero columns");
    Tensor out(a.rows, 1);
    for (int i = 0; i < a.rows; ++i) {
        double m = a.at(i, 0);
        for (int j = 1; j < a.cols; ++j) m = std::max(m, a.at(i, j));
        out.d[i] = m;
    }
    return out;
}

std::vector<int> argmax_rows(const Tensor& a) {
    std::vector<int> idx(a.rows, 0);
    for (int i = 0; i < a.rows; ++i) {
        double m = a.at(i, 0);
        for (int j = 1; j < a.cols; ++j)
            if (a.at(i, j) > m) {
                m = a.at(i, j);
                idx[i] = j;
            }
    }
    return idx;
}

Tensor bcast_row(const Tensor& a, int rows) {
    if (a.rows != 1) throw std::invalid_argument("bcast_row: expected row vector, got " + a.shape_str());
    Tensor out(rows, a.cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < a.cols; ++j) out.at(i, j) = a.d[j];
    return out;
}

Tensor bcast_col(const Tensor& a, int cols) {
    if (a.cols != 1) throw std::invalid_argument("bcast_col: expected column vector, got " + a.shape_str());
    Tensor out(a.rows, cols);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < cols; ++j) out.at(i, j) = a.d[i];
    return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.rows != b.rows)
        throw std::invalid_argument("concat_cols: row mismatch " + a.shape_str() + " vs " + b.shape_str());
    Tensor out(a.rows, a.cols + b.cols);
    for (int i = 0; i < a.rows; ++i) {
        for (int j = 0; j < a.cols; ++j) out.at(i, j) = a.at(i, j);
        for (int j = 0; j < b.cols; ++j) out.at(i, a.cols + j) = b.at(i, j);
    }
    return out;
}


Tensor concat_rows(const Tensor& a, const Tensor& b) {
    if (a.cols != b.cols)
        throw std::invalid_argument("concat_rows: col mismatch " + a.shape_str() + " vs " + b.shape_str());
    Tensor out(a.rows + b.rows, a.cols);
    std::copy(a.d.begin(), a.d.end(), out.d.begin());
    std::copy(b.d.begin(), b.d.end(), out.d.begin() + a.d.size());
    return out;
}

Tensor slice_rows(const Tensor& a, int start, int n) {
    if (start < 0 || n < 0 || start + n > a.rows)
        throw std::invalid_argument("slice_rows: range out of bounds for " + a.shape_str());
    Tensor out(n, a.cols);
    std::copy(a.d.begin() + size_t(start) * a.cols, a.d.begin() + size_t(start + n) * a.cols, out.d.begin());
    return out;
}

Tensor slice_cols(const Tensor& a, int start, int n) {
    if (start < 0 || n < 0 || start + n > a.cols)
        throw std::invalid_argument("slice_cols: range out of bounds for " + a.shape_str());
    Tensor out(a.rows, n);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < n; ++j) out.at(i, j) = a.at(i, start + j);
    return out;
}

Tensor reshape(const Tensor& a, int r, int c) {
    if (size_t(r) * size_t(c) != a.size())
        throw std::invalid_argument("reshape: " + a.shape_str() + " -> [" + std::to_string(r) + "," + std::to_string(c) + "]");
    Tensor out = a;
    out.rows = r;
    out.cols = c;
    return out;
}

double dot(const Tensor& a, const Tensor& b) {
    check_shape(a, b, "dot");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a.d[i] * b.d[i];
    return s;
}

double norm2(const Tensor& a) { return std::sqrt(dot(a, a)); }

double max_abs(const Tensor& a) {
    double m = 0.0;
    for (double x : a.d) m = std::max(m, std::abs(x));
    return m;
}

double rel_err(const Tensor& a, const Tensor& b) {
    check_shape(a, b, "rel_err");
    double diff = 0.0;
    for (size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a.d[i] - b.d[i]));
    return diff / (max_abs(b) + 1e-300);
}

} // namespace trigflow
