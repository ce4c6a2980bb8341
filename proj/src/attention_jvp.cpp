#include "trigflow/attention_jvp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace trigflow {

AttnBlockState AttnBlockState::empty(int rows, int value_dim) {
    AttnBlockState s;
    s.m.assign(rows, -std::numeric_limits<double>::infinity());
    s.l.assign(rows, 0.0);
    s.mu.assign(rows, 0.0);
    s.f_v = Tensor(rows, value_dim);
    s.f_tv = Tensor(rows, value_dim);
    s.g = Tensor(rows, value_dim);
    return s;
}

AttnBlockState block_init(const Tensor& x_blk, const Tensor& tx_blk,
                          const Tensor& v_blk, const Tensor& tv_blk) {
    check_shape(x_blk, tx_blk, "block_init");
    check_shape(v_blk, tv_blk, "block_init");
    if (x_blk.cols != v_blk.rows)
        throw std::invalid_argument("block_init: " + std::to_string(x_blk.cols) + " scores vs " +
                                    std::to_string(v_blk.rows) + " value rows");
    const int rows = x_blk.rows, len = x_blk.cols, dv = v_blk.cols;
    AttnBlockState s = AttnBlockState::empty(rows, dv);
    for (int i = 0; i < rows; ++i) {
        double m = x_blk.at(i, 0);
        for (int j = 1; j < len; ++j) m = std::max(m, x_blk.at(i, j));
        s.m[i] = m;
        double l = 0.0, mu = 0.0;
        for (int j = 0; j < len; ++j) {
            const double e = std::exp(x_blk.at(i, j) - m);
            const double etx = e * tx_blk.at(i, j);
            l += e;
            mu += etx;
            for (int d = 0; d < dv; ++d) {
                s.f_v.at(i, d) += e * v_blk.at(j, d);
                s.f_tv.at(i, d) += e * tv_blk.at(j, d);
                s.g.at(i, d) += etx * v_blk.at(j, d);
            }
        }
        s.l[i] = l;
        s.mu[i] = mu;
    }
    return s;
}

AttnBlockState merge(const AttnBlockState& a, const AttnBlockState& b) {
    if (a.rows() != b.rows() || a.f_v.cols != b.f_v.cols)
        throw std::invalid_argument("merge: mismatched attention states");
    const int rows = a.rows(), dv = a.f_v.cols;
    AttnBlockState s = AttnBlockState::empty(rows, dv);
    for (int i = 0; i < rows; ++i) {
        const double m = std::max(a.m[i], b.m[i]);
        // e^{-inf - m} == 0 covers the empty side
        const double wa = std::exp(a.m[i] - m);
        const double wb = std::exp(b.m[i] - m);
        s.m[i] = m;
        s.l[i] = wa * a.l[i] + wb * b.l[i];
        s.mu[i] = wa * a.mu[i] + wb * b.mu[i];
        for (int d = 0; d < dv; ++d) {
            s.f_v.at(i, d) = wa * a.f_v.at(i, d) + wb * b.f_v.at(i, d);
            s.f_tv.at(i, d) = wa * a.f_tv.at(i, d) + wb * b.f_tv.at(i, d);
            s.g.at(i, d) = wa * a.g.at(i, d) + wb * b.g.at(i, d);
        }
    }
    return s;
}

std::pair<Tensor, Tensor> finalize(const AttnBlockState& s) {
    const int rows = s.rows(), dv = s.f_v.cols;
    Tensor y(rows, dv), ty(rows, dv);
    for (int i = 0; i < rows; ++i) {
        if (s.l[i] <= 0.0) throw std::invalid_argument("finalize: empty attention state at row " + std::to_string(i));
        const double inv_l = 1.0 / s.l[i];
        const double mu_l = s.mu[i] * inv_l;
        for (int d = 0; d < dv; ++d) {
            const double yd = s.f_v.at(i, d) * inv_l;
            y.at(i, d) = yd;
            // t_p V = g/l - (mu/l) y ;  t_y = t_p V + p t_V
            ty.at(i, d) = s.g.at(i, d) * inv_l - mu_l * yd + s.f_tv.at(i, d) * inv_l;
        }
    }
    return {std::move(y), std::move(ty)};
}

std::pair<Tensor, Tensor> streaming_attention_jvp(const Tensor& x, const Tensor& tx,
                                                  const Tensor& v, const Tensor& tv,
                                                  int block_len) {
    if (block_len < 1) throw std::invalid_argument("streaming_attention_jvp: block_len < 1");
    AttnBlockState acc = AttnBlockState::empty(x.rows, v.cols);
    for (int start = 0; start < x.cols; start += block_len) {
        const int len = std::min(block_len, x.cols - start);
        AttnBlockState blk = block_init(slice_cols(x, start, len), slice_cols(tx, start, len),
                                        slice_rows(v, start, len), slice_rows(tv, start, len));
        acc = merge(acc, blk);
    }
    return finalize(acc);
}

std::pair<Tensor, Tensor> dense_attention_jvp_oracle(const Tensor& x, const Tensor& tx,
                                                     const Tensor& v, const Tensor& tv) {
    check_shape(x, tx, "dense_attention_jvp_oracle");
    check_shape(v, tv, "dense_attention_jvp_oracle");
    const int rows = x.rows, len = x.cols, dv = v.cols;
    if (len != v.rows) throw std::invalid_argument("dense_attention_jvp_oracle: score/value length mismatch");
    Tensor y(rows, dv), ty(rows, dv);
    for (int i = 0; i < rows; ++i) {
        double m = x.at(i, 0);
        for (int j = 1; j < len; ++j) m = std::max(m, x.at(i, j));
        double z = 0.0;
        std::vector<double> p(len);
        for (int j = 0; j < len; ++j) {
            p[j] = std::exp(x.at(i, j) - m);
            z += p[j];
        }
        for (int j = 0; j < len; ++j) p[j] /= z;
        double ptx = 0.0;
        for (int j = 0; j < len; ++j) ptx += p[j] * tx.at(i, j);
        for (int d = 0; d < dv; ++d) {
            double yd = 0.0, ptxv = 0.0, ptv = 0.0;
            for (int j = 0; j < len; ++j) {
                yd += p[j] * v.at(j, d);
                ptxv += p[j] * tx.at(i, j) * v.at(j, d);
                ptv += p[j] * tv.at(j, d);
            }
            y.at(i, d) = yd;
            // t_p V = (p ⊙ t_x) V - (p t_x^T)(p V)
            ty.at(i, d) = ptxv - ptx * yd + ptv;
        }
    }
    return {std::move(y), std::move(ty)};
}

std::pair<Tensor, Tensor> qk_scores_jvp(const Tensor& q, const Tensor& tq,
                                        const Tensor& k, const Tensor& tk) {
    if (q.cols != k.cols) throw std::invalid_argument("qk_scores_jvp: head dim mismatch");
    const double inv = 1.0 / std::sqrt(double(q.cols));
    Tensor kt = transpose(k);
    Tensor x = scale(matmul(q, kt), inv);
    Tensor tx = scale(add(matmul(tq, kt), matmul(q, transpose(tk))), inv);
    return {std::move(x), std::move(tx)};
}

} // namespace trigflow
