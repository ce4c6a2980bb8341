// Streaming softmax attention that produces the output and its JVP in one
// pass over key blocks. State per query row: running max m, normalizer l,
// exp-weighted value sums f_v / f_tv, score-tangent-weighted sum g and its
// scalar mu. Blocks merge associatively, so sequential and tree reductions
// agree up to f64 reassociation.
#pragma once

#include <utility>

#include "trigflow/tensor.hpp"

namespace trigflow {

struct AttnBlockState {
    // one entry per query row; empty state has l == 0 and m == -inf
    std::vector<double> m, l, mu;
    Tensor f_v, f_tv, g; // [rows, value_dim]

    static AttnBlockState empty(int rows, int value_dim);
    int rows() const { return int(m.size()); }
};

// scores x_blk: [rows, block_len], values v_blk: [block_len, value_dim]
AttnBlockState block_init(const Tensor& x_blk, const Tensor& tx_blk,
                          const Tensor& v_blk, const Tensor& tv_blk);

AttnBlockState merge(const AttnBlockState& a, const AttnBlockState& b);

// y = softmax(x) V and its tangent t_y
std::pair<Tensor, Tensor> finalize(const AttnBlockState& s);

// full rows: walks key blocks of size block_len and merges
std::pair<Tensor, Tensor> streaming_attention_jvp(const Tensor& x, const Tensor& tx,
                                                  const Tensor& v, const Tensor& tv,
                                                  int block_len);

// materializes p = softmax(x); test-scale reference
std::pair<Tensor, Tensor> dense_attention_jvp_oracle(const Tensor& x, const Tensor& tx,
                                                     const Tensor& v, const Tensor& tv);

// scores helper: (Q K^T / sqrt(d), (tQ K^T + Q tK^T) / sqrt(d))
std::pair<Tensor, Tensor> qk_scores_jvp(const Tensor& q, const Tensor& tq,
                                        const Tensor& k, const Tensor& tk);

} // namespace trigflow
