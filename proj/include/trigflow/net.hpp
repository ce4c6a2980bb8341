// F_theta: an MLP trunk with identity time transform, positional time
// embeddings and adaptive double normalization, plus an optional single
// self-attention block for token-shaped inputs. The forward pass is written
// once against the generic op set; the attention core dispatches per mode so
// JVPs route through the streaming kernel.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "trigflow/attention_jvp.hpp"
#include "trigflow/netops.hpp"
#include "trigflow/params.hpp"
#include "trigflow/rng.hpp"

namespace trigflow {

struct NetConfig {
    int input_dim = 2;
    std::vector<int> hidden = {256, 256, 256};
    int time_embed_pairs = 32; // embedding dim = 2 * pairs
    double fourier_scale = 0.02;
    double freq_ratio = 100.0; // highest / lowest frequency in the ladder
    int time_hidden = 64;
    bool legacy_cnoise = false; // log(sigma_d tan t) instead of t
    bool attention = false;
    int tokens = 8; // attention reshape; hidden[0] % tokens == 0

    std::string canonical() const;
};

NetConfig net_config_from_canonical(const std::string& text);

// geometric ladder 2*pi*scale*ratio^(k/(pairs-1)), strictly increasing
std::vector<double> embed_freqs(int pairs, double scale, double ratio);

double c_noise(double t, bool legacy, double sigma_d);

// [1, 2*pairs]: sines then cosines, pair k at columns (k, pairs+k)
Tensor pos_time_embed(double t, int pairs, double scale, double ratio);

// analytic sqrt(sum w_k^2): norm of d(emb)/dt at any t
double embed_tangent_norm(int pairs, double scale, double ratio);

// parameter layout (shared between allocation and the forward pass)
struct NetSlots {
    int temb_w, temb_b;
    int in_w, in_b;
    std::vector<int> h_w, h_b;                       // layers 1..L-1
    std::vector<int> adn_ws, adn_sb, adn_wb, adn_bb; // layers 0..L-1
    int attn_wq = -1, attn_wk = -1, attn_wv = -1, attn_wo = -1;
    int out_w, out_b;
};

ParamStore make_net_params(const NetConfig& cfg);
NetSlots net_slots(const NetConfig& cfg);
// random trunk, identity-like double norm, zero output layer (F == 0)
void init_net_params(ParamStore& p, const NetConfig& cfg, Rng& rng);

namespace detail {

inline Tensor attn_core(const Tensor& scores, const Tensor& v) {
    return matmul(softmax_rows(scores), v);
}
inline Var attn_core(const Var& scores, const Var& v) {
    return matmul(softmax_rows(scores), v);
}
inline DualTensor attn_core(const DualTensor& scores, const DualTensor& v) {
    auto [y, ty] = streaming_attention_jvp(scores.primal, scores.tangent, v.primal, v.tangent, 16);
    return {std::move(y), std::move(ty)};
}

template <class T>
T attention_block(const T& h, const T& wq, const T& wk, const T& wv, const T& wo, int tokens) {
    const int width = ncols(h), batch = nrows(h);
    const int dh = width / tokens;
    T out{};
    for (int i = 0; i < batch; ++i) {
        T x = reshape(slice_rows(h, i, 1), tokens, dh);
        T q = matmul(x, wq), k = matmul(x, wk), v = matmul(x, wv);
        T scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(double(dh)));
        T flat = reshape(matmul(attn_core(scores, v), wo), 1, width);
        out = (i == 0) ? flat : concat_rows(out, flat);
    }
    return out;
}

} // namespace detail

// x: [B, input_dim] already divided by sigma_d; t: [B, 1]
template <class T>
T forward_F(const NetConfig& cfg, const NetSlots& s, const std::vector<T>& P,
            const T& x, const T& t, double sigma_d) {
    const int batch = nrows(x);
    const int layers = int(cfg.hidden.size());

    T c = cfg.legacy_cnoise ? vlog(scale(vtan(t), sigma_d)) : t;
    Tensor freq_row = Tensor::row(embed_freqs(cfg.time_embed_pairs, cfg.fourier_scale, cfg.freq_ratio));
    T ang = matmul(c, lift(x, freq_row)); // [B, pairs]
    T emb = concat_cols(vsin(ang), vcos(ang));
    T temb = silu(linear(emb, P[s.temb_w], P[s.temb_b]));

    T h = linear(x, P[s.in_w], P[s.in_b]);
    for (int i = 0; i < layers; ++i) {
        if (i > 0) h = linear(h, P[s.h_w[i - 1]], P[s.h_b[i - 1]]);
        T sc = pixel_norm(linear(temb, P[s.adn_ws[i]], P[s.adn_sb[i]]));
        T bs = pixel_norm(linear(temb, P[s.adn_wb[i]], P[s.adn_bb[i]]));
        h = silu(add(mul(layer_norm(h), sc), bs));
        if (cfg.attention && i == 0)
            h = add(h, detail::attention_block(h, P[s.attn_wq], P[s.attn_wk], P[s.attn_wv], P[s.attn_wo], cfg.tokens));
    }
    (void)batch;
    return linear(h, P[s.out_w], P[s.out_b]);
}

// adaptive double normalization as a standalone op:
// y = norm(x) ⊙ pnorm(s) + pnorm(b)
template <class T>
T ada_double_norm(const T& x, const T& s, const T& b) {
    if (ncols(x) != ncols(s) || ncols(x) != ncols(b))
        throw std::invalid_argument("ada_double_norm: feature dims disagree");
    return add(mul(layer_norm(x), pixel_norm(s)), pixel_norm(b));
}

// learned weighting w_phi(t): positional embedding -> linear -> scalar
struct WeightNetConfig {
    int pairs = 32;
    double scale = 0.02;
    double ratio = 100.0;
};

ParamStore make_weight_net_params(const WeightNetConfig& cfg); // zero init

template <class T>
T weight_net_forward(const WeightNetConfig& cfg, const std::vector<T>& P, const T& t) {
    Tensor freq_row = Tensor::row(embed_freqs(cfg.pairs, cfg.scale, cfg.ratio));
    T ang = matmul(t, lift(t, freq_row));
    T emb = concat_cols(vsin(ang), vcos(ang));
    return linear(emb, P[0], P[1]); // [B,1]
}

} // namespace trigflow
