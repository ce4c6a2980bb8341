#include "trigflow/net.hpp"

#include <sstream>
#include <stdexcept>

namespace trigflow {

std::string NetConfig::canonical() const {
    std::ostringstream os;
    os << "input_dim=" << input_dim << ";hidden=";
    for (size_t i = 0; i < hidden.size(); ++i) os << (i ? "," : "") << hidden[i];
    os << ";pairs=" << time_embed_pairs << ";scale=" << fourier_scale << ";ratio=" << freq_ratio
       << ";time_hidden=" << time_hidden << ";legacy=" << (legacy_cnoise ? 1 : 0)
       << ";attention=" << (attention ? 1 : 0) << ";tokens=" << tokens;
    return os.str();
}

NetConfig net_config_from_canonical(const std::string& text) {
    NetConfig cfg;
    cfg.hidden.clear();
    std::stringstream ss(text);
    std::string kv;
    while (std::getline(ss, kv, ';')) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("net config: bad token " + kv);
        const std::string key = kv.substr(0, eq);
        const std::string val = kv.substr(eq + 1);
        if (key == "input_dim") cfg.input_dim = std::stoi(val);
        else if (key == "hidden") {
            std::stringstream hs(val);
            std::string item;
            while (std::getline(hs, item, ',')) cfg.hidden.push_back(std::stoi(item));
        } else if (key == "pairs") cfg.time_embed_pairs = std::stoi(val);
        else if (key == "scale") cfg.fourier_scale = std::stod(val);
        else if (key == "ratio") cfg.freq_ratio = std::stod(val);
        else if (key == "time_hidden") cfg.time_hidden = std::stoi(val);
        else if (key == "legacy") cfg.legacy_cnoise = val == "1";
        else if (key == "attention") cfg.attention = val == "1";
        else if (key == "tokens") cfg.tokens = std::stoi(val);
        else throw std::invalid_argument("net config: unknown key " + key);
    }
    if (cfg.hidden.empty()) throw std::invalid_argument("net config: no hidden layers in echo");
    return cfg;
}

std::vector<double> embed_freqs(int pairs, double scale, double ratio) {
    if (pairs < 1) throw std::invalid_argument("embed_freqs: pairs < 1");
    std::vector<double> w(pairs);
    const double two_pi = 6.283185307179586476925286766559;
    for (int k = 0; k < pairs; ++k) {
        const double e = pairs > 1 ? double(k) / double(pairs - 1) : 0.0;
        w[k] = two_pi * scale * std::pow(ratio, e);
    }
    return w;
}

double c_noise(double t, bool legacy, double sigma_d) {
    return legacy ? std::log(sigma_d * std::tan(t)) : t;
}

Tensor pos_time_embed(double t, int pairs, double scale, double ratio) {
    std::vector<double> w = embed_freqs(pairs, scale, ratio);
    Tensor out(1, 2 * pairs);
    for (int k = 0; k < pairs; ++k) {
        out.d[k] = std::sin(w[k] * t);
        out.d[pairs + k] = std::cos(w[k] * t);
    }
    return out;
}

double embed_tangent_norm(int pairs, double scale, double ratio) {
    double s = 0.0;
    for (double w : embed_freqs(pairs, scale, ratio)) s += w * w;
    return std::sqrt(s);
}

namespace {
template <class F>
void visit_layout(const NetConfig& cfg, F&& f) {
    const int e = 2 * cfg.time_embed_pairs;
    const int th = cfg.time_hidden;
    const int d = cfg.input_dim;
    const auto& hs = cfg.hidden;
    if (hs.empty()) throw std::invalid_argument("NetConfig: no hidden layers");
    f("temb.w", e, th);
    f("temb.b", 1, th);
    f("in.w", d, hs[0]);
    f("in.b", 1, hs[0]);
    for (size_t i = 1; i < hs.size(); ++i) {
        const std::string p = "h" + std::to_string(i);
        f((p + ".w").c_str(), hs[i - 1], hs[i]);
        f((p + ".b").c_str(), 1, hs[i]);
    }
    for (size_t i = 0; i < hs.size(); ++i) {
        const std::string p = "adn" + std::to_string(i);
        f((p + ".ws").c_str(), th, hs[i]);
        f((p + ".sb").c_str(), 1, hs[i]);
        f((p + ".wb").c_str(), th, hs[i]);
        f((p + ".bb").c_str(), 1, hs[i]);
    }
    if (cfg.attention) {
        if (cfg.tokens < 1 || hs[0] % cfg.tokens != 0)
            throw std::invalid_argument("NetConfig: hidden[0] must be a multiple of tokens");
        const int dh = hs[0] / cfg.tokens;
        f("attn.wq", dh, dh);
        f("attn.wk", dh, dh);
        f("attn.wv", dh, dh);
        f("attn.wo", dh, dh);
    }
    f("out.w", hs.back(), d);
    f("out.b", 1, d);
}
} // namespace

ParamStore make_net_params(const NetConfig& cfg) {
    ParamStore p;
    visit_layout(cfg, [&](const char* name, int r, int c) { p.add(name, r, c); });
    return p;
}

NetSlots net_slots(const NetConfig& cfg) {
    NetSlots s{};
    int idx = 0;
    const int layers = int(cfg.hidden.size());
    s.temb_w = idx++;
    s.temb_b = idx++;
    s.in_w = idx++;
    s.in_b = idx++;
    for (int i = 1; i < layers; ++i) {
        s.h_w.push_back(idx++);
        s.h_b.push_back(idx++);
    }
    for (int i = 0; i < layers; ++i) {
        s.adn_ws.push_back(idx++);
        s.adn_sb.push_back(idx++);
        s.adn_wb.push_back(idx++);
        s.adn_bb.push_back(idx++);
    }
    if (cfg.attention) {
        s.attn_wq = idx++;
        s.attn_wk = idx++;
        s.attn_wv = idx++;
        s.attn_wo = idx++;
    }
    s.out_w = idx++;
    s.out_b = idx++;
    return s;
}

void init_net_params(ParamStore& p, const NetConfig& cfg, Rng& rng) {
    NetSlots s = net_slots(cfg);
    auto fill_randn = [&](int slot) {
        const auto& sec = p.sections[slot];
        const double std = 1.0 / std::sqrt(double(sec.rows));
        Tensor t = Tensor::randn(sec.rows, sec.cols, rng, std);
        p.set(slot, t);
    };
    fill_randn(s.temb_w);
    fill_randn(s.in_w);
    for (int w : s.h_w) fill_randn(w);
    if (cfg.attention) {
        fill_randn(s.attn_wq);
        fill_randn(s.attn_wk);
        fill_randn(s.attn_wv);
        fill_randn(s.attn_wo);
    }
    // double-norm starts as plain layer norm: s(t) == 1, b(t) == 0
    for (size_t i = 0; i < cfg.hidden.size(); ++i) {
        const auto& sec = p.sections[s.adn_sb[i]];
        p.set(s.adn_sb[i], Tensor(sec.rows, sec.cols, 1.0));
    }
    // out.w / out.b stay zero so F == 0 at init
}

ParamStore make_weight_net_params(const WeightNetConfig& cfg) {
    ParamStore p;
    p.add("w.w", 2 * cfg.pairs, 1);
    p.add("w.b", 1, 1);
    return p;
}

} // namespace trigflow
