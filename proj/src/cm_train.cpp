#include "trigflow/cm_train.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace trigflow {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / 1.4142135623730950488016887242097); }

void AdamMoments::step(std::vector<double>& params, const std::vector<double>& grad,
                       const AdamConfig& cfg, double lr) {
    if (params.size() != grad.size() || params.size() != m.size())
        throw std::invalid_argument("AdamMoments::step: size mismatch");
    ++t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(t));
    for (size_t i = 0; i < params.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double mh = m[i] / bc1;
        const double vh = v[i] / bc2;
        params[i] -= lr * mh / (std::sqrt(vh) + cfg.eps);
    }
}

TrainState TrainState::create(const NetConfig& cfg, double sigma_d, Rng& rng) {
    TrainState st;
    st.net_cfg = cfg;
    st.sigma_d = sigma_d;
    st.theta = make_net_params(cfg);
    init_net_params(st.theta, cfg, rng);
    st.wphi = make_weight_net_params(st.wcfg);
    st.ema = st.theta.data;
    st.opt_theta.init(st.theta.data.size());
    st.opt_wphi.init(st.wphi.data.size());
    return st;
}

TrainState TrainState::create_from(const NetConfig& cfg, double sigma_d, const ParamStore& init_theta) {
    TrainState st;
    st.net_cfg = cfg;
    st.sigma_d = sigma_d;
    st.theta = make_net_params(cfg);
    if (st.theta.data.size() != init_theta.data.size())
        throw std::invalid_argument("TrainState::create_from: parameter count mismatch");
    st.theta.data = init_theta.data;
    st.wphi = make_weight_net_params(st.wcfg);
    st.ema = st.theta.data;
    st.opt_theta.init(st.theta.data.size());
    st.opt_wphi.init(st.wphi.data.size());
    return st;
}

FieldFn TrainState::field(bool use_ema) const {
    return net_field_flat(net_cfg, use_ema ? ema : theta.data, sigma_d);
}

CmFn TrainState::consistency_fn(bool use_ema) const {
    return cm_fn_from_field(field(use_ema), sigma_d);
}

double TrainState::weight_at(double t) const {
    std::vector<Tensor> p = as_tensors(wphi);
    return weight_net_forward(wcfg, p, Tensor(1, 1, t)).item();
}

Tensor pfode_estimate(CmMode mode, const Tensor& x0, const Tensor& z, const Tensor& t_col,
                      const FieldFn* teacher, double sigma_d) {
    if (mode == CmMode::ct) return velocity_target(x0, z, t_col);
    if (!teacher) throw std::invalid_argument("pfode_estimate: cd mode requires a teacher");
    Tensor x_t = forward_process(x0, z, t_col);
    return scale((*teacher)(scale(x_t, 1.0 / sigma_d), t_col), sigma_d);
}

namespace {
struct TrigCols {
    Tensor cs, sn, cs2, cssn; // cos, sin, cos^2, cos*sin per row
};
TrigCols trig_cols(const Tensor& t_col) {
    TrigCols tc;
    tc.cs = vcos(t_col);
    tc.sn = vsin(t_col);
    tc.cs2 = mul(tc.cs, tc.cs);
    tc.cssn = mul(tc.cs, tc.sn);
    return tc;
}

Tensor assemble_g(const Tensor& f_minus, const Tensor& jvp_cssn_sigma_dFdt, const Tensor& x_t,
                  const Tensor& dxdt, const TrigCols& tc, double r, double sigma_d) {
    const int d = x_t.cols;
    Tensor term1 = mul(bcast_col(tc.cs2, d), sub(scale(f_minus, sigma_d), dxdt));
    Tensor term2 = add(mul(bcast_col(tc.cssn, d), x_t), jvp_cssn_sigma_dFdt);
    return neg(add(term1, scale(term2, r)));
}
} // namespace

Tensor tangent_g(const NetConfig& cfg, const ParamStore& theta_minus, const Tensor& x_t,
                 const Tensor& t_col, const Tensor& dxdt, double r, double sigma_d) {
    NetSlots s = net_slots(cfg);
    std::vector<DualTensor> p = as_duals(theta_minus);
    TrigCols tc = trig_cols(t_col);
    const int d = x_t.cols;
    DualTensor xd(scale(x_t, 1.0 / sigma_d), mul(bcast_col(tc.cssn, d), dxdt));
    DualTensor td(t_col, scale(tc.cssn, sigma_d));
    DualTensor fd = forward_F(cfg, s, p, xd, td, sigma_d);
    return assemble_g(fd.primal, fd.tangent, x_t, dxdt, tc, r, sigma_d);
}

Tensor tangent_g_naive(const NetConfig& cfg, const ParamStore& theta_minus, const Tensor& x_t,
                       const Tensor& t_col, const Tensor& dxdt, double r, double sigma_d) {
    NetSlots s = net_slots(cfg);
    std::vector<DualTensor> p = as_duals(theta_minus);
    TrigCols tc = trig_cols(t_col);
    const int d = x_t.cols;
    DualTensor xd(scale(x_t, 1.0 / sigma_d), scale(dxdt, 1.0 / sigma_d));
    DualTensor td(t_col, Tensor(t_col.rows, 1, 1.0));
    DualTensor fd = forward_F(cfg, s, p, xd, td, sigma_d);
    // fd.tangent is dF/dt; rescale afterwards
    Tensor jvp = mul(bcast_col(tc.cssn, d), scale(fd.tangent, sigma_d));
    return assemble_g(fd.primal, jvp, x_t, dxdt, tc, r, sigma_d);
}

Tensor normalize_tangent(const Tensor& g, const TangentConfig& cfg) {
    switch (cfg.mode) {
        case TangentMode::raw: return g;
        case TangentMode::clip: {
            Tensor out = g;
            for (auto& x : out.d) x = std::min(1.0, std::max(-1.0, x));
            return out;
        }
        case TangentMode::normalize: {
            if (cfg.c <= 0.0) throw std::invalid_argument("normalize_tangent: c must be > 0");
            Tensor out = g;
            for (int i = 0; i < g.rows; ++i) {
                double n2 = 0.0;
                for (int j = 0; j < g.cols; ++j) n2 += g.at(i, j) * g.at(i, j);
                const double inv = 1.0 / (std::sqrt(n2) + cfg.c);
                for (int j = 0; j < g.cols; ++j) out.at(i, j) *= inv;
            }
            return out;
        }
    }
    return g;
}

// e^{w(t)}/D ||F - stopgrad(F) - g||^2 - w(t), batch mean, on the tape
Var build_scm_loss_tape(Tape& tape, const TrainState& st, const std::vector<Var>& theta_leaves,
                        const std::vector<Var>& wphi_leaves, const CmBatch& batch) {
    NetSlots slots = net_slots(st.net_cfg);
    const int d = batch.x_t.cols;
    Var uv = tape.constant(scale(batch.x_t, 1.0 / st.sigma_d));
    Var tv = tape.constant(batch.t_col);
    Var gv = tape.constant(batch.g);
    Var f = forward_F(st.net_cfg, slots, theta_leaves, uv, tv, st.sigma_d);
    Var resid = sub(sub(f, stopgrad(f)), gv);
    Var w = weight_net_forward(st.wcfg, wphi_leaves, tv);
    Var per = sub(mul(vexp(w), scale(sumsq_rows(resid), 1.0 / double(d))), w);
    return mean_all(per);
}

namespace {
struct GStats {
    double mean = 0.0, max = 0.0;
};
GStats g_stats(const Tensor& g) {
    GStats st;
    for (int i = 0; i < g.rows; ++i) {
        double n2 = 0.0;
        for (int j = 0; j < g.cols; ++j) n2 += g.at(i, j) * g.at(i, j);
        const double n = std::sqrt(n2);
        st.mean += n;
        st.max = std::max(st.max, n);
    }
    st.mean /= std::max(1, g.rows);
    return st;
}

} // namespace

std::vector<double> flat_grads(Tape& tape, const std::vector<Var>& leaves) {
    std::vector<double> out;
    for (const Var& v : leaves) {
        Tensor g = tape.grad(v);
        out.insert(out.end(), g.d.begin(), g.d.end());
    }
    return out;
}

StepMetrics cm_metrics(const TrainState& st, const CmBatch& batch, double loss) {
    StepMetrics met;
    met.loss = loss;
    met.r = batch.r;
    GStats gs = g_stats(batch.g_raw);
    met.g_mean = gs.mean;
    met.g_max = gs.max;
    std::vector<Tensor> p = as_tensors(st.wphi);
    Tensor w = weight_net_forward(st.wcfg, p, batch.t_col);
    met.w_min = w.d[0];
    met.w_max = w.d[0];
    double acc = 0.0;
    for (double x : w.d) {
        met.w_min = std::min(met.w_min, x);
        met.w_max = std::max(met.w_max, x);
        acc += x;
    }
    met.w_mean = acc / double(w.d.size());
    return met;
}

namespace {
StepMetrics shared_cm_update(TrainState& st, const CmBatch& batch, const TrainHyper& hp) {
    Tape tape;
    std::vector<Var> th = as_leaves(st.theta, tape);
    std::vector<Var> wp = as_leaves(st.wphi, tape);
    Var loss = build_scm_loss_tape(tape, st, th, wp, batch);
    const double loss_val = loss.val().item();
    StepMetrics met = cm_metrics(st, batch, loss_val);

    if (!std::isfinite(loss_val)) {
        std::ostringstream os;
        os << "non-finite loss at iter " << st.iters << ": loss=" << loss_val
           << " t_max=" << max_abs(batch.t_col) << " |g|mean=" << met.g_mean
           << " |g|max=" << met.g_max << " w=[" << met.w_min << "," << met.w_max << "]";
        throw std::runtime_error(os.str());
    }

    tape.backward(loss);
    std::vector<double> gth = flat_grads(tape, th);
    std::vector<double> gwp = flat_grads(tape, wp);
    st.opt_theta.step(st.theta.data, gth, hp.adam, hp.adam.lr);
    st.opt_wphi.step(st.wphi.data, gwp, hp.adam, hp.wphi_lr);
    st.iters += 1;
    ema_update(st.ema, st.theta.data, hp.ema_decay);
    return met;
}
} // namespace

double scm_loss_value(const TrainState& st, const Tensor& x_t, const Tensor& t_col, const Tensor& g) {
    Tape tape;
    std::vector<Var> th = as_leaves(st.theta, tape);
    std::vector<Var> wp = as_leaves(st.wphi, tape);
    CmBatch batch{x_t, t_col, g, g, 1.0};
    Var loss = build_scm_loss_tape(tape, st, th, wp, batch);
    return loss.val().item();
}

CmBatch prepare_cm_batch(const TrainState& st, const Tensor& x0, CmMode mode, const FieldFn* teacher,
                         const TrainHyper& hp, Rng& rng) {
    const int b = x0.rows, d = x0.cols;
    CmBatch batch;
    Tensor t_col(b, 1), z(b, d);
    for (int i = 0; i < b; ++i) {
        t_col.d[i] = sample_t(hp.proposal, st.sigma_d, rng);
        for (int j = 0; j < d; ++j) z.at(i, j) = st.sigma_d * rng.normal();
    }
    batch.t_col = t_col;
    batch.x_t = forward_process(x0, z, t_col);
    batch.r = hp.tangent.warmup_iters > 0
                  ? std::min(1.0, double(st.iters) / double(hp.tangent.warmup_iters))
                  : 1.0;
    Tensor dxdt = pfode_estimate(mode, x0, z, t_col, teacher, st.sigma_d);
    batch.g_raw = tangent_g(st.net_cfg, st.theta, batch.x_t, t_col, dxdt, batch.r, st.sigma_d);
    batch.g = normalize_tangent(batch.g_raw, hp.tangent);
    return batch;
}

StepMetrics train_step(TrainState& st, const Tensor& x0, CmMode mode, const FieldFn* teacher,
                       const TrainHyper& hp, Rng& rng) {
    CmBatch batch = prepare_cm_batch(st, x0, mode, teacher, hp, rng);
    return shared_cm_update(st, batch, hp);
}

void ema_update(std::vector<double>& ema, const std::vector<double>& theta, double decay) {
    if (decay < 0.0 || decay >= 1.0) throw std::invalid_argument("ema_update: decay outside [0,1)");
    if (ema.size() != theta.size()) throw std::invalid_argument("ema_update: size mismatch");
    for (size_t i = 0; i < ema.size(); ++i) ema[i] = decay * ema[i] + (1.0 - decay) * theta[i];
}

int DiscreteGrid::sample_index(Rng& rng) const {
    const double u = rng.uniform();
    double acc = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) return int(i) + 1;
    }
    return int(weights.size());
}

DiscreteGrid edm_time_grid(int n, double sigma_d, const ProposalParams& prop,
                           double rho, double sigma_min, double sigma_max) {
    if (n < 2) throw std::invalid_argument("edm_time_grid: need N >= 2");
    DiscreteGrid g;
    g.times.resize(size_t(n) + 1);
    g.times[0] = 0.0;
    const double lo = std::pow(sigma_min, 1.0 / rho);
    const double hi = std::pow(sigma_max, 1.0 / rho);
    for (int i = 1; i <= n; ++i) {
        const double sigma = std::pow(lo + (double(i) / double(n)) * (hi - lo), rho);
        g.times[i] = std::atan(sigma / sigma_d);
    }
    // proposal mass of each cell under log(sigma_d tan t) ~ N(p_mean, p_std^2)
    auto mass_below = [&](double t) {
        if (t <= 0.0) return 0.0;
        const double u = (std::log(sigma_d * std::tan(std::min(t, kTimeHi))) - prop.p_mean) / prop.p_std;
        return normal_cdf(u);
    };
    g.weights.resize(n);
    double total = 0.0;
    for (int i = 1; i <= n; ++i) {
        g.weights[i - 1] = mass_below(g.times[i]) - mass_below(g.times[i - 1]);
        total += g.weights[i - 1];
    }
    for (double& w : g.weights) w /= total;
    return g;
}

Tensor dscd_delta_rows(const NetConfig& cfg, const ParamStore& theta_minus, const FieldFn& teacher,
                       const Tensor& x_t, const Tensor& t_col, const Tensor& tp_col, double r,
                       double sigma_d) {
    const int b = x_t.rows, d = x_t.cols;
    for (int i = 0; i < b; ++i)
        if (!(t_col.d[i] > tp_col.d[i]))
            throw std::invalid_argument("dscd_delta: requires t > t'");
    Tensor dt = sub(t_col, tp_col);
    Tensor cs_dt = vcos(dt), sn_dt = vsin(dt);
    Tensor cs_tp = vcos(tp_col), sn_tp = vsin(tp_col);

    Tensor u = scale(x_t, 1.0 / sigma_d);
    Tensor f_pre = teacher(u, t_col);
    NetSlots slots = net_slots(cfg);
    std::vector<Tensor> p = as_tensors(theta_minus);
    Tensor f_minus_t = forward_F(cfg, slots, p, u, t_col, sigma_d);

    // reference point by one teacher DDIM step
    Tensor x_tp = sub(mul(bcast_col(cs_dt, d), x_t), scale(mul(bcast_col(sn_dt, d), f_pre), sigma_d));
    Tensor f_minus_tp = forward_F(cfg, slots, p, scale(x_tp, 1.0 / sigma_d), tp_col, sigma_d);

    // (sigma_d cos(t-t') F(x_t,t) - sigma_d F(x_t',t')) / sin(t-t')
    Tensor quot = div(scale(sub(mul(bcast_col(cs_dt, d), f_minus_t), f_minus_tp), sigma_d),
                      bcast_col(sn_dt, d));
    Tensor term1 = mul(bcast_col(cs_tp, d), scale(sub(f_minus_t, f_pre), sigma_d));
    Tensor term2 = mul(bcast_col(sn_tp, d), add(x_t, quot));
    return neg(add(term1, scale(term2, r)));
}

Tensor dscd_delta(const NetConfig& cfg, const ParamStore& theta_minus, const FieldFn& teacher,
                  const Tensor& x_t, double t, double t_prime, double r, double sigma_d) {
    return dscd_delta_rows(cfg, theta_minus, teacher, x_t, Tensor(x_t.rows, 1, t),
                           Tensor(x_t.rows, 1, t_prime), r, sigma_d);
}

StepMetrics dscd_train_step(TrainState& st, const Tensor& x0, const DiscreteGrid& grid,
                            const FieldFn& teacher, const TrainHyper& hp, Rng& rng) {
    const int b = x0.rows, d = x0.cols;
    Tensor t_col(b, 1), tp_col(b, 1), z(b, d);
    for (int i = 0; i < b; ++i) {
        const int idx = grid.sample_index(rng);
        t_col.d[i] = clamp_time(grid.times[idx]);
        tp_col.d[i] = grid.times[idx - 1];
        for (int j = 0; j < d; ++j) z.at(i, j) = st.sigma_d * rng.normal();
    }
    Tensor x_t = forward_process(x0, z, t_col);
    const double r = hp.tangent.warmup_iters > 0
                         ? std::min(1.0, double(st.iters) / double(hp.tangent.warmup_iters))
                         : 1.0;
    Tensor delta = dscd_delta_rows(st.net_cfg, st.theta, teacher, x_t, t_col, tp_col, r, st.sigma_d);
    CmBatch batch;
    batch.x_t = x_t;
    batch.t_col = t_col;
    batch.r = r;
    batch.g_raw = mul(bcast_col(vcos(t_col), d), delta);
    batch.g = normalize_tangent(batch.g_raw, hp.tangent);
    return shared_cm_update(st, batch, hp);
}

double diffusion_train_step(TrainState& st, const Tensor& x0, const TrainHyper& hp, Rng& rng) {
    const int b = x0.rows, d = x0.cols;
    Tensor t_col(b, 1), z(b, d);
    for (int i = 0; i < b; ++i) {
        t_col.d[i] = sample_t(hp.proposal, st.sigma_d, rng);
        for (int j = 0; j < d; ++j) z.at(i, j) = st.sigma_d * rng.normal();
    }
    Tensor x_t = forward_process(x0, z, t_col);
    Tensor v_t = velocity_target(x0, z, t_col);
    NetSlots slots = net_slots(st.net_cfg);

    Tape tape;
    std::vector<Var> th = as_leaves(st.theta, tape);
    Var xv = tape.constant(x_t);
    Var vv = tape.constant(v_t);
    Var tv = tape.constant(t_col);
    Var loss = diffusion_loss_t(st.net_cfg, slots, th, xv, vv, tv, st.sigma_d);
    const double loss_val = loss.val().item();
    if (!std::isfinite(loss_val))
        throw std::runtime_error("diffusion_train_step: non-finite loss at iter " + std::to_string(st.iters));
    tape.backward(loss);
    std::vector<double> g = flat_grads(tape, th);
    st.opt_theta.step(st.theta.data, g, hp.adam, hp.adam.lr);
    st.iters += 1;
    ema_update(st.ema, st.theta.data, hp.ema_decay);
    return loss_val;
}

} // namespace trigflow
