#include "trigflow/selfcheck.hpp"

#include <cmath>

#include "trigflow/attention_jvp.hpp"
#include "trigflow/cm_train.hpp"
#include "trigflow/gauss_oracle.hpp"
#include "trigflow/trigflow.hpp"

namespace trigflow {

namespace {

NetConfig tiny_net() {
    NetConfig cfg;
    cfg.input_dim = 2;
    cfg.hidden = {16, 16};
    cfg.time_embed_pairs = 8;
    cfg.time_hidden = 16;
    return cfg;
}

// fully random parameters: every section away from the init point, where
// pixel_norm is smooth (the zero-init point is a 1/sqrt(eps)-curvature kink
// that finite differences cannot resolve)
ParamStore random_params(const NetConfig& cfg, Rng& rng) {
    ParamStore p = make_net_params(cfg);
    for (size_t i = 0; i < p.sections.size(); ++i) {
        const auto& sec = p.sections[i];
        p.set(int(i), Tensor::randn(sec.rows, sec.cols, rng, 1.0 / std::sqrt(double(sec.rows))));
    }
    return p;
}

// central differences of F(x/sigma_d, t) along (vx, vt)
Tensor fd_jvp(const NetConfig& cfg, const ParamStore& p, const Tensor& x, const Tensor& t_col,
              const Tensor& vx, const Tensor& vt, double sigma_d, double eps) {
    NetSlots s = net_slots(cfg);
    std::vector<Tensor> pt = as_tensors(p);
    Tensor xp = add(x, scale(vx, eps)), xm = sub(x, scale(vx, eps));
    Tensor tp = add(t_col, scale(vt, eps)), tm = sub(t_col, scale(vt, eps));
    Tensor fp = forward_F(cfg, s, pt, scale(xp, 1.0 / sigma_d), tp, sigma_d);
    Tensor fm = forward_F(cfg, s, pt, scale(xm, 1.0 / sigma_d), tm, sigma_d);
    return scale(sub(fp, fm), 0.5 / eps);
}

double check_jvp_fd(Rng& rng) {
    NetConfig cfg = tiny_net();
    ParamStore p = random_params(cfg, rng);
    const double sigma_d = 1.3;
    const int b = 4;
    Tensor x = Tensor::randn(b, cfg.input_dim, rng);
    Tensor t_col(b, 1);
    for (int i = 0; i < b; ++i) t_col.d[i] = rng.uniform(0.1, kHalfPi - 0.1);
    Tensor vx = Tensor::randn(b, cfg.input_dim, rng);
    Tensor vt = Tensor::randn(b, 1, rng);

    NetSlots s = net_slots(cfg);
    std::vector<DualTensor> pd = as_duals(p);
    DualTensor xd(scale(x, 1.0 / sigma_d), scale(vx, 1.0 / sigma_d));
    DualTensor td(t_col, vt);
    DualTensor out = forward_F(cfg, s, pd, xd, td, sigma_d);
    Tensor fd = fd_jvp(cfg, p, x, t_col, vx, vt, sigma_d, 1e-5);
    return rel_err(out.tangent, fd);
}

double check_grad_fd(Rng& rng) {
    NetConfig cfg = tiny_net();
    ParamStore p = random_params(cfg, rng);
    const double sigma_d = 0.9;
    const int b = 4;
    Tensor x0 = Tensor::randn(b, cfg.input_dim, rng);
    Tensor z = Tensor::randn(b, cfg.input_dim, rng, sigma_d);
    Tensor t_col(b, 1);
    for (int i = 0; i < b; ++i) t_col.d[i] = rng.uniform(0.1, kHalfPi - 0.1);
    Tensor x_t = forward_process(x0, z, t_col);
    Tensor v_t = velocity_target(x0, z, t_col);
    NetSlots s = net_slots(cfg);

    auto loss_fn = [&](Tape& tape, const std::vector<Var>& leaves) {
        return diffusion_loss_t(cfg, s, leaves, tape.constant(x_t), tape.constant(v_t),
                                tape.constant(t_col), sigma_d);
    };
    std::vector<Tensor> grads = grad_eval(p.data, p.shapes(), loss_fn);

    // FD spot-check on a deterministic subset of coordinates; errors are
    // measured relative to the gradient scale so near-zero coordinates do
    // not blow up the ratio
    auto loss_at = [&](const ParamStore& q) {
        return diffusion_loss_t(cfg, s, as_tensors(q), x_t, v_t, t_col, sigma_d).item();
    };
    double gscale = 0.0;
    for (const Tensor& g : grads) gscale = std::max(gscale, max_abs(g));
    double worst = 0.0;
    const double eps = 1e-5;
    const size_t stride = std::max<size_t>(1, p.data.size() / 48);
    ParamStore q = p;
    for (size_t i = 0; i < p.data.size(); i += stride) {
        const double orig = q.data[i];
        q.data[i] = orig + eps;
        const double lp = loss_at(q);
        q.data[i] = orig - eps;
        const double lm = loss_at(q);
        q.data[i] = orig;
        const double fd = (lp - lm) / (2.0 * eps);
        // locate this coordinate's analytic gradient
        size_t off = i;
        size_t sec = 0;
        while (off >= grads[sec].size()) {
            off -= grads[sec].size();
            ++sec;
        }
        const double an = grads[sec].d[off];
        worst = std::max(worst, std::abs(an - fd) / (std::max(std::abs(fd), 1e-3 * gscale) + 1e-12));
    }
    return worst;
}

double check_duality(Rng& rng) {
    // <grad f, v> == d/de f(theta + e v) via the dual path on parameters:
    // evaluate both sides with the loss as a function of parameters
    NetConfig cfg = tiny_net();
    ParamStore p = random_params(cfg, rng);
    const double sigma_d = 1.1;
    const int b = 3;
    Tensor x_t = Tensor::randn(b, cfg.input_dim, rng);
    Tensor v_t = Tensor::randn(b, cfg.input_dim, rng);
    Tensor t_col(b, 1);
    for (int i = 0; i < b; ++i) t_col.d[i] = rng.uniform(0.1, kHalfPi - 0.1);
    NetSlots s = net_slots(cfg);

    auto loss_fn = [&](Tape& tape, const std::vector<Var>& leaves) {
        return diffusion_loss_t(cfg, s, leaves, tape.constant(x_t), tape.constant(v_t),
                                tape.constant(t_col), sigma_d);
    };
    std::vector<Tensor> grads = grad_eval(p.data, p.shapes(), loss_fn);

    std::vector<double> dir(p.data.size());
    for (auto& v : dir) v = rng.normal();
    double lhs = 0.0;
    size_t off = 0;
    for (const Tensor& g : grads) {
        for (double gv : g.d) lhs += gv * dir[off++];
    }

    // directional derivative by dual numbers on the parameter vector
    std::vector<DualTensor> pd;
    off = 0;
    for (size_t i = 0; i < p.sections.size(); ++i) {
        Tensor val = p.get(int(i));
        Tensor tan(val.rows, val.cols);
        for (size_t k = 0; k < tan.size(); ++k) tan.d[k] = dir[off++];
        pd.emplace_back(val, tan);
    }
    DualTensor out = diffusion_loss_t(cfg, s, pd, DualTensor::constant(x_t), DualTensor::constant(v_t),
                                      DualTensor::constant(t_col), sigma_d);
    const double rhs = out.tangent.item();
    return std::abs(lhs - rhs) / (std::abs(rhs) + 1e-12);
}

double check_tangent_identity(Rng& rng) {
    NetConfig cfg = tiny_net();
    ParamStore p = random_params(cfg, rng);
    const double sigma_d = 1.2;
    const int b = 4;
    double worst = 0.0;
    for (double t : {0.05, 0.7, 1.3, kHalfPi - 0.05}) {
        Tensor x_t = Tensor::randn(b, cfg.input_dim, rng, sigma_d);
        Tensor t_col(b, 1, t);
        Tensor dxdt = Tensor::randn(b, cfg.input_dim, rng, sigma_d);
        Tensor g = tangent_g(cfg, p, x_t, t_col, dxdt, 1.0, sigma_d);

        // whole-map JVP of f(x_t(t), t) along (dx/dt, 1)
        NetSlots s = net_slots(cfg);
        std::vector<DualTensor> pd = as_duals(p);
        DualTensor xd(x_t, dxdt);
        DualTensor td(t_col, Tensor(b, 1, 1.0));
        DualTensor f = cm_output_t(cfg, s, pd, xd, td, sigma_d);
        Tensor expect = mul(bcast_col(vcos(t_col), cfg.input_dim), f.tangent);
        worst = std::max(worst, rel_err(g, expect));
    }
    return worst;
}

double check_rearrangement(Rng& rng) {
    NetConfig cfg = tiny_net();
    ParamStore p = random_params(cfg, rng);
    const double sigma_d = 0.8;
    const int b = 6;
    Tensor x_t = Tensor::randn(b, cfg.input_dim, rng, sigma_d);
    Tensor t_col(b, 1);
    for (int i = 0; i < b; ++i) t_col.d[i] = rng.uniform(0.05, kHalfPi - 0.05);
    Tensor dxdt = Tensor::randn(b, cfg.input_dim, rng, sigma_d);
    Tensor a = tangent_g(cfg, p, x_t, t_col, dxdt, 1.0, sigma_d);
    Tensor bnaive = tangent_g_naive(cfg, p, x_t, t_col, dxdt, 1.0, sigma_d);
    return rel_err(a, bnaive);
}

double check_grad_conversion(Rng& rng) {
    // grad of E[F^T y] == 1/2 grad of E[||F - F^- + y||^2]
    NetConfig cfg = tiny_net();
    ParamStore p = random_params(cfg, rng);
    const double sigma_d = 1.0;
    const int b = 4;
    Tensor u = Tensor::randn(b, cfg.input_dim, rng);
    Tensor t_col(b, 1);
    for (int i = 0; i < b; ++i) t_col.d[i] = rng.uniform(0.1, kHalfPi - 0.1);
    Tensor y = Tensor::randn(b, cfg.input_dim, rng);
    NetSlots s = net_slots(cfg);

    auto inner_fn = [&](Tape& tape, const std::vector<Var>& leaves) {
        Var f = forward_F(cfg, s, leaves, tape.constant(u), tape.constant(t_col), sigma_d);
        return mean_all(sum_rows(mul(f, tape.constant(y))));
    };
    auto mse_fn = [&](Tape& tape, const std::vector<Var>& leaves) {
        Var f = forward_F(cfg, s, leaves, tape.constant(u), tape.constant(t_col), sigma_d);
        Var resid = add(sub(f, stopgrad(f)), tape.constant(y));
        return scale(mean_all(sumsq_rows(resid)), 0.5);
    };
    std::vector<Tensor> ga = grad_eval(p.data, p.shapes(), inner_fn);
    std::vector<Tensor> gb = grad_eval(p.data, p.shapes(), mse_fn);
    double worst = 0.0;
    for (size_t i = 0; i < ga.size(); ++i) {
        double ref = std::max(max_abs(ga[i]), 1e-12);
        for (size_t k = 0; k < ga[i].size(); ++k)
            worst = std::max(worst, std::abs(ga[i].d[k] - gb[i].d[k]) / ref);
    }
    return worst;
}

double check_attention_streaming(Rng& rng) {
    double worst = 0.0;
    for (int len : {1, 5, 37, 96}) {
        Tensor x = Tensor::randn(4, len, rng, 2.0);
        Tensor tx = Tensor::randn(4, len, rng);
        Tensor v = Tensor::randn(len, 6, rng);
        Tensor tv = Tensor::randn(len, 6, rng);
        auto [yd, tyd] = dense_attention_jvp_oracle(x, tx, v, tv);
        for (int blk : {1, 3, 16, len}) {
            auto [ys, tys] = streaming_attention_jvp(x, tx, v, tv, blk);
            worst = std::max(worst, max_abs(sub(ys, yd)));
            worst = std::max(worst, max_abs(sub(tys, tyd)));
        }
    }
    return worst;
}

double check_attention_vs_autodiff(Rng& rng) {
    // dense oracle against dual-number softmax composition
    const int len = 12, dv = 5, rows = 3;
    Tensor x = Tensor::randn(rows, len, rng, 1.5);
    Tensor tx = Tensor::randn(rows, len, rng);
    Tensor v = Tensor::randn(len, dv, rng);
    Tensor tv = Tensor::randn(len, dv, rng);
    auto [y, ty] = dense_attention_jvp_oracle(x, tx, v, tv);
    DualTensor out = matmul(softmax_rows(DualTensor(x, tx)), DualTensor(v, tv));
    return std::max(max_abs(sub(y, out.primal)), max_abs(sub(ty, out.tangent)));
}

double check_dscd_quotient(Rng& rng) {
    NetConfig cfg = tiny_net();
    ParamStore p = random_params(cfg, rng);
    const double sigma_d = 1.1;
    ToyDataset ds = make_dataset("gauss-nd", 1.4, 2);
    GaussOracle oracle = make_gauss_oracle(ds, sigma_d);
    FieldFn teacher = oracle.field();

    const int b = 4;
    const double t = 1.1, tp = 0.7;
    Tensor x_t = Tensor::randn(b, cfg.input_dim, rng, sigma_d);
    Tensor delta = dscd_delta(cfg, p, teacher, x_t, t, tp, 1.0, sigma_d);

    // direct quotient (f(x_t,t) - f(x_t',t')) / sin(t - t')
    Tensor u = scale(x_t, 1.0 / sigma_d);
    Tensor f_pre = teacher(u, Tensor(b, 1, t));
    Tensor x_tp = sub(scale(x_t, std::cos(t - tp)), scale(f_pre, sigma_d * std::sin(t - tp)));
    Tensor f_t = cm_output(cfg, p, x_t, Tensor(b, 1, t), sigma_d);
    Tensor f_tp = cm_output(cfg, p, x_tp, Tensor(b, 1, tp), sigma_d);
    Tensor direct = scale(sub(f_t, f_tp), 1.0 / std::sin(t - tp));
    return rel_err(delta, direct);
}

double check_schedule_equivalence(Rng& rng) {
    // flow-matching schedule alpha=1-u, sigma=u built generically then
    // converted must give the same diffusion loss as the native construction
    NetConfig cfg = tiny_net();
    ParamStore p = random_params(cfg, rng);
    const double sigma_d = 1.0;
    GenericSchedule fm{[](double u) { return 1.0 - u; }, [](double u) { return u; }};
    const int b = 8;
    Tensor x0 = Tensor::randn(b, cfg.input_dim, rng);
    Tensor z = Tensor::randn(b, cfg.input_dim, rng, sigma_d);
    NetSlots s = net_slots(cfg);
    std::vector<Tensor> pt = as_tensors(p);

    double worst = 0.0;
    for (double u : {0.2, 0.5, 0.8}) {
        const double a = fm.alpha(u), sg = fm.sigma(u);
        Tensor x_gen = add(scale(x0, a), scale(z, sg));
        TrigPoint conv = schedule_to_trigflow(fm, u, slice_rows(x_gen, 0, b));
        Tensor t_col(b, 1, conv.t);
        Tensor x_native = forward_process(x0, z, t_col);
        Tensor v_native = velocity_target(x0, z, t_col);
        const double loss_conv =
            diffusion_loss_t(cfg, s, pt, conv.x, v_native, t_col, sigma_d).item();
        const double loss_native =
            diffusion_loss_t(cfg, s, pt, x_native, v_native, t_col, sigma_d).item();
        worst = std::max(worst, std::abs(loss_conv - loss_native) / (std::abs(loss_native) + 1e-30));
    }
    return worst;
}

double check_eq8_stopgrad(Rng& rng) {
    // grad of <F, stopgrad-style target> matches the MSE surrogate on random y
    // (same machinery as check_grad_conversion but through scm_loss shape)
    NetConfig cfg = tiny_net();
    ParamStore p = random_params(cfg, rng);
    const double sigma_d = 1.0;
    const int b = 4, d = cfg.input_dim;
    Tensor u = Tensor::randn(b, d, rng);
    Tensor t_col(b, 1);
    for (int i = 0; i < b; ++i) t_col.d[i] = rng.uniform(0.1, kHalfPi - 0.1);
    Tensor g = Tensor::randn(b, d, rng);
    NetSlots s = net_slots(cfg);

    auto mse_fn = [&](Tape& tape, const std::vector<Var>& leaves) {
        Var f = forward_F(cfg, s, leaves, tape.constant(u), tape.constant(t_col), sigma_d);
        Var resid = sub(sub(f, stopgrad(f)), tape.constant(g));
        return mean_all(scale(sumsq_rows(resid), 1.0 / double(d)));
    };
    auto inner_fn = [&](Tape& tape, const std::vector<Var>& leaves) {
        Var f = forward_F(cfg, s, leaves, tape.constant(u), tape.constant(t_col), sigma_d);
        return mean_all(scale(sum_rows(mul(f, tape.constant(scale(g, -2.0)))), 1.0 / double(d)));
    };
    std::vector<Tensor> ga = grad_eval(p.data, p.shapes(), mse_fn);
    std::vector<Tensor> gb = grad_eval(p.data, p.shapes(), inner_fn);
    double worst = 0.0;
    for (size_t i = 0; i < ga.size(); ++i) {
        double ref = std::max(max_abs(gb[i]), 1e-12);
        for (size_t k = 0; k < ga[i].size(); ++k)
            worst = std::max(worst, std::abs(ga[i].d[k] - gb[i].d[k]) / ref);
    }
    return worst;
}

} // namespace

std::vector<CheckResult> run_selfchecks(uint64_t seed) {
    Rng rng(seed ^ 0x5eed5eedULL);
    std::vector<CheckResult> out;
    auto add = [&](const char* name, double value, double threshold) {
        out.push_back({name, value < threshold, value, threshold});
    };
    add("jvp-vs-finite-difference", check_jvp_fd(rng), 1e-6);
    add("grad-vs-finite-difference", check_grad_fd(rng), 1e-6);
    add("grad-jvp-duality", check_duality(rng), 1e-8);
    add("tangent-identity", check_tangent_identity(rng), 1e-8);
    add("jvp-rearrangement", check_rearrangement(rng), 1e-10);
    add("gradient-conversion", check_grad_conversion(rng), 1e-8);
    add("eq8-stopgrad-surrogate", check_eq8_stopgrad(rng), 1e-8);
    add("attention-streaming-vs-dense", check_attention_streaming(rng), 1e-10);
    add("attention-dense-vs-autodiff", check_attention_vs_autodiff(rng), 1e-12);
    add("dscd-delta-quotient", check_dscd_quotient(rng), 1e-10);
    add("schedule-equivalence", check_schedule_equivalence(rng), 1e-12);
    return out;
}

} // namespace trigflow
