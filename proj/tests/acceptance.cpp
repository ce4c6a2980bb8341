// Acceptance suite: one pass/fail line per criterion, each pinned to its
// stated tolerance. Returns the number of failed criteria.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "trigflow/attention_jvp.hpp"
#include "trigflow/gauss_oracle.hpp"
#include "trigflow/run.hpp"
#include "trigflow/vsd.hpp"

using namespace trigflow;

namespace {

struct Criterion {
    int id;
    std::string name;
    bool pass;
    std::string detail;
    double seconds;
};
std::vector<Criterion> g_results;

void run_criterion(int id, const std::string& name,
                   const std::function<std::pair<bool, std::string>()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = false;
    std::string detail;
    try {
        auto [p, d] = body();
        pass = p;
        detail = d;
    } catch (const std::exception& e) {
        pass = false;
        detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    g_results.push_back({id, name, pass, detail, secs});
    std::printf("%s  criterion %2d: %-28s  %s  [%.1fs]\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

NetConfig small_net(int dim, std::vector<int> hidden = {16, 16}) {
    NetConfig cfg;
    cfg.input_dim = dim;
    cfg.hidden = std::move(hidden);
    cfg.time_embed_pairs = 8;
    cfg.time_hidden = 16;
    return cfg;
}

ParamStore random_params(const NetConfig& cfg, Rng& rng) {
    ParamStore p = make_net_params(cfg);
    for (size_t i = 0; i < p.sections.size(); ++i) {
        const auto& sec = p.sections[i];
        p.set(int(i), Tensor::randn(sec.rows, sec.cols, rng, 1.0 / std::sqrt(double(sec.rows))));
    }
    return p;
}

Tensor batch_rows(const Tensor& pool, int batch, Rng& rng) {
    Tensor out(batch, pool.cols);
    for (int i = 0; i < batch; ++i) {
        const int r = int(rng.index(size_t(pool.rows)));
        for (int j = 0; j < pool.cols; ++j) out.at(i, j) = pool.at(r, j);
    }
    return out;
}

double slope_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(x.size());
    my /= double(y.size());
    double num = 0, den = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        num += (x[i] - mx) * (y[i] - my);
        den += (x[i] - mx) * (x[i] - mx);
    }
    return num / den;
}

// ---------- criterion 1 ----------
std::pair<bool, std::string> c1_autodiff() {
    Rng rng(101);
    double worst_jvp = 0.0, worst_grad = 0.0, worst_dual = 0.0;

    // per-primitive JVP vs FD
    {
        Tensor a = Tensor::randn(3, 4, rng);
        Tensor v = Tensor::randn(3, 4, rng);
        Tensor apos = add_scalar(mul(a, a), 0.5);
        auto fd = [&](const std::function<DualTensor(const DualTensor&)>& f, const Tensor& x,
                      const Tensor& tan) {
            auto [y, dy] = jvp_eval(f, x, tan);
            const double eps = 1e-5;
            Tensor fp = f(DualTensor::constant(add(x, scale(tan, eps)))).primal;
            Tensor fm = f(DualTensor::constant(sub(x, scale(tan, eps)))).primal;
            worst_jvp = std::max(worst_jvp, rel_err(dy, scale(sub(fp, fm), 0.5 / eps)));
            (void)y;
        };
        Tensor b = Tensor::randn(3, 4, rng);
        Tensor w = Tensor::randn(4, 5, rng);
        fd([&](const DualTensor& x) { return add(x, DualTensor::constant(b)); }, a, v);
        fd([&](const DualTensor& x) { return sub(DualTensor::constant(b), x); }, a, v);
        fd([&](const DualTensor& x) { return mul(x, x); }, a, v);
        fd([&](const DualTensor& x) { return div(DualTensor::constant(b), add_scalar(x, 3.0)); }, a, v);
        fd([&](const DualTensor& x) { return matmul(x, DualTensor::constant(w)); }, a, v);
        fd([&](const DualTensor& x) { return vexp(x); }, a, v);
        fd([&](const DualTensor& x) { return vlog(x); }, apos, v);
        fd([&](const DualTensor& x) { return vsin(x); }, a, v);
        fd([&](const DualTensor& x) { return vcos(x); }, a, v);
        fd([&](const DualTensor& x) { return vtan(x); }, scale(a, 0.3), v);
        fd([&](const DualTensor& x) { return vatan(x); }, a, v);
        fd([&](const DualTensor& x) { return vsqrt(x); }, apos, v);
        fd([&](const DualTensor& x) { return silu(x); }, a, v);
        fd([&](const DualTensor& x) { return sum_rows(x); }, a, v);
        fd([&](const DualTensor& x) { return mean_rows(x); }, a, v);
        fd([&](const DualTensor& x) { return max_rows(x); }, a, v);
        fd([&](const DualTensor& x) { return concat_cols(x, mul(x, x)); }, a, v);
        fd([&](const DualTensor& x) { return slice_cols(x, 1, 2); }, a, v);
        fd([&](const DualTensor& x) { return transpose(x); }, a, v);
        fd([&](const DualTensor& x) { return reshape(x, 4, 3); }, a, v);
    }

    // random 3-layer nets: jvp, per-coordinate gradient, duality
    for (int trial = 0; trial < 3; ++trial) {
        NetConfig cfg = small_net(2, {12, 12, 12});
        ParamStore p = random_params(cfg, rng);
        NetSlots s = net_slots(cfg);
        const int b = 3;
        const double sigma_d = 1.1;
        Tensor x = Tensor::randn(b, 2, rng);
        Tensor t_col(b, 1);
        for (int i = 0; i < b; ++i) t_col.d[i] = rng.uniform(0.1, kHalfPi - 0.1);
        Tensor vx = Tensor::randn(b, 2, rng);
        Tensor vt = Tensor::randn(b, 1, rng);

        std::vector<DualTensor> pd = as_duals(p);
        DualTensor out = forward_F(cfg, s, pd, DualTensor(x, vx), DualTensor(t_col, vt), sigma_d);
        const double eps = 1e-5;
        std::vector<Tensor> pt = as_tensors(p);
        Tensor fp = forward_F(cfg, s, pt, add(x, scale(vx, eps)), add(t_col, scale(vt, eps)), sigma_d);
        Tensor fm = forward_F(cfg, s, pt, sub(x, scale(vx, eps)), sub(t_col, scale(vt, eps)), sigma_d);
        worst_jvp = std::max(worst_jvp, rel_err(out.tangent, scale(sub(fp, fm), 0.5 / eps)));

        Tensor target = Tensor::randn(b, 2, rng);
        auto loss_fn = [&](Tape& tape, const std::vector<Var>& leaves) {
            Var f = forward_F(cfg, s, leaves, tape.constant(x), tape.constant(t_col), sigma_d);
            return mean_all(sumsq_rows(sub(f, tape.constant(target))));
        };
        auto grads = grad_eval(p.data, p.shapes(), loss_fn);
        auto loss_at = [&](const std::vector<double>& q) {
            double val;
            grad_eval(q, p.shapes(), loss_fn, &val);
            return val;
        };
        double gscale = 1e-12;
        for (const auto& g : grads) gscale = std::max(gscale, max_abs(g));
        std::vector<double> flat = p.data;
        const size_t stride = std::max<size_t>(1, flat.size() / 40);
        for (size_t i = 0; i < flat.size(); i += stride) {
            const double orig = flat[i];
            flat[i] = orig + 1e-5;
            const double lp = loss_at(flat);
            flat[i] = orig - 1e-5;
            const double lm = loss_at(flat);
            flat[i] = orig;
            const double fdv = (lp - lm) / 2e-5;
            size_t off = i, sec = 0;
            while (off >= grads[sec].size()) {
                off -= grads[sec].size();
                ++sec;
            }
            worst_grad = std::max(worst_grad,
                                  std::abs(grads[sec].d[off] - fdv) / std::max(std::abs(fdv), 1e-3 * gscale));
        }

        // duality <grad, v> == directional derivative by dual numbers
        std::vector<double> dir(p.data.size());
        for (auto& dv : dir) dv = rng.normal();
        double lhs = 0.0;
        size_t off = 0;
        for (const auto& g : grads)
            for (double gv : g.d) lhs += gv * dir[off++];
        std::vector<DualTensor> pdir;
        off = 0;
        for (size_t i = 0; i < p.sections.size(); ++i) {
            Tensor val = p.get(int(i));
            Tensor tan(val.rows, val.cols);
            for (size_t k = 0; k < tan.size(); ++k) tan.d[k] = dir[off++];
            pdir.emplace_back(val, tan);
        }
        DualTensor f = forward_F(cfg, s, pdir, DualTensor::constant(x), DualTensor::constant(t_col), sigma_d);
        DualTensor l = mean_all(sumsq_rows(sub(f, DualTensor::constant(target))));
        worst_dual = std::max(worst_dual, std::abs(lhs - l.tangent.item()) / std::abs(l.tangent.item()));
    }

    const bool pass = worst_jvp < 1e-6 && worst_grad < 1e-6 && worst_dual < 1e-8;
    return {pass, "jvp " + fmt(worst_jvp) + ", grad " + fmt(worst_grad) + ", dual " + fmt(worst_dual)};
}

// ---------- criterion 2 ----------
std::pair<bool, std::string> c2_tangent_identity() {
    Rng rng(202);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        NetConfig cfg = small_net(2, {14, 14});
        ParamStore p = random_params(cfg, rng);
        const double sigma_d = 0.8 + rng.uniform();
        const double t = 0.01 + (kHalfPi - 0.02) * double(trial) / 19.0;
        const int b = 2;
        Tensor x_t = Tensor::randn(b, 2, rng, sigma_d);
        Tensor dxdt = Tensor::randn(b, 2, rng, sigma_d);
        Tensor t_col(b, 1, t);
        Tensor g = tangent_g(cfg, p, x_t, t_col, dxdt, 1.0, sigma_d);
        NetSlots s = net_slots(cfg);
        std::vector<DualTensor> pd = as_duals(p);
        DualTensor f = cm_output_t(cfg, s, pd, DualTensor(x_t, dxdt),
                                   DualTensor(t_col, Tensor(b, 1, 1.0)), sigma_d);
        worst = std::max(worst, rel_err(g, scale(f.tangent, std::cos(t))));
    }
    return {worst < 1e-8, "max rel err " + fmt(worst)};
}

// ---------- criterion 3 ----------
std::pair<bool, std::string> c3_rearrangement() {
    Rng rng(303);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        NetConfig cfg = small_net(2, {14, 14});
        ParamStore p = random_params(cfg, rng);
        const double sigma_d = 0.7 + rng.uniform();
        const int b = 4;
        Tensor x_t = Tensor::randn(b, 2, rng, sigma_d);
        Tensor dxdt = Tensor::randn(b, 2, rng, sigma_d);
        Tensor t_col(b, 1);
        for (int i = 0; i < b; ++i) t_col.d[i] = 0.02 + (kHalfPi - 0.04) * rng.uniform();
        worst = std::max(worst, rel_err(tangent_g(cfg, p, x_t, t_col, dxdt, 1.0, sigma_d),
                                        tangent_g_naive(cfg, p, x_t, t_col, dxdt, 1.0, sigma_d)));
    }
    return {worst < 1e-10, "max rel err " + fmt(worst)};
}

// ---------- criterion 4 ----------
std::pair<bool, std::string> c4_grad_conversion() {
    Rng rng(404);
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        NetConfig cfg = small_net(2, {12, 12});
        ParamStore p = random_params(cfg, rng);
        NetSlots s = net_slots(cfg);
        const int b = 4;
        Tensor u = Tensor::randn(b, 2, rng);
        Tensor t_col(b, 1);
        for (int i = 0; i < b; ++i) t_col.d[i] = rng.uniform(0.1, kHalfPi - 0.1);
        Tensor y = Tensor::randn(b, 2, rng);
        auto inner = [&](Tape& tape, const std::vector<Var>& leaves) {
            Var f = forward_F(cfg, s, leaves, tape.constant(u), tape.constant(t_col), 1.0);
            return mean_all(sum_rows(mul(f, tape.constant(y))));
        };
        auto mse = [&](Tape& tape, const std::vector<Var>& leaves) {
            Var f = forward_F(cfg, s, leaves, tape.constant(u), tape.constant(t_col), 1.0);
            Var r = add(sub(f, stopgrad(f)), tape.constant(y));
            return scale(mean_all(sumsq_rows(r)), 0.5);
        };
        auto ga = grad_eval(p.data, p.shapes(), inner);
        auto gb = grad_eval(p.data, p.shapes(), mse);
        for (size_t i = 0; i < ga.size(); ++i) {
            const double ref = std::max(max_abs(ga[i]), 1e-12);
            worst = std::max(worst, max_abs(sub(ga[i], gb[i])) / ref);
        }
    }
    return {worst < 1e-8, "max rel err " + fmt(worst)};
}

// ---------- criterion 5 ----------
std::pair<bool, std::string> c5_adaptive_weight() {
    // fixed deterministic loss-norm profile; fit w_phi alone, check the
    // optimum identity on every proposal decile
    WeightNetConfig wcfg;
    ParamStore wphi = make_weight_net_params(wcfg);
    AdamMoments opt;
    opt.init(wphi.data.size());
    AdamConfig adam;
    const double a = 0.9, c0 = -0.3;
    ProposalParams prop{-1.0, 1.4};
    const double sigma_d = 1.0;
    auto norm_sq = [&](double t) { return std::exp(a * std::sin(2.0 * t) + c0); }; // ||y||^2 / D
    Rng rng(505);
    for (int it = 0; it < 20000; ++it) {
        const double lr = it < 12000 ? 1e-2 : 1e-3; // settle within the 1% band
        const int b = 64;
        Tensor t_col = sample_t_col(prop, sigma_d, b, rng);
        Tensor target(b, 1);
        for (int i = 0; i < b; ++i) target.d[i] = norm_sq(t_col.d[i]);
        Tape tape;
        auto leaves = as_leaves(wphi, tape);
        Var w = weight_net_forward(wcfg, leaves, tape.constant(t_col));
        Var loss = mean_all(sub(mul(vexp(w), tape.constant(target)), w));
        tape.backward(loss);
        std::vector<double> g = flat_grads(tape, leaves);
        opt.step(wphi.data, g, adam, lr);
    }
    // ten equal-probability bins of the proposal
    Rng rng_eval(506);
    std::vector<double> bin_sum(10, 0.0);
    std::vector<long> bin_n(10, 0);
    const int n = 100000;
    std::vector<Tensor> wp = as_tensors(wphi);
    for (int i = 0; i < n; ++i) {
        const double tau = rng_eval.normal(prop.p_mean, prop.p_std);
        const double t = clamp_time(std::atan(std::exp(tau) / sigma_d));
        const double q = normal_cdf((tau - prop.p_mean) / prop.p_std);
        const int bin = std::min(9, int(q * 10.0));
        const double w = weight_net_forward(wcfg, wp, Tensor(1, 1, t)).item();
        bin_sum[bin] += std::exp(w) * norm_sq(t);
        bin_n[bin] += 1;
    }
    double lo = 1e30, hi = -1e30;
    for (int k = 0; k < 10; ++k) {
        const double m = bin_sum[k] / double(bin_n[k]);
        lo = std::min(lo, m);
        hi = std::max(hi, m);
    }
    const bool pass = lo >= 0.99 && hi <= 1.01;
    return {pass, "bin means in [" + fmt(lo) + ", " + fmt(hi) + "]"};
}

// ---------- criterion 6 ----------
double sampler_order(SamplerMethod method) {
    GaussOracle oracle{{4.0}, 1.0};
    FieldFn f = oracle.field();
    const double t_max = std::atan(80.0), t_min = 0.02;
    Rng rng(606);
    Tensor x0 = Tensor::randn(8, 1, rng);
    Tensor exact = oracle.pfode_map(x0, t_max, t_min);
    std::vector<double> lx, ly;
    for (int n : {8, 16, 32, 64, 128}) { // 4 octaves
        SamplerConfig cfg;
        cfg.method = method;
        Tensor got = solve_pfode(x0, uniform_grid(n, t_max, t_min), cfg, f, 1.0);
        lx.push_back(std::log(double(n)));
        ly.push_back(std::log(max_abs(sub(got, exact))));
    }
    return -slope_loglog(lx, ly);
}

std::pair<bool, std::string> c6_sampler_orders() {
    const double s1 = sampler_order(SamplerMethod::ddim);
    const double s2 = sampler_order(SamplerMethod::dpm2);
    const double s3 = sampler_order(SamplerMethod::dpmpp2);
    const bool pass = std::abs(s1 - 1.0) < 0.1 && std::abs(s2 - 2.0) < 0.15 && std::abs(s3 - 2.0) < 0.15;
    return {pass, "ddim " + fmt(s1) + ", dpm2 " + fmt(s2) + ", dpmpp2 " + fmt(s3)};
}

// ---------- criterion 7 ----------
std::pair<bool, std::string> c7_schedule_equivalence() {
    Rng rng(707);
    NetConfig cfg = small_net(2, {14, 14});
    ParamStore p = random_params(cfg, rng);
    NetSlots s = net_slots(cfg);
    const double sigma_d = 1.0;
    GenericSchedule fm{[](double u) { return 1.0 - u; }, [](double u) { return u; }};

    // loss invariance
    double worst_loss = 0.0;
    {
        const int b = 16;
        Tensor x0 = Tensor::randn(b, 2, rng);
        Tensor z = Tensor::randn(b, 2, rng, sigma_d);
        std::vector<Tensor> pt = as_tensors(p);
        for (double u : {0.05, 0.3, 0.5, 0.7, 0.95}) {
            Tensor x_gen = add(scale(x0, fm.alpha(u)), scale(z, fm.sigma(u)));
            TrigPoint conv = schedule_to_trigflow(fm, u, x_gen);
            Tensor t_col(b, 1, conv.t);
            Tensor v = velocity_target(x0, z, t_col);
            const double l1 = diffusion_loss_t(cfg, s, pt, conv.x, v, t_col, sigma_d).item();
            const double l2 =
                diffusion_loss_t(cfg, s, pt, forward_process(x0, z, t_col), v, t_col, sigma_d).item();
            worst_loss = std::max(worst_loss, std::abs(l1 - l2) / std::abs(l2));
        }
    }

    // trajectory invariance on matched randomness: the same sampler run from
    // a natively-built state vs a generically-built-then-converted state
    double worst_traj = 0.0;
    {
        FieldFn f = net_field(cfg, p, sigma_d);
        const int b = 8;
        Tensor x0 = Tensor::randn(b, 2, rng);
        Tensor z = Tensor::randn(b, 2, rng, sigma_d);
        const double u_max = 0.98, u_min = 0.05;
        const int steps = 12;
        // flow-matching grid converted to TrigFlow times
        std::vector<double> t_hat(steps + 1);
        for (int i = 0; i <= steps; ++i) {
            const double u = u_max + (u_min - u_max) * double(i) / steps;
            t_hat[i] = std::atan(fm.sigma(u) / fm.alpha(u));
        }
        TimeGrid grid{t_hat};
        // route A: native TrigFlow construction at t_hat[0]
        Tensor xa = forward_process(x0, z, Tensor(b, 1, t_hat[0]));
        // route B: generic construction at u_max then converted
        Tensor x_gen = add(scale(x0, fm.alpha(u_max)), scale(z, fm.sigma(u_max)));
        TrigPoint conv = schedule_to_trigflow(fm, u_max, x_gen);
        for (SamplerMethod m : {SamplerMethod::ddim, SamplerMethod::dpm2, SamplerMethod::dpmpp2}) {
            SamplerConfig sc;
            sc.method = m;
            Tensor ya = solve_pfode(xa, grid, sc, f, sigma_d);
            Tensor yb = solve_pfode(conv.x, grid, sc, f, sigma_d);
            worst_traj = std::max(worst_traj, rel_err(yb, ya));
        }
    }
    const bool pass = worst_loss < 1e-12 && worst_traj < 1e-12;
    return {pass, "loss " + fmt(worst_loss) + ", trajectory " + fmt(worst_traj)};
}

// ---------- criterion 8 ----------
std::pair<bool, std::string> c8_attention_jvp() {
    Rng rng(808);
    double worst_stream = 0.0, worst_oracle = 0.0;
    for (int len : {8, 32, 77, 128}) {
        const int rows = 4, dv = 8;
        Tensor x = Tensor::randn(rows, len, rng, 2.5);
        Tensor tx = Tensor::randn(rows, len, rng, 1.5);
        Tensor v = Tensor::randn(len, dv, rng);
        Tensor tv = Tensor::randn(len, dv, rng);
        auto [yd, tyd] = dense_attention_jvp_oracle(x, tx, v, tv);
        for (int blk : {1, 3, 16, 64, len}) {
            auto [ys, tys] = streaming_attention_jvp(x, tx, v, tv, blk);
            worst_stream = std::max({worst_stream, max_abs(sub(ys, yd)), max_abs(sub(tys, tyd))});
        }
        DualTensor out = matmul(softmax_rows(DualTensor(x, tx)), DualTensor(v, tv));
        worst_oracle = std::max({worst_oracle, max_abs(sub(yd, out.primal)), max_abs(sub(tyd, out.tangent))});
    }
    const bool pass = worst_stream < 1e-10 && worst_oracle < 1e-12;
    return {pass, "stream " + fmt(worst_stream) + ", oracle-vs-ad " + fmt(worst_oracle)};
}

// ---------- shared trainers for 9-13 ----------
struct MixtureSetup {
    ToyDataset ds = make_dataset("mixture2d");
    Tensor pool;
    double sigma_d = 1.0;
};

MixtureSetup mixture_pool(uint64_t seed, int n = 16384) {
    MixtureSetup m;
    Rng rng(seed);
    m.pool = m.ds.sample(n, rng);
    m.sigma_d = estimate_sigma_d(m.pool);
    return m;
}

TrainState train_mixture_teacher(const MixtureSetup& m, uint64_t seed, long iters,
                                 std::vector<int> hidden = {48, 48}, bool legacy = false) {
    NetConfig cfg;
    cfg.input_dim = 2;
    cfg.hidden = std::move(hidden);
    cfg.time_embed_pairs = 16;
    cfg.time_hidden = 32;
    cfg.legacy_cnoise = legacy;
    Rng rng_init(seed);
    TrainState st = TrainState::create(cfg, m.sigma_d, rng_init);
    TrainHyper hp;
    hp.adam.lr = 1e-3;
    hp.ema_decay = 0.999;
    hp.proposal = {-0.8, 1.6}; // diffusion proposal
    Rng rng_train(seed + 1);
    for (long it = 0; it < iters; ++it)
        diffusion_train_step(st, batch_rows(m.pool, 96, rng_train), hp, rng_train);
    return st;
}

double eval_cm_distance(const TrainState& st, const MixtureSetup& m, int n_steps, int n,
                        uint64_t seed) {
    Rng rng(seed);
    Tensor ref = m.ds.sample(n, rng);
    Rng rng_s(seed + 1);
    Tensor out = cm_sample(parallel_cm(st.consistency_fn(true)), n_steps, 1.1,
                           std::atan(80.0 / st.sigma_d), st.sigma_d, 2, n, rng_s);
    Rng rng_m(seed + 2);
    return energy_distance(out, ref, &rng_m);
}

// ---------- criterion 9 ----------
std::pair<bool, std::string> c9_discrete_to_continuous() {
    // (a) Delta converges to the continuous tangent at order 1
    double slope = 0.0;
    {
        Rng rng(909);
        NetConfig cfg = small_net(2, {14, 14});
        ParamStore p = random_params(cfg, rng);
        const double sigma_d = 1.0;
        GaussOracle oracle{{2.25, 4.0}, sigma_d};
        FieldFn teacher = oracle.field();
        const double t = 1.0;
        const int b = 4;
        Tensor x_t = Tensor::randn(b, 2, rng, sigma_d);
        Tensor dxdt = scale(teacher(scale(x_t, 1.0 / sigma_d), Tensor(b, 1, t)), sigma_d);
        Tensor cont = scale(tangent_g(cfg, p, x_t, Tensor(b, 1, t), dxdt, 1.0, sigma_d),
                            1.0 / std::cos(t));
        std::vector<double> lx, ly;
        for (double gap : {0.08, 0.04, 0.02, 0.01, 0.005}) {
            Tensor delta = dscd_delta(cfg, p, teacher, x_t, t, t - gap, 1.0, sigma_d);
            lx.push_back(std::log(gap));
            ly.push_back(std::log(max_abs(sub(delta, cont))));
        }
        slope = slope_loglog(lx, ly);
    }
    const bool order_ok = std::abs(slope - 1.0) < 0.1;

    // (b) end-to-end: dsCD distance non-increasing in N, continuous sCD best
    const std::vector<int> grid_ns = {8, 32, 128, 256};
    const int n_seeds = 3;
    const long distill_iters = 2500;
    std::vector<std::vector<double>> dist_dscd(grid_ns.size());
    std::vector<double> dist_scd;

    for (int sd = 0; sd < n_seeds; ++sd) {
        MixtureSetup m = mixture_pool(4000 + sd);
        TrainState teacher_state = train_mixture_teacher(m, 4100 + sd, 4000);
        FieldFn teacher = net_field_flat(teacher_state.net_cfg, teacher_state.ema, m.sigma_d);
        TrainHyper hp;
        hp.adam.lr = 2e-4;
        hp.ema_decay = 0.999;
        hp.tangent.warmup_iters = 600;

        auto distill = [&](int grid_n) {
            ParamStore init = make_net_params(teacher_state.net_cfg);
            init.data = teacher_state.ema;
            TrainState st = TrainState::create_from(teacher_state.net_cfg, m.sigma_d, init);
            Rng rng_train(5000 + 97 * sd + grid_n);
            if (grid_n > 0) {
                DiscreteGrid grid = edm_time_grid(grid_n, m.sigma_d, hp.proposal);
                for (long it = 0; it < distill_iters; ++it)
                    dscd_train_step(st, batch_rows(m.pool, 96, rng_train), grid, teacher, hp, rng_train);
            } else {
                for (long it = 0; it < distill_iters; ++it)
                    train_step(st, batch_rows(m.pool, 96, rng_train), CmMode::cd, &teacher, hp, rng_train);
            }
            return eval_cm_distance(st, m, 1, 8192, 6000 + 31 * sd + grid_n);
        };
        for (size_t gi = 0; gi < grid_ns.size(); ++gi) dist_dscd[gi].push_back(distill(grid_ns[gi]));
        dist_scd.push_back(distill(0));
    }

    auto mean_of = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return s / double(v.size());
    };
    auto std_of = [&](const std::vector<double>& v) {
        const double m = mean_of(v);
        double s = 0;
        for (double x : v) s += (x - m) * (x - m);
        return std::sqrt(s / double(v.size() - 1));
    };
    // MC-noise allowance: two-sigma of the seed spread plus a small floor
    double noise = 0.004;
    for (const auto& v : dist_dscd) noise = std::max(noise, 2.0 * std_of(v) / std::sqrt(3.0));
    noise = std::max(noise, 2.0 * std_of(dist_scd) / std::sqrt(3.0));

    bool monotone = true;
    std::string chain;
    for (size_t gi = 0; gi < grid_ns.size(); ++gi) {
        if (gi > 0 && mean_of(dist_dscd[gi]) > mean_of(dist_dscd[gi - 1]) + noise) monotone = false;
        chain += "N" + std::to_string(grid_ns[gi]) + "=" + fmt(mean_of(dist_dscd[gi])) + " ";
    }
    bool cont_best = true;
    for (const auto& v : dist_dscd)
        if (mean_of(dist_scd) > mean_of(v) + noise) cont_best = false;
    chain += "cont=" + fmt(mean_of(dist_scd)) + " noise=" + fmt(noise);

    const bool pass = order_ok && monotone && cont_best;
    return {pass, "slope " + fmt(slope) + "; " + chain};
}

// ---------- criterion 10 ----------
std::pair<bool, std::string> c10_end_to_end_distillation() {
    MixtureSetup m = mixture_pool(1010);
    TrainState teacher_state = train_mixture_teacher(m, 1011, 12000, {64, 64});
    FieldFn teacher = net_field_flat(teacher_state.net_cfg, teacher_state.ema, m.sigma_d);

    // teacher reference: 64-step DDIM distance
    Rng rng_ref(1012);
    const int n = 10000;
    Tensor ref = m.ds.sample(n, rng_ref);
    Rng rng_x(1013);
    Tensor x_init = Tensor::randn(n, 2, rng_x, m.sigma_d);
    SamplerConfig sc;
    sc.method = SamplerMethod::ddim;
    Tensor teach_samples = solve_pfode(x_init, edm_sampling_grid(64, m.sigma_d), sc,
                                       parallel_field(teacher), m.sigma_d);
    Rng rng_m(1014);
    const double teacher_dist = energy_distance(teach_samples, ref, &rng_m);

    // sCD student
    ParamStore init = make_net_params(teacher_state.net_cfg);
    init.data = teacher_state.ema;
    TrainState st = TrainState::create_from(teacher_state.net_cfg, m.sigma_d, init);
    TrainHyper hp;
    hp.adam.lr = 2e-4;
    hp.ema_decay = 0.9995;
    hp.tangent.warmup_iters = 1000;
    Rng rng_train(1015);
    for (long it = 0; it < 8000; ++it)
        train_step(st, batch_rows(m.pool, 96, rng_train), CmMode::cd, &teacher, hp, rng_train);

    const double d1 = eval_cm_distance(st, m, 1, n, 1016);
    const double d2 = eval_cm_distance(st, m, 2, n, 1017);
    const bool pass = d2 <= d1 && d2 <= 2.0 * teacher_dist;
    return {pass, "1-step " + fmt(d1) + ", 2-step " + fmt(d2) + ", teacher-64 " + fmt(teacher_dist)};
}

// ---------- criterion 11 ----------
std::pair<bool, std::string> c11_sct_mode_coverage() {
    bool pass = true;
    std::string detail;
    for (int sd = 0; sd < 3; ++sd) {
        MixtureSetup m = mixture_pool(1100 + sd);
        NetConfig cfg;
        cfg.input_dim = 2;
        cfg.hidden = {64, 64, 64};
        Rng rng_init(1110 + sd);
        TrainState st = TrainState::create(cfg, m.sigma_d, rng_init);
        TrainHyper hp;
        hp.adam.lr = 3e-4;
        hp.ema_decay = 0.999;
        hp.tangent.warmup_iters = 1000;
        Rng rng_train(1120 + sd);
        for (long it = 0; it < 5000; ++it)
            train_step(st, batch_rows(m.pool, 128, rng_train), CmMode::ct, nullptr, hp, rng_train);

        Rng rng_s(1130 + sd);
        Tensor out = cm_sample(parallel_cm(st.consistency_fn(true)), 2, 1.1,
                               std::atan(80.0 / m.sigma_d), m.sigma_d, 2, 10000, rng_s);
        std::vector<double> mass = mode_masses(out, m.ds.mode_centers);
        double lo = 1.0, hi = 0.0;
        for (double v : mass) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        pass = pass && lo >= 0.5 / 8.0 && hi <= 2.0 / 8.0;
        detail += "s" + std::to_string(sd) + "[" + fmt(lo) + "," + fmt(hi) + "] ";
    }
    return {pass, detail + "(bounds 0.0625..0.25)"};
}

// ---------- criterion 12 ----------
std::pair<bool, std::string> c12_avsd() {
    // generator std within 3% of the data std under the analytic teacher
    Rng rng(1200);
    ToyDataset ds = make_dataset("gauss1d", 2.0, 1);
    Tensor pool = ds.sample(8192, rng);
    const double sigma_d = estimate_sigma_d(pool);
    GaussOracle oracle = make_gauss_oracle(ds, sigma_d);
    FieldFn teacher = oracle.field();

    NetConfig cfg = small_net(1, {24, 24});
    Rng rng_init(1201);
    TrainState gen = TrainState::create(cfg, sigma_d, rng_init);
    Rng rng_vsd_init(1202);
    VsdState vs = VsdState::create(cfg, sigma_d, nullptr, rng_vsd_init);
    TrainHyper hp;
    hp.adam.lr = 2e-4;
    hp.ema_decay = 0.999;
    VsdConfig vcfg;
    vcfg.aux_adam.lr = 2e-3;
    Rng rng_step(1203);
    // the fresh auxiliary model first fits the initial generator distribution
    for (int it = 0; it < 500; ++it) {
        Tensor zw(64, 1);
        for (auto& v : zw.d) v = sigma_d * rng_step.normal();
        vsd_aux_step(vs, generator_outputs(gen, zw), vcfg, rng_step, true);
    }
    for (int it = 0; it < 6000; ++it) vsd_train_step(gen, vs, teacher, 64, hp, vcfg, rng_step);

    Rng rng_eval(1204);
    Tensor zp = Tensor::randn(40000, 1, rng_eval, sigma_d);
    Tensor out = generator_outputs(gen, zp, true);
    double var = 0.0;
    for (double v : out.d) var += v * v;
    var /= double(out.size());
    const double std_err = std::abs(std::sqrt(var) - 2.0) / 2.0;

    // lambda = 0 reproduces sCD bit-exactly
    auto run = [&](bool combined) {
        Rng ri(1205);
        TrainState st = TrainState::create(cfg, sigma_d, ri);
        Rng rvi(1206);
        VsdState v2 = VsdState::create(cfg, sigma_d, nullptr, rvi);
        VsdConfig vc;
        vc.lambda = 0.0;
        TrainHyper h2;
        Rng rc(1207), rv(1208);
        for (int it = 0; it < 40; ++it) {
            Tensor x0(16, 1);
            for (int k = 0; k < 16; ++k) x0.d[k] = pool.d[size_t(it * 16 + k)];
            if (combined)
                combined_scd_vsd_step(st, v2, x0, CmMode::cd, teacher, h2, vc, rc, rv);
            else
                train_step(st, x0, CmMode::cd, &teacher, h2, rc);
        }
        return st.theta.data;
    };
    const bool bit_exact = run(true) == run(false);
    const bool pass = std_err < 0.03 && bit_exact;
    return {pass, "std err " + fmt(std_err) + ", lambda0 bit-exact " + (bit_exact ? "yes" : "no")};
}

// ---------- criterion 13 ----------
std::pair<bool, std::string> c13_stability_dichotomy() {
    MixtureSetup m = mixture_pool(1300);
    TrainState trig = train_mixture_teacher(m, 1301, 2500, {48, 48}, false);
    TrainState legacy = train_mixture_teacher(m, 1302, 2500, {48, 48}, true);

    // max over a t-grid approaching pi/2 of || dF/dt || at fixed x
    auto max_dt_norm = [&](const TrainState& st) {
        NetSlots s = net_slots(st.net_cfg);
        ParamStore p = st.theta;
        std::vector<DualTensor> pd = as_duals(p);
        Rng rng(1303);
        Tensor x = Tensor::randn(16, 2, rng, m.sigma_d);
        double worst = 0.0;
        std::vector<double> grid;
        for (double t = 0.1; t < 1.5; t += 0.1) grid.push_back(t);
        for (int k = 1; k <= 8; ++k) grid.push_back(kHalfPi - std::pow(10.0, -k));
        for (double t : grid) {
            DualTensor xd = DualTensor::constant(scale(x, 1.0 / m.sigma_d));
            DualTensor td(Tensor(16, 1, t), Tensor(16, 1, 1.0));
            DualTensor f = forward_F(st.net_cfg, s, pd, xd, td, m.sigma_d);
            for (int i = 0; i < 16; ++i) {
                double n2 = 0.0;
                for (int j = 0; j < 2; ++j) n2 += f.tangent.at(i, j) * f.tangent.at(i, j);
                worst = std::max(worst, std::sqrt(n2));
            }
        }
        return worst;
    };
    const double trig_max = max_dt_norm(trig);
    const double legacy_max = max_dt_norm(legacy);
    // boundedness of the trig mode: the analytic embedding bound
    const double embed_bound = embed_tangent_norm(trig.net_cfg.time_embed_pairs,
                                                  trig.net_cfg.fourier_scale, trig.net_cfg.freq_ratio);
    const bool pass = legacy_max > 100.0 * trig_max && std::isfinite(trig_max);
    return {pass, "trig " + fmt(trig_max) + " (emb bound " + fmt(embed_bound) + "), legacy " +
                      fmt(legacy_max)};
}

// ---------- criterion 14 ----------
std::pair<bool, std::string> c14_determinism_persistence() {
    namespace fs = std::filesystem;
    const std::string base = fs::temp_directory_path().string() + "/tf_accept_det";
    fs::remove_all(base);
    RunConfig cfg;
    cfg.dataset = "mixture2d";
    cfg.hidden = {24, 24};
    cfg.mode = "sct";
    cfg.iters = 60;
    cfg.batch = 32;
    cfg.eval_interval = 30;
    cfg.eval_samples = 256;
    cfg.n_train = 2048;
    cfg.seed = 77;
    cfg.warmup_iters = 20;

    auto slurp = [](const std::string& p) {
        std::ifstream is(p, std::ios::binary);
        std::stringstream ss;
        ss << is.rdbuf();
        return ss.str();
    };

    cfg.out_dir = base + "/a";
    RunArtifacts a = run_experiment(cfg);
    cfg.out_dir = base + "/b";
    RunArtifacts b = run_experiment(cfg);
    const bool csv_same = slurp(a.csv_path) == slurp(b.csv_path);

    // checkpoint round trip: load and re-save byte-identically
    Rng rng_state(0);
    TrainState st = load_train_state(a.ckpt_path, &rng_state);
    Checkpoint original = load_checkpoint(a.ckpt_path);
    const std::string resaved = base + "/resaved.bin";
    save_checkpoint(resaved, original);
    const bool ckpt_same = slurp(a.ckpt_path) == slurp(resaved);
    (void)st;
    fs::remove_all(base);
    const bool pass = csv_same && ckpt_same;
    return {pass, std::string("csv ") + (csv_same ? "identical" : "DIFFERS") + ", ckpt " +
                      (ckpt_same ? "identical" : "DIFFERS")};
}

} // namespace

int main() {
    std::printf("TrigFlow / sCM acceptance suite\n");
    run_criterion(1, "autodiff-correctness", c1_autodiff);
    run_criterion(2, "tangent-identity", c2_tangent_identity);
    run_criterion(3, "jvp-rearrangement", c3_rearrangement);
    run_criterion(4, "gradient-conversion", c4_grad_conversion);
    run_criterion(5, "adaptive-weight-optimum", c5_adaptive_weight);
    run_criterion(6, "sampler-orders", c6_sampler_orders);
    run_criterion(7, "schedule-equivalence", c7_schedule_equivalence);
    run_criterion(8, "attention-jvp-kernel", c8_attention_jvp);
    run_criterion(9, "discrete-to-continuous", c9_discrete_to_continuous);
    run_criterion(10, "end-to-end-distillation", c10_end_to_end_distillation);
    run_criterion(11, "sct-mode-coverage", c11_sct_mode_coverage);
    run_criterion(12, "adaptive-vsd", c12_avsd);
    run_criterion(13, "stability-dichotomy", c13_stability_dichotomy);
    run_criterion(14, "determinism-persistence", c14_determinism_persistence);

    int failures = 0;
    for (const auto& r : g_results) failures += r.pass ? 0 : 1;
    std::printf("\n%zu criteria, %d failed\n", g_results.size(), failures);
    return failures;
}
