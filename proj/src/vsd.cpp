#include "trigflow/vsd.hpp"

#include <cmath>
#include <stdexcept>

namespace trigflow {

VsdState VsdState::create(const NetConfig& cfg, double sigma_d, const ParamStore* init_from, Rng& rng) {
    VsdState vs;
    vs.net_cfg = cfg;
    vs.sigma_d = sigma_d;
    vs.phi_aux = make_net_params(cfg);
    if (init_from) {
        if (vs.phi_aux.data.size() != init_from->data.size())
            throw std::invalid_argument("VsdState::create: init parameter count mismatch");
        vs.phi_aux.data = init_from->data;
    } else {
        init_net_params(vs.phi_aux, cfg, rng);
    }
    vs.wpsi = make_weight_net_params(vs.wcfg);
    vs.opt_aux.init(vs.phi_aux.data.size());
    vs.opt_wpsi.init(vs.wpsi.data.size());
    return vs;
}

FieldFn VsdState::aux_field() const { return net_field(net_cfg, phi_aux, sigma_d); }

Tensor generator_outputs(const TrainState& gen, const Tensor& z_prime, bool use_ema) {
    NetSlots slots = net_slots(gen.net_cfg);
    ParamStore store = gen.theta;
    if (use_ema) store.data = gen.ema;
    std::vector<Tensor> p = as_tensors(store);
    Tensor t_half(z_prime.rows, 1, kHalfPi);
    Tensor f = forward_F(gen.net_cfg, slots, p, scale(z_prime, 1.0 / gen.sigma_d), t_half, gen.sigma_d);
    return scale(f, -gen.sigma_d);
}

double vsd_aux_step(VsdState& vs, const Tensor& gen_x0, const VsdConfig& cfg, Rng& rng, bool update) {
    const int b = gen_x0.rows, d = gen_x0.cols;
    Tensor t_col(b, 1), z(b, d);
    for (int i = 0; i < b; ++i) {
        t_col.d[i] = sample_t(cfg.aux_proposal, vs.sigma_d, rng);
        for (int j = 0; j < d; ++j) z.at(i, j) = vs.sigma_d * rng.normal();
    }
    Tensor x_t = forward_process(gen_x0, z, t_col);
    Tensor v_t = velocity_target(gen_x0, z, t_col);
    NetSlots slots = net_slots(vs.net_cfg);

    Tape tape;
    std::vector<Var> aux = as_leaves(vs.phi_aux, tape);
    Var loss = diffusion_loss_t(vs.net_cfg, slots, aux, tape.constant(x_t), tape.constant(v_t),
                                tape.constant(t_col), vs.sigma_d);
    const double loss_val = loss.val().item();
    if (update) {
        tape.backward(loss);
        std::vector<double> g = flat_grads(tape, aux);
        vs.opt_aux.step(vs.phi_aux.data, g, cfg.aux_adam, cfg.aux_adam.lr);
    }
    return loss_val;
}

namespace {
// || g(z') - stopgrad(g(z')) + F_pretrain - F_phi ||^2 with adaptive weight
// w_psi; score difference built at x_t = diffusion of the detached generator
Var build_vsd_loss(Tape& tape, const TrainState& gen, const VsdState& vs,
                   const std::vector<Var>& theta_leaves, const std::vector<Var>& wpsi_leaves,
                   const FieldFn& teacher, const Tensor& z_prime, const Tensor& z,
                   const Tensor& t_col) {
    const int d = z_prime.cols;
    Tensor gz_minus = generator_outputs(gen, z_prime);
    Tensor x_t = forward_process(gz_minus, z, t_col);
    Tensor u = scale(x_t, 1.0 / gen.sigma_d);
    Tensor score_diff = sub(teacher(u, t_col), vs.aux_field()(u, t_col));

    NetSlots slots = net_slots(gen.net_cfg);
    Var zv = tape.constant(scale(z_prime, 1.0 / gen.sigma_d));
    Var tv_half = tape.constant(Tensor(z_prime.rows, 1, kHalfPi));
    Var f = forward_F(gen.net_cfg, slots, theta_leaves, zv, tv_half, gen.sigma_d);
    Var gvar = scale(f, -gen.sigma_d);
    Var resid = add(sub(gvar, stopgrad(gvar)), tape.constant(score_diff));
    Var w = weight_net_forward(vs.wcfg, wpsi_leaves, tape.constant(t_col));
    Var per = sub(mul(vexp(w), scale(sumsq_rows(resid), 1.0 / double(d))), w);
    return mean_all(per);
}

struct VsdDraws {
    Tensor z_prime, z, t_col;
};
VsdDraws draw_vsd_batch(int b, int d, double sigma_d, const ProposalParams& prop, Rng& rng) {
    VsdDraws dr{Tensor(b, d), Tensor(b, d), Tensor(b, 1)};
    for (int i = 0; i < b; ++i) {
        dr.t_col.d[i] = sample_t(prop, sigma_d, rng);
        for (int j = 0; j < d; ++j) {
            dr.z_prime.at(i, j) = sigma_d * rng.normal();
            dr.z.at(i, j) = sigma_d * rng.normal();
        }
    }
    return dr;
}
} // namespace

double vsd_generator_loss_value(const TrainState& gen, const VsdState& vs, const FieldFn& teacher,
                                const Tensor& z_prime, const Tensor& z, const Tensor& t_col) {
    Tape tape;
    std::vector<Var> th = as_leaves(gen.theta, tape);
    std::vector<Var> ps = as_leaves(vs.wpsi, tape);
    Var loss = build_vsd_loss(tape, gen, vs, th, ps, teacher, z_prime, z, t_col);
    return loss.val().item();
}

std::pair<std::vector<double>, std::vector<double>> vsd_generator_grads(
    const TrainState& gen, const VsdState& vs, const FieldFn& teacher, const Tensor& z_prime,
    const Tensor& z, const Tensor& t_col) {
    Tape tape;
    std::vector<Var> th = as_leaves(gen.theta, tape);
    std::vector<Var> ps = as_leaves(vs.wpsi, tape);
    Var loss = build_vsd_loss(tape, gen, vs, th, ps, teacher, z_prime, z, t_col);
    tape.backward(loss);
    return {flat_grads(tape, th), flat_grads(tape, ps)};
}

StepMetrics combined_scd_vsd_step(TrainState& gen, VsdState& vs, const Tensor& x0, CmMode mode,
                                  const FieldFn& teacher, const TrainHyper& hp, const VsdConfig& vcfg,
                                  Rng& rng_cm, Rng& rng_vsd) {
    if (vcfg.lambda == 0.0) return train_step(gen, x0, mode, &teacher, hp, rng_cm);

    CmBatch batch = prepare_cm_batch(gen, x0, mode, &teacher, hp, rng_cm);
    VsdDraws dr = draw_vsd_batch(x0.rows, x0.cols, gen.sigma_d, vcfg.gen_proposal, rng_vsd);

    Tape tape;
    std::vector<Var> th = as_leaves(gen.theta, tape);
    std::vector<Var> wp = as_leaves(gen.wphi, tape);
    std::vector<Var> ps = as_leaves(vs.wpsi, tape);
    Var cm_loss = build_scm_loss_tape(tape, gen, th, wp, batch);
    Var vsd_loss = build_vsd_loss(tape, gen, vs, th, ps, teacher, dr.z_prime, dr.z, dr.t_col);
    Var total = add(cm_loss, scale(vsd_loss, vcfg.lambda));
    const double loss_val = total.val().item();
    if (!std::isfinite(loss_val))
        throw std::runtime_error("combined_scd_vsd_step: non-finite loss at iter " + std::to_string(gen.iters));

    tape.backward(total);
    std::vector<double> gth = flat_grads(tape, th);
    std::vector<double> gwp = flat_grads(tape, wp);
    std::vector<double> gps = flat_grads(tape, ps);
    gen.opt_theta.step(gen.theta.data, gth, hp.adam, hp.adam.lr);
    gen.opt_wphi.step(gen.wphi.data, gwp, hp.adam, hp.wphi_lr);
    vs.opt_wpsi.step(vs.wpsi.data, gps, hp.adam, vcfg.wpsi_lr);
    gen.iters += 1;
    ema_update(gen.ema, gen.theta.data, hp.ema_decay);

    // one auxiliary update per generator update, on fresh generator samples
    Tensor z2(x0.rows, x0.cols);
    for (auto& v : z2.d) v = gen.sigma_d * rng_vsd.normal();
    vsd_aux_step(vs, generator_outputs(gen, z2), vcfg, rng_vsd, true);

    return cm_metrics(gen, batch, loss_val);
}

double vsd_train_step(TrainState& gen, VsdState& vs, const FieldFn& teacher, int batch,
                      const TrainHyper& hp, const VsdConfig& vcfg, Rng& rng_vsd) {
    const int d = gen.net_cfg.input_dim;
    VsdDraws dr = draw_vsd_batch(batch, d, gen.sigma_d, vcfg.gen_proposal, rng_vsd);

    Tape tape;
    std::vector<Var> th = as_leaves(gen.theta, tape);
    std::vector<Var> ps = as_leaves(vs.wpsi, tape);
    Var loss = build_vsd_loss(tape, gen, vs, th, ps, teacher, dr.z_prime, dr.z, dr.t_col);
    const double loss_val = loss.val().item();
    if (!std::isfinite(loss_val))
        throw std::runtime_error("vsd_train_step: non-finite loss at iter " + std::to_string(gen.iters));

    tape.backward(loss);
    std::vector<double> gth = flat_grads(tape, th);
    std::vector<double> gps = flat_grads(tape, ps);
    gen.opt_theta.step(gen.theta.data, gth, hp.adam, hp.adam.lr);
    vs.opt_wpsi.step(vs.wpsi.data, gps, hp.adam, vcfg.wpsi_lr);
    gen.iters += 1;
    ema_update(gen.ema, gen.theta.data, hp.ema_decay);

    Tensor z2(batch, d);
    for (auto& v : z2.d) v = gen.sigma_d * rng_vsd.normal();
    vsd_aux_step(vs, generator_outputs(gen, z2), vcfg, rng_vsd, true);
    return loss_val;
}

} // namespace trigflow
