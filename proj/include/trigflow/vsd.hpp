// Adaptive variational score distillation: auxiliary diffusion model fit to
// generator outputs, generator update through the detached score difference,
// and the combined sCD+VSD objective. The one-step generator is the CM at
// t = pi/2: g(z') = -sigma_d F(z'/sigma_d, pi/2).
#pragma once

#include "trigflow/cm_train.hpp"

namespace trigflow {

struct VsdConfig {
    double lambda = 1.0;                     // weight of L_VSD in the combined objective
    ProposalParams gen_proposal{0.4, 2.0};   // t proposal for L_VSD
    ProposalParams aux_proposal{-1.0, 1.4};  // t proposal for the auxiliary diffusion loss
    AdamConfig aux_adam{1e-4, 0.9, 0.99, 1e-11};
    double wpsi_lr = 3e-3;
};

struct VsdState {
    NetConfig net_cfg;
    WeightNetConfig wcfg;
    ParamStore phi_aux; // auxiliary diffusion model, trained without EMA
    ParamStore wpsi;    // adaptive weight for L_VSD
    AdamMoments opt_aux, opt_wpsi;
    double sigma_d = 1.0;

    static VsdState create(const NetConfig& cfg, double sigma_d, const ParamStore* init_from, Rng& rng);
    FieldFn aux_field() const;
};

// generator value g_theta(z') = -sigma_d F_theta(z'/sigma_d, pi/2), plain eval;
// training uses the live weights, evaluation usually the EMA copy
Tensor generator_outputs(const TrainState& gen, const Tensor& z_prime, bool use_ema = false);

// diffusion loss on x0 = gen_x0 (already detached); gradients flow only to
// phi_aux. Applies one Adam update when `update` is set; returns the loss.
double vsd_aux_step(VsdState& vs, const Tensor& gen_x0, const VsdConfig& cfg, Rng& rng, bool update);

// value of L_VSD at the current parameters; teacher may be analytic
double vsd_generator_loss_value(const TrainState& gen, const VsdState& vs, const FieldFn& teacher,
                                const Tensor& z_prime, const Tensor& z, const Tensor& t_col);

// training gradients of L_VSD w.r.t. (theta, w_psi) with the score difference
// detached, exactly as the combined step computes them
std::pair<std::vector<double>, std::vector<double>> vsd_generator_grads(
    const TrainState& gen, const VsdState& vs, const FieldFn& teacher, const Tensor& z_prime,
    const Tensor& z, const Tensor& t_col);

// one combined update: (theta, w_phi, w_psi) from scm + lambda * L_VSD on a
// single tape, then one phi_aux update. lambda == 0 skips every VSD draw and
// update, reproducing plain sCD bit-exactly under matched seeds.
StepMetrics combined_scd_vsd_step(TrainState& gen, VsdState& vs, const Tensor& x0, CmMode mode,
                                  const FieldFn& teacher, const TrainHyper& hp, const VsdConfig& vcfg,
                                  Rng& rng_cm, Rng& rng_vsd);

// pure VSD: generator trained by L_VSD alone plus the alternating aux update
double vsd_train_step(TrainState& gen, VsdState& vs, const FieldFn& teacher, int batch,
                      const TrainHyper& hp, const VsdConfig& vcfg, Rng& rng_vsd);

} // namespace trigflow
