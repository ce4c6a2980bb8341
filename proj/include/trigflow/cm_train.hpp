// Continuous-time consistency training / distillation: PF-ODE tangent
// estimation, rearranged JVP, tangent normalization and warmup, adaptive
// weighting, the MSE-form objective, and the discrete-time variant on an
// EDM-spaced grid.
#pragma once

#include "trigflow/samplers.hpp"
#include "trigflow/trigflow.hpp"

namespace trigflow {

enum class CmMode { ct, cd };

enum class TangentMode { normalize, clip, raw };

struct TangentConfig {
    double c = 0.1;
    long warmup_iters = 10000;
    TangentMode mode = TangentMode::normalize;
};

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double eps = 1e-11;
};

struct TrainHyper {
    AdamConfig adam;              // theta
    double wphi_lr = 3e-3;        // adaptive weight head
    TangentConfig tangent;
    ProposalParams proposal{-1.0, 1.4};
    double ema_decay = 0.9999;
};

struct AdamMoments {
    std::vector<double> m, v;
    long t = 0;
    void init(size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        t = 0;
    }
    void step(std::vector<double>& params, const std::vector<double>& grad, const AdamConfig& cfg, double lr);
};

struct TrainState {
    NetConfig net_cfg;
    WeightNetConfig wcfg;
    ParamStore theta;
    ParamStore wphi;
    std::vector<double> ema;
    AdamMoments opt_theta, opt_wphi;
    long iters = 0;
    double sigma_d = 1.0;

    static TrainState create(const NetConfig& cfg, double sigma_d, Rng& rng);
    static TrainState create_from(const NetConfig& cfg, double sigma_d, const ParamStore& init_theta);

    FieldFn field(bool use_ema = false) const;
    CmFn consistency_fn(bool use_ema = true) const;
    double weight_at(double t) const; // w_phi(t), plain eval
};

struct StepMetrics {
    double loss = 0.0;
    double g_mean = 0.0, g_max = 0.0; // raw tangent norms before normalization
    double w_min = 0.0, w_mean = 0.0, w_max = 0.0;
    double r = 1.0;
};

// dx_t/dt estimate: ct -> cos(t) z - sin(t) x0 ; cd -> sigma_d F_teacher
Tensor pfode_estimate(CmMode mode, const Tensor& x0, const Tensor& z, const Tensor& t_col,
                      const FieldFn* teacher, double sigma_d);

// g = -cos^2(t)(sigma_d F - dx/dt) - r cos(t) sin(t)(x_t + sigma_d dF/dt)
// with the sigma_d dF/dt term obtained from the rearranged JVP: F evaluated
// at (x_t/sigma_d, t) with tangent (cos sin dx/dt, cos sin sigma_d)
Tensor tangent_g(const NetConfig& cfg, const ParamStore& theta_minus, const Tensor& x_t,
                 const Tensor& t_col, const Tensor& dxdt, double r, double sigma_d);

// same quantity via the naive association: JVP of x -> F(x/sigma_d, t)
// along (dx/dt, 1), scaled afterwards; used to validate the rearrangement
Tensor tangent_g_naive(const NetConfig& cfg, const ParamStore& theta_minus, const Tensor& x_t,
                       const Tensor& t_col, const Tensor& dxdt, double r, double sigma_d);

Tensor normalize_tangent(const Tensor& g, const TangentConfig& cfg);

// loss value at the current parameters (no gradient): mean over the batch of
// e^{w(t)}/D ||F - F^- - g||^2 - w(t); F - F^- vanishes in value
double scm_loss_value(const TrainState& st, const Tensor& x_t, const Tensor& t_col, const Tensor& g);

// pieces shared with the combined sCD+VSD objective
struct CmBatch {
    Tensor x_t, t_col;
    Tensor g;     // normalized tangent fed to the loss
    Tensor g_raw; // pre-normalization, for metrics
    double r = 1.0;
};
CmBatch prepare_cm_batch(const TrainState& st, const Tensor& x0, CmMode mode, const FieldFn* teacher,
                         const TrainHyper& hp, Rng& rng);
Var build_scm_loss_tape(Tape& tape, const TrainState& st, const std::vector<Var>& theta_leaves,
                        const std::vector<Var>& wphi_leaves, const CmBatch& batch);
StepMetrics cm_metrics(const TrainState& st, const CmBatch& batch, double loss);
std::vector<double> flat_grads(Tape& tape, const std::vector<Var>& leaves);

// one sCT/sCD update of (theta, w_phi) + EMA
StepMetrics train_step(TrainState& st, const Tensor& x0, CmMode mode, const FieldFn* teacher,
                       const TrainHyper& hp, Rng& rng);

void ema_update(std::vector<double>& ema, const std::vector<double>& theta, double decay);

struct DiscreteGrid {
    std::vector<double> times;   // t_0 = 0 < t_1 < ... < t_N
    std::vector<double> weights; // categorical over intervals i = 1..N, sums to 1
    int sample_index(Rng& rng) const; // in [1, N]
};

// EDM spacing over [0, pi/2]; weights are the log-normal proposal mass per cell
DiscreteGrid edm_time_grid(int n, double sigma_d, const ProposalParams& prop,
                           double rho = 7.0, double sigma_min = 0.002, double sigma_max = 80.0);

// finite-difference tangent from one teacher DDIM step t -> t';
// expanded two-term form with warmup factor r on the sin(t') term
Tensor dscd_delta(const NetConfig& cfg, const ParamStore& theta_minus, const FieldFn& teacher,
                  const Tensor& x_t, double t, double t_prime, double r, double sigma_d);

// batched rows with per-row (t, t')
Tensor dscd_delta_rows(const NetConfig& cfg, const ParamStore& theta_minus, const FieldFn& teacher,
                       const Tensor& x_t, const Tensor& t_col, const Tensor& tp_col, double r,
                       double sigma_d);

StepMetrics dscd_train_step(TrainState& st, const Tensor& x0, const DiscreteGrid& grid,
                            const FieldFn& teacher, const TrainHyper& hp, Rng& rng);

// plain diffusion training step (teacher pretraining), velocity-matching objective
double diffusion_train_step(TrainState& st, const Tensor& x0, const TrainHyper& hp, Rng& rng);

// standard normal CDF (shared by grid weights and tests)
double normal_cdf(double x);

} // namespace trigflow
