// TrigFlow frame: x_t = cos(t) x0 + sin(t) z with z ~ N(0, sigma_d^2 I),
// t in [0, pi/2]. Velocity target, CM parameterization, diffusion objective,
// log-normal time proposal and conversions from EDM / generic schedules.
#pragma once

#include <functional>

#include "trigflow/net.hpp"
#include "trigflow/netops.hpp"
#include "trigflow/rng.hpp"

namespace trigflow {

constexpr double kHalfPi = 1.5707963267948966192313216916398;
// clamp applied wherever tan(t) or 1/sin(t) enters
constexpr double kTimeLo = 1e-5;
constexpr double kTimeHi = kHalfPi - 1e-5;

double clamp_time(double t);

struct DataStats {
    double sigma_d = 1.0;
    int dim = 1;
};

struct TrigTime {
    double t;
    double cos_t, sin_t;
    explicit TrigTime(double t_);
    double tan() const { return sin_t / cos_t; }
};

struct ProposalParams {
    double p_mean = -1.0;
    double p_std = 1.4;
};

// schedule with z ~ N(0, sigma_d^2 I); alpha(0)=1, sigma(0)=0,
// alpha/sigma monotone decreasing
struct GenericSchedule {
    std::function<double(double)> alpha;
    std::function<double(double)> sigma;
};

// evaluation of a diffusion field F(x/sigma_d, t) -> [B, D]
using FieldFn = std::function<Tensor(const Tensor& x_over_sigma, const Tensor& t_col)>;

// ---- mode-generic kernels (t as a [B,1] column) ----

template <class T>
T forward_process_t(const T& x0, const T& z, const T& t_col) {
    const int d = ncols(x0);
    return add(mul(bcast_col(vcos(t_col), d), x0), mul(bcast_col(vsin(t_col), d), z));
}

template <class T>
T velocity_target_t(const T& x0, const T& z, const T& t_col) {
    const int d = ncols(x0);
    return sub(mul(bcast_col(vcos(t_col), d), z), mul(bcast_col(vsin(t_col), d), x0));
}

// f_theta(x_t, t) = cos(t) x_t - sin(t) sigma_d F(x_t / sigma_d, t)
template <class T>
T cm_output_t(const NetConfig& cfg, const NetSlots& s, const std::vector<T>& P,
              const T& x_t, const T& t_col, double sigma_d) {
    const int d = ncols(x_t);
    T f = forward_F(cfg, s, P, scale(x_t, 1.0 / sigma_d), t_col, sigma_d);
    return sub(mul(bcast_col(vcos(t_col), d), x_t), scale(mul(bcast_col(vsin(t_col), d), f), sigma_d));
}

// mean over the batch of || sigma_d F - v_t ||^2
template <class T>
T diffusion_loss_t(const NetConfig& cfg, const NetSlots& s, const std::vector<T>& P,
                   const T& x_t, const T& v_t, const T& t_col, double sigma_d) {
    T f = forward_F(cfg, s, P, scale(x_t, 1.0 / sigma_d), t_col, sigma_d);
    return mean_all(sumsq_rows(sub(scale(f, sigma_d), v_t)));
}

// ---- Tensor-level convenience ----

Tensor forward_process(const Tensor& x0, const Tensor& z, const Tensor& t_col);
Tensor forward_process(const Tensor& x0, const Tensor& z, double t);
Tensor velocity_target(const Tensor& x0, const Tensor& z, const Tensor& t_col);
Tensor velocity_target(const Tensor& x0, const Tensor& z, double t);

Tensor cm_output(const NetConfig& cfg, const ParamStore& params, const Tensor& x_t,
                 const Tensor& t_col, double sigma_d);

double diffusion_loss(const NetConfig& cfg, const ParamStore& params, const Tensor& x0,
                      const Tensor& z, const Tensor& t_col, double sigma_d);

// tau ~ N(p_mean, p_std^2), t = arctan(e^tau / sigma_d), clamped into
// (kTimeLo, kTimeHi)
double sample_t(const ProposalParams& prop, double sigma_d, Rng& rng);
Tensor sample_t_col(const ProposalParams& prop, double sigma_d, int n, Rng& rng);

struct TrigPoint {
    double t;
    Tensor x;
};

// EDM (x_sigma, sigma) -> TrigFlow (x_t, t): t = arctan(sigma/sigma_d),
// x_t = cos(t) x_sigma
TrigPoint edm_to_trigflow(double sigma, const Tensor& x_sigma, double sigma_d);
double edm_sigma_from_t(double t, double sigma_d); // sigma_d * tan(t)

// generic (alpha_t, sigma_t) -> TrigFlow: t_hat = arctan(sigma/alpha),
// x_hat = x / sqrt(alpha^2 + sigma^2); throws when alpha <= 0
TrigPoint schedule_to_trigflow(const GenericSchedule& sched, double t_orig, const Tensor& x_orig);

// 1/tan^2(t); throws outside (0, pi/2)
double snr(double t);

// field backed by a parameter store (optionally the EMA copy)
FieldFn net_field(const NetConfig& cfg, const ParamStore& params, double sigma_d);
FieldFn net_field_flat(const NetConfig& cfg, std::vector<double> flat, double sigma_d);

} // namespace trigflow
