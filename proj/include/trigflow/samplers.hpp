// PF-ODE solvers in TrigFlow notation: DDIM, single-step second-order
// DPM-Solver / DPM-Solver++ (intermediate point at the log-tan midpoint),
// plus 1- and 2-step consistency sampling.
#pragma once

#include "trigflow/trigflow.hpp"

namespace trigflow {

enum class SamplerMethod { ddim, dpm2, dpmpp2 };

struct SamplerConfig {
    SamplerMethod method = SamplerMethod::ddim;
    int steps = 64;
    double t_max = std::atan(80.0); // arctan(sigma_max / sigma_d), caller fills
    double t_min = 0.0;
};

struct TimeGrid {
    std::vector<double> times; // strictly decreasing, t_max .. t_min
};

SamplerMethod parse_sampler_method(const std::string& name);
std::string sampler_method_name(SamplerMethod m);

// EDM spacing sigma_i = (smax^(1/rho) + i/(n-1) (smin^(1/rho)-smax^(1/rho)))^rho
// mapped through t = arctan(sigma/sigma_d); appends t_min as the endpoint
TimeGrid edm_sampling_grid(int steps, double sigma_d, double sigma_min = 0.002,
                           double sigma_max = 80.0, double rho = 7.0, double t_min = 0.0);
TimeGrid uniform_grid(int steps, double t_max, double t_min);

// epsilon / data prediction helpers (Tensor-level, scalar time)
Tensor eps_prediction(const Tensor& x, double t, const FieldFn& f, double sigma_d);
Tensor data_prediction(const Tensor& x, double t, const FieldFn& f, double sigma_d);

// x_t = cos(s-t) x_s - sin(s-t) sigma_d F(x_s/sigma_d, s); requires t <= s
Tensor ddim_step(const Tensor& x_s, double s, double t, const FieldFn& f, double sigma_d);

// second-order correction reusing eps at another time s_prev (either a
// genuинely previous point s_prev > s or an intermediate point in (t, s));
// r = (log tan s_prev - log tan s) / (log tan s - log tan t)
Tensor dpm2_step(const Tensor& x_s, double s, double t, double s_prev,
                 const Tensor& eps_prev, const FieldFn& f, double sigma_d);
Tensor dpmpp2_step(const Tensor& x_s, double s, double t, double s_prev,
                   const Tensor& d_prev, const FieldFn& f, double sigma_d);

// log-tan ratio used by both second-order steppers
double logtan_ratio(double s, double t, double s_prev);

// walks the grid with the configured stepper; second-order steps place the
// extra evaluation at the log-tan midpoint (Heun-style predictor by DDIM);
// steps into t < kTimeLo/10 fall back to DDIM (zero-SNR safe)
Tensor solve_pfode(const Tensor& x_init, const TimeGrid& grid, const SamplerConfig& cfg,
                   const FieldFn& f, double sigma_d);

// consistency sampling; f_cm maps (x, t_col) -> x0 estimate
using CmFn = std::function<Tensor(const Tensor& x, const Tensor& t_col)>;

CmFn cm_fn_from_field(const FieldFn& f, double sigma_d);

// n_steps in {1,2}; 2-step re-noises the 1-step output to t_mid with fresh z
Tensor cm_sample(const CmFn& f_cm, int n_steps, double t_mid, double t_max,
                 double sigma_d, int dim, int n, Rng& rng);

} // namespace trigflow
