#include "trigflow/trigflow.hpp"

#include <cmath>
#include <stdexcept>

namespace trigflow {

double clamp_time(double t) { return std::min(std::max(t, kTimeLo), kTimeHi); }

TrigTime::TrigTime(double t_) : t(t_) {
    if (!(t >= 0.0 && t <= kHalfPi)) throw std::invalid_argument("TrigTime: t outside [0, pi/2]");
    cos_t = std::cos(t);
    sin_t = std::sin(t);
}

Tensor forward_process(const Tensor& x0, const Tensor& z, const Tensor& t_col) {
    check_shape(x0, z, "forward_process");
    if (t_col.rows != x0.rows || t_col.cols != 1)
        throw std::invalid_argument("forward_process: t column is " + t_col.shape_str());
    return forward_process_t(x0, z, t_col);
}

Tensor forward_process(const Tensor& x0, const Tensor& z, double t) {
    return forward_process(x0, z, Tensor(x0.rows, 1, t));
}

Tensor velocity_target(const Tensor& x0, const Tensor& z, const Tensor& t_col) {
    check_shape(x0, z, "velocity_target");
    if (t_col.rows != x0.rows || t_col.cols != 1)
        throw std::invalid_argument("velocity_target: t column is " + t_col.shape_str());
    return velocity_target_t(x0, z, t_col);
}

Tensor velocity_target(const Tensor& x0, const Tensor& z, double t) {
    return velocity_target(x0, z, Tensor(x0.rows, 1, t));
}

Tensor cm_output(const NetConfig& cfg, const ParamStore& params, const Tensor& x_t,
                 const Tensor& t_col, double sigma_d) {
    NetSlots s = net_slots(cfg);
    return cm_output_t(cfg, s, as_tensors(params), x_t, t_col, sigma_d);
}

double diffusion_loss(const NetConfig& cfg, const ParamStore& params, const Tensor& x0,
                      const Tensor& z, const Tensor& t_col, double sigma_d) {
    NetSlots s = net_slots(cfg);
    Tensor x_t = forward_process(x0, z, t_col);
    Tensor v_t = velocity_target(x0, z, t_col);
    return diffusion_loss_t(cfg, s, as_tensors(params), x_t, v_t, t_col, sigma_d).item();
}

double sample_t(const ProposalParams& prop, double sigma_d, Rng& rng) {
    if (prop.p_std <= 0.0) throw std::invalid_argument("sample_t: p_std must be positive");
    const double tau = rng.normal(prop.p_mean, prop.p_std);
    return clamp_time(std::atan(std::exp(tau) / sigma_d));
}

Tensor sample_t_col(const ProposalParams& prop, double sigma_d, int n, Rng& rng) {
    Tensor t(n, 1);
    for (int i = 0; i < n; ++i) t.d[i] = sample_t(prop, sigma_d, rng);
    return t;
}

TrigPoint edm_to_trigflow(double sigma, const Tensor& x_sigma, double sigma_d) {
    if (sigma < 0.0) throw std::invalid_argument("edm_to_trigflow: sigma < 0");
    const double t = std::atan(sigma / sigma_d);
    return {t, scale(x_sigma, std::cos(t))};
}

double edm_sigma_from_t(double t, double sigma_d) { return sigma_d * std::tan(t); }

TrigPoint schedule_to_trigflow(const GenericSchedule& sched, double t_orig, const Tensor& x_orig) {
    const double a = sched.alpha(t_orig);
    const double s = sched.sigma(t_orig);
    if (a <= 0.0) throw std::invalid_argument("schedule_to_trigflow: alpha(t) <= 0 at interior t");
    const double t_hat = std::atan(s / a);
    return {t_hat, scale(x_orig, 1.0 / std::sqrt(a * a + s * s))};
}

double snr(double t) {
    if (!(t > 0.0 && t < kHalfPi)) throw std::invalid_argument("snr: t outside (0, pi/2)");
    const double tn = std::tan(t);
    return 1.0 / (tn * tn);
}

FieldFn net_field(const NetConfig& cfg, const ParamStore& params, double sigma_d) {
    NetSlots s = net_slots(cfg);
    std::vector<Tensor> p = as_tensors(params);
    return [cfg, s, p = std::move(p), sigma_d](const Tensor& u, const Tensor& t_col) {
        return forward_F(cfg, s, p, u, t_col, sigma_d);
    };
}

FieldFn net_field_flat(const NetConfig& cfg, std::vector<double> flat, double sigma_d) {
    ParamStore store = make_net_params(cfg);
    if (flat.size() != store.data.size())
        throw std::invalid_argument("net_field_flat: parameter count mismatch");
    store.data = std::move(flat);
    return net_field(cfg, store, sigma_d);
}

} // namespace trigflow
