#include "trigflow/samplers.hpp"

#include <cmath>
#include <stdexcept>

namespace trigflow {

SamplerMethod parse_sampler_method(const std::string& name) {
    if (name == "ddim") return SamplerMethod::ddim;
    if (name == "dpm2") return SamplerMethod::dpm2;
    if (name == "dpmpp2") return SamplerMethod::dpmpp2;
    throw std::invalid_argument("unknown sampler method: " + name);
}

std::string sampler_method_name(SamplerMethod m) {
    switch (m) {
        case SamplerMethod::ddim: return "ddim";
        case SamplerMethod::dpm2: return "dpm2";
        case SamplerMethod::dpmpp2: return "dpmpp2";
    }
    return "?";
}

TimeGrid edm_sampling_grid(int steps, double sigma_d, double sigma_min, double sigma_max,
                           double rho, double t_min) {
    if (steps < 1) throw std::invalid_argument("edm_sampling_grid: steps < 1");
    TimeGrid g;
    g.times.reserve(size_t(steps) + 1);
    for (int i = 0; i < steps; ++i) {
        const double u = steps > 1 ? double(i) / double(steps - 1) : 0.0;
        const double sigma = std::pow(std::pow(sigma_max, 1.0 / rho) +
                                          u * (std::pow(sigma_min, 1.0 / rho) - std::pow(sigma_max, 1.0 / rho)),
                                      rho);
        g.times.push_back(std::atan(sigma / sigma_d));
    }
    g.times.push_back(t_min);
    return g;
}

TimeGrid uniform_grid(int steps, double t_max, double t_min) {
    if (steps < 1) throw std::invalid_argument("uniform_grid: steps < 1");
    TimeGrid g;
    for (int i = 0; i <= steps; ++i)
        g.times.push_back(t_max + (t_min - t_max) * double(i) / double(steps));
    return g;
}

static Tensor eval_field(const Tensor& x, double t, const FieldFn& f, double sigma_d) {
    return f(scale(x, 1.0 / sigma_d), Tensor(x.rows, 1, t));
}

Tensor eps_prediction(const Tensor& x, double t, const FieldFn& f, double sigma_d) {
    // eps(x,t) = sin(t) x + cos(t) sigma_d F
    return add(scale(x, std::sin(t)), scale(eval_field(x, t, f, sigma_d), std::cos(t) * sigma_d));
}

Tensor data_prediction(const Tensor& x, double t, const FieldFn& f, double sigma_d) {
    // D(x,t) = cos(t) x - sin(t) sigma_d F
    return sub(scale(x, std::cos(t)), scale(eval_field(x, t, f, sigma_d), std::sin(t) * sigma_d));
}

Tensor ddim_step(const Tensor& x_s, double s, double t, const FieldFn& f, double sigma_d) {
    if (t > s) throw std::invalid_argument("ddim_step: requires t <= s");
    return sub(scale(x_s, std::cos(s - t)),
               scale(eval_field(x_s, s, f, sigma_d), std::sin(s - t) * sigma_d));
}

double logtan_ratio(double s, double t, double s_prev) {
    const double ls = std::log(std::tan(clamp_time(s)));
    const double lt = std::log(std::tan(clamp_time(t)));
    const double lp = std::log(std::tan(clamp_time(s_prev)));
    const double r = (lp - ls) / (ls - lt);
    if (!std::isfinite(r) || r == 0.0)
        throw std::invalid_argument("logtan_ratio: degenerate ratio (s_prev == s?)");
    return r;
}

Tensor dpm2_step(const Tensor& x_s, double s, double t, double s_prev,
                 const Tensor& eps_prev, const FieldFn& f, double sigma_d) {
    if (t > s) throw std::invalid_argument("dpm2_step: requires t <= s");
    const double r = logtan_ratio(s, t, s_prev);
    Tensor base = ddim_step(x_s, s, t, f, sigma_d);
    Tensor corr = sub(eps_prev, eps_prediction(x_s, s, f, sigma_d));
    return add(base, scale(corr, std::sin(s - t) / (2.0 * r * std::cos(s))));
}

Tensor dpmpp2_step(const Tensor& x_s, double s, double t, double s_prev,
                   const Tensor& d_prev, const FieldFn& f, double sigma_d) {
    if (t > s) throw std::invalid_argument("dpmpp2_step: requires t <= s");
    const double r = logtan_ratio(s, t, s_prev);
    Tensor base = ddim_step(x_s, s, t, f, sigma_d);
    Tensor corr = sub(d_prev, data_prediction(x_s, s, f, sigma_d));
    return sub(base, scale(corr, std::sin(s - t) / (2.0 * r * std::sin(s))));
}

Tensor solve_pfode(const Tensor& x_init, const TimeGrid& grid, const SamplerConfig& cfg,
                   const FieldFn& f, double sigma_d) {
    Tensor x = x_init;
    for (size_t i = 0; i + 1 < grid.times.size(); ++i) {
        const double s = grid.times[i];
        const double t = grid.times[i + 1];
        if (t >= s) throw std::invalid_argument("solve_pfode: grid must strictly decrease");
        const bool last_to_zero = t < kTimeLo / 10.0;
        if (cfg.method == SamplerMethod::ddim || last_to_zero) {
            x = ddim_step(x, s, t, f, sigma_d);
        } else {
            // intermediate point at the log-tan midpoint, reached by DDIM
            const double mid = std::atan(std::sqrt(std::tan(clamp_time(s)) * std::tan(clamp_time(t))));
            Tensor u = ddim_step(x, s, mid, f, sigma_d);
            if (cfg.method == SamplerMethod::dpm2) {
                x = dpm2_step(x, s, t, mid, eps_prediction(u, mid, f, sigma_d), f, sigma_d);
            } else {
                x = dpmpp2_step(x, s, t, mid, data_prediction(u, mid, f, sigma_d), f, sigma_d);
            }
        }
        if (!x.all_finite())
            throw std::runtime_error("solve_pfode: non-finite state after step " + std::to_string(i) +
                                     " (t=" + std::to_string(t) + ")");
    }
    return x;
}

CmFn cm_fn_from_field(const FieldFn& f, double sigma_d) {
    return [f, sigma_d](const Tensor& x, const Tensor& t_col) {
        const int d = x.cols;
        Tensor fv = f(scale(x, 1.0 / sigma_d), t_col);
        return sub(mul(bcast_col(vcos(t_col), d), x), scale(mul(bcast_col(vsin(t_col), d), fv), sigma_d));
    };
}

Tensor cm_sample(const CmFn& f_cm, int n_steps, double t_mid, double t_max,
                 double sigma_d, int dim, int n, Rng& rng) {
    if (n_steps != 1 && n_steps != 2) throw std::invalid_argument("cm_sample: n_steps must be 1 or 2");
    Tensor x = Tensor::randn(n, dim, rng, sigma_d);
    Tensor out = f_cm(x, Tensor(n, 1, t_max));
    if (n_steps == 2) {
        Tensor z = Tensor::randn(n, dim, rng, sigma_d);
        Tensor x_mid = forward_process(out, z, t_mid);
        out = f_cm(x_mid, Tensor(n, 1, t_mid));
    }
    return out;
}

} // namespace trigflow
