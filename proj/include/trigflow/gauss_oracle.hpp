// Closed-form quantities for zero-mean Gaussian data with diagonal covariance
// under the TrigFlow process. For joint Gaussians E[v_t | x_t] =
// Cov(v,x) Var(x)^{-1} x_t, which per coordinate j gives
//   E[v|x]_j = sin(t)cos(t) (sigma_d^2 - S_j) / V_j(t) * x_j,
//   V_j(t)   = cos^2(t) S_j + sin^2(t) sigma_d^2,
// and the PF-ODE map from s to t scales coordinates by sqrt(V_j(t)/V_j(s)).
#pragma once

#include "trigflow/datasets.hpp"
#include "trigflow/samplers.hpp"
#include "trigflow/trigflow.hpp"

namespace trigflow {

struct GaussOracle {
    std::vector<double> cov_diag; // S_j
    double sigma_d = 1.0;

    double marginal_var(int j, double t) const;

    // E[v_t | x_t]
    Tensor cond_velocity(const Tensor& x_t, double t) const;
    Tensor cond_velocity(const Tensor& x_t, const Tensor& t_col) const;

    // E[x_0 | x_t] = cos(t) S_j / V_j(t) x_j
    Tensor posterior_mean(const Tensor& x_t, double t) const;

    // exact PF-ODE solution map s -> t
    Tensor pfode_map(const Tensor& x_s, double s, double t) const;

    // exact consistency function f(x, t) = PF-ODE endpoint at t = 0
    Tensor consistency(const Tensor& x_t, double t) const;

    // F*(u, t) = E[v | x = sigma_d u] / sigma_d, as a teacher field
    FieldFn field() const;
    CmFn consistency_fn() const;
};

// requires ds.analytic_gaussian
GaussOracle make_gauss_oracle(const ToyDataset& ds, double sigma_d);

// sample (x0, z) from their joint conditional given x_t at time t (1-D case);
// used by Monte-Carlo conditional-expectation cross-checks
std::pair<double, double> sample_x0_z_given_xt_1d(double x_t, double t, double data_var,
                                                  double sigma_d, Rng& rng);

} // namespace trigflow
