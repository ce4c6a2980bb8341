#include "trigflow/gauss_oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace trigflow {

double GaussOracle::marginal_var(int j, double t) const {
    const double c = std::cos(t), s = std::sin(t);
    return c * c * cov_diag[j] + s * s * sigma_d * sigma_d;
}

Tensor GaussOracle::cond_velocity(const Tensor& x_t, double t) const {
    return cond_velocity(x_t, Tensor(x_t.rows, 1, t));
}

Tensor GaussOracle::cond_velocity(const Tensor& x_t, const Tensor& t_col) const {
    if (x_t.cols != int(cov_diag.size()))
        throw std::invalid_argument("GaussOracle: dim mismatch");
    Tensor out(x_t.rows, x_t.cols);
    for (int i = 0; i < x_t.rows; ++i) {
        const double c = std::cos(t_col.d[i]), s = std::sin(t_col.d[i]);
        for (int j = 0; j < x_t.cols; ++j) {
            const double v = c * c * cov_diag[j] + s * s * sigma_d * sigma_d;
            out.at(i, j) = s * c * (sigma_d * sigma_d - cov_diag[j]) / v * x_t.at(i, j);
        }
    }
    return out;
}

Tensor GaussOracle::posterior_mean(const Tensor& x_t, double t) const {
    const double c = std::cos(t);
    Tensor out(x_t.rows, x_t.cols);
    for (int i = 0; i < x_t.rows; ++i)
        for (int j = 0; j < x_t.cols; ++j)
            out.at(i, j) = c * cov_diag[j] / marginal_var(j, t) * x_t.at(i, j);
    return out;
}

Tensor GaussOracle::pfode_map(const Tensor& x_s, double s, double t) const {
    Tensor out(x_s.rows, x_s.cols);
    for (int i = 0; i < x_s.rows; ++i)
        for (int j = 0; j < x_s.cols; ++j)
            out.at(i, j) = x_s.at(i, j) * std::sqrt(marginal_var(j, t) / marginal_var(j, s));
    return out;
}

Tensor GaussOracle::consistency(const Tensor& x_t, double t) const { return pfode_map(x_t, t, 0.0); }

FieldFn GaussOracle::field() const {
    GaussOracle self = *this;
    return [self](const Tensor& u, const Tensor& t_col) {
        return scale(self.cond_velocity(scale(u, self.sigma_d), t_col), 1.0 / self.sigma_d);
    };
}

CmFn GaussOracle::consistency_fn() const {
    GaussOracle self = *this;
    return [self](const Tensor& x, const Tensor& t_col) {
        Tensor out(x.rows, x.cols);
        for (int i = 0; i < x.rows; ++i) {
            const double t = t_col.d[i];
            for (int j = 0; j < x.cols; ++j)
                out.at(i, j) = x.at(i, j) * std::sqrt(self.cov_diag[j] / self.marginal_var(j, t));
        }
        return out;
    };
}

GaussOracle make_gauss_oracle(const ToyDataset& ds, double sigma_d) {
    if (!ds.analytic_gaussian)
        throw std::invalid_argument("make_gauss_oracle: dataset " + ds.name + " is not Gaussian");
    return GaussOracle{ds.cov_diag, sigma_d};
}

std::pair<double, double> sample_x0_z_given_xt_1d(double x_t, double t, double data_var,
                                                  double sigma_d, Rng& rng) {
    const double c = std::cos(t), s = std::sin(t);
    if (std::abs(s) < 1e-12) return {x_t, sigma_d * rng.normal()};
    const double v = c * c * data_var + s * s * sigma_d * sigma_d;
    const double mean = c * data_var / v * x_t;
    const double var = data_var - c * c * data_var * data_var / v;
    const double x0 = mean + std::sqrt(std::max(0.0, var)) * rng.normal();
    return {x0, (x_t - c * x0) / s};
}

} // namespace trigflow
