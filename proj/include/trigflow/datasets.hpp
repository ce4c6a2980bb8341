// Toy data generators. Gaussian datasets expose closed-form diagonal
// covariance for the analytic oracles; the others are sampling-only.
#pragma once

#include <string>

#include "trigflow/rng.hpp"
#include "trigflow/tensor.hpp"

namespace trigflow {

struct ToyDataset {
    std::string name;
    int dim = 1;
    bool analytic_gaussian = false;
    std::vector<double> cov_diag;   // valid when analytic_gaussian
    Tensor mode_centers;            // [n_modes, dim] when a mixture
    double mode_std = 0.0;

    Tensor sample(int n, Rng& rng) const;
};

// names: gauss1d, gauss-nd, mixture2d, checkerboard2d, tokens8x4
ToyDataset make_dataset(const std::string& name, double data_std = 1.0, int dim = 2);

// pooled per-coordinate std: sqrt(mean over samples and coords of (x - mean)^2)
double estimate_sigma_d(const Tensor& samples);

} // namespace trigflow
