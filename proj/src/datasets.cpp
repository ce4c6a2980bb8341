#include "trigflow/datasets.hpp"

#include <cmath>
#include <stdexcept>

namespace trigflow {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

Tensor sample_gauss_diag(int n, const std::vector<double>& cov_diag, Rng& rng) {
    const int d = int(cov_diag.size());
    Tensor out(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out.at(i, j) = std::sqrt(cov_diag[j]) * rng.normal();
    return out;
}

Tensor sample_mixture(int n, const Tensor& centers, double mode_std, Rng& rng) {
    const int d = centers.cols;
    Tensor out(n, d);
    for (int i = 0; i < n; ++i) {
        const int k = int(rng.index(size_t(centers.rows)));
        for (int j = 0; j < d; ++j) out.at(i, j) = centers.at(k, j) + mode_std * rng.normal();
    }
    return out;
}

Tensor sample_checkerboard(int n, Rng& rng) {
    // black cells of a 4x4 grid on [-2,2]^2
    Tensor out(n, 2);
    for (int i = 0; i < n; ++i) {
        while (true) {
            const double x = rng.uniform(-2.0, 2.0);
            const double y = rng.uniform(-2.0, 2.0);
            const int cx = int(std::floor(x + 2.0));
            const int cy = int(std::floor(y + 2.0));
            if ((cx + cy) % 2 == 0) {
                out.at(i, 0) = x;
                out.at(i, 1) = y;
                break;
            }
        }
    }
    return out;
}

Tensor sample_tokens(int n, Rng& rng) {
    // 8 tokens x 4 dims on a one-parameter phase manifold, flattened
    const int tokens = 8, td = 4;
    Tensor out(n, tokens * td);
    for (int i = 0; i < n; ++i) {
        const double phi = rng.uniform(0.0, kTwoPi);
        for (int k = 0; k < tokens; ++k) {
            const double a = phi + k * (kTwoPi / 8.0);
            const double b = 2.0 * phi + k * (kTwoPi / 4.0);
            double* row = &out.d[size_t(i) * tokens * td + size_t(k) * td];
            row[0] = std::sin(a) + 0.05 * rng.normal();
            row[1] = std::cos(a) + 0.05 * rng.normal();
            row[2] = 0.5 * std::sin(b) + 0.05 * rng.normal();
            row[3] = 0.5 * std::cos(b) + 0.05 * rng.normal();
        }
    }
    return out;
}
} // namespace

Tensor ToyDataset::sample(int n, Rng& rng) const {
    if (name == "gauss1d" || name == "gauss-nd") return sample_gauss_diag(n, cov_diag, rng);
    if (name == "mixture2d") return sample_mixture(n, mode_centers, mode_std, rng);
    if (name == "checkerboard2d") return sample_checkerboard(n, rng);
    if (name == "tokens8x4") return sample_tokens(n, rng);
    throw std::invalid_argument("ToyDataset::sample: unknown dataset " + name);
}

ToyDataset make_dataset(const std::string& name, double data_std, int dim) {
    ToyDataset ds;
    ds.name = name;
    if (name == "gauss1d") {
        ds.dim = 1;
        ds.analytic_gaussian = true;
        ds.cov_diag = {data_std * data_std};
    } else if (name == "gauss-nd") {
        if (dim < 1) throw std::invalid_argument("make_dataset: gauss-nd needs dim >= 1");
        ds.dim = dim;
        ds.analytic_gaussian = true;
        ds.cov_diag.resize(dim);
        for (int j = 0; j < dim; ++j) {
            const double s = data_std * (1.0 + 0.5 * (dim > 1 ? double(j) / double(dim - 1) : 0.0));
            ds.cov_diag[j] = s * s;
        }
    } else if (name == "mixture2d") {
        ds.dim = 2;
        ds.mode_std = 0.15;
        ds.mode_centers = Tensor(8, 2);
        for (int k = 0; k < 8; ++k) {
            const double a = kTwoPi * double(k) / 8.0;
            ds.mode_centers.at(k, 0) = 2.0 * std::cos(a);
            ds.mode_centers.at(k, 1) = 2.0 * std::sin(a);
        }
    } else if (name == "checkerboard2d") {
        ds.dim = 2;
    } else if (name == "tokens8x4") {
        ds.dim = 32;
    } else {
        throw std::invalid_argument("make_dataset: unknown dataset " + name);
    }
    return ds;
}

double estimate_sigma_d(const Tensor& samples) {
    if (samples.rows < 2) throw std::invalid_argument("estimate_sigma_d: need at least 2 samples");
    const int n = samples.rows, d = samples.cols;
    double acc = 0.0;
    for (int j = 0; j < d; ++j) {
        double mean = 0.0;
        for (int i = 0; i < n; ++i) mean += samples.at(i, j);
        mean /= double(n);
        double var = 0.0;
        for (int i = 0; i < n; ++i) {
            const double c = samples.at(i, j) - mean;
            var += c * c;
        }
        acc += var / double(n);
    }
    return std::sqrt(acc / double(d));
}

} // namespace trigflow
