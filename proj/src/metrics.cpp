#include "trigflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace trigflow {

namespace {
double row_dist(const Tensor& a, int i, const Tensor& b, int j) {
    double s = 0.0;
    for (int k = 0; k < a.cols; ++k) {
        const double d = a.at(i, k) - b.at(j, k);
        s += d * d;
    }
    return std::sqrt(s);
}

double mean_cross_dist_exact(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.rows; ++j) s += row_dist(a, i, b, j);
    return s / (double(a.rows) * double(b.rows));
}

// V-statistic (the i == j diagonal counts as zero) so that identical sample
// sets give exactly zero distance
double mean_self_dist_exact(const Tensor& a) {
    if (a.rows < 2) return 0.0;
    double s = 0.0;
    for (int i = 0; i < a.rows; ++i)
        for (int j = i + 1; j < a.rows; ++j) s += row_dist(a, i, a, j);
    return 2.0 * s / (double(a.rows) * double(a.rows));
}

double mean_cross_dist_sampled(const Tensor& a, const Tensor& b, long pairs, Rng& rng) {
    double s = 0.0;
    for (long k = 0; k < pairs; ++k)
        s += row_dist(a, int(rng.index(size_t(a.rows))), b, int(rng.index(size_t(b.rows))));
    return s / double(pairs);
}

double mean_self_dist_sampled(const Tensor& a, long pairs, Rng& rng) {
    double s = 0.0;
    for (long k = 0; k < pairs; ++k)
        s += row_dist(a, int(rng.index(size_t(a.rows))), a, int(rng.index(size_t(a.rows))));
    return s / double(pairs);
}
} // namespace

double energy_distance(const Tensor& a, const Tensor& b, Rng* rng, int exact_limit, long sample_pairs) {
    if (a.rows == 0 || b.rows == 0) throw std::invalid_argument("energy_distance: empty sample set");
    if (a.cols != b.cols) throw std::invalid_argument("energy_distance: dim mismatch");
    const bool exact = a.rows <= exact_limit && b.rows <= exact_limit;
    if (!exact && !rng) throw std::invalid_argument("energy_distance: rng required for subsampling");
    double ab, aa, bb;
    if (exact) {
        ab = mean_cross_dist_exact(a, b);
        aa = mean_self_dist_exact(a);
        bb = mean_self_dist_exact(b);
    } else {
        ab = mean_cross_dist_sampled(a, b, sample_pairs, *rng);
        aa = mean_self_dist_sampled(a, sample_pairs, *rng);
        bb = mean_self_dist_sampled(b, sample_pairs, *rng);
    }
    return ab - 0.5 * (aa + bb);
}

double sliced_wasserstein(const Tensor& a, const Tensor& b, int n_proj, Rng& rng) {
    if (a.cols != b.cols) throw std::invalid_argument("sliced_wasserstein: dim mismatch");
    if (a.rows == 0 || b.rows == 0) throw std::invalid_argument("sliced_wasserstein: empty sample set");
    const int n = std::min(a.rows, b.rows);
    double acc = 0.0;
    std::vector<double> pa(n), pb(n);
    for (int p = 0; p < n_proj; ++p) {
        std::vector<double> dir(a.cols);
        double norm = 0.0;
        for (auto& v : dir) {
            v = rng.normal();
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (auto& v : dir) v /= norm;
        for (int i = 0; i < n; ++i) {
            double sa = 0.0, sb = 0.0;
            for (int k = 0; k < a.cols; ++k) {
                sa += a.at(i, k) * dir[k];
                sb += b.at(i, k) * dir[k];
            }
            pa[i] = sa;
            pb[i] = sb;
        }
        std::sort(pa.begin(), pa.end());
        std::sort(pb.begin(), pb.end());
        double w = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d = pa[i] - pb[i];
            w += d * d;
        }
        acc += std::sqrt(w / double(n));
    }
    return acc / double(n_proj);
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) throw std::invalid_argument("ks_statistic: empty sample set");
    std::sort(samples.begin(), samples.end());
    const double n = double(samples.size());
    double d = 0.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max(d, std::abs(f - double(i) / n));
        d = std::max(d, std::abs(double(i + 1) / n - f));
    }
    return d;
}

std::vector<double> mode_masses(const Tensor& samples, const Tensor& centers) {
    std::vector<double> mass(centers.rows, 0.0);
    for (int i = 0; i < samples.rows; ++i) {
        int best = 0;
        double best_d = row_dist(samples, i, centers, 0);
        for (int k = 1; k < centers.rows; ++k) {
            const double d = row_dist(samples, i, centers, k);
            if (d < best_d) {
                best_d = d;
                best = k;
            }
        }
        mass[best] += 1.0;
    }
    for (auto& m : mass) m /= double(samples.rows);
    return mass;
}

double sample_mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / double(v.size());
}

double sample_std(const std::vector<double>& v) {
    const double m = sample_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / double(v.size() > 1 ? v.size() - 1 : 1));
}

} // namespace trigflow
