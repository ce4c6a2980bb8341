// Sample-based distribution distances and small stat helpers. Energy distance
// uses the normalization E||a-b|| - (E||a-a'|| + E||b-b'||)/2, which equals d
// for point masses at distance d and vanishes for identical distributions.
#pragma once

#include <functional>

#include "trigflow/rng.hpp"
#include "trigflow/tensor.hpp"

namespace trigflow {

// exact O(n^2) up to `exact_limit` rows, subsampled pairs above it
double energy_distance(const Tensor& a, const Tensor& b, Rng* rng = nullptr,
                       int exact_limit = 10000, long sample_pairs = 2000000);

double sliced_wasserstein(const Tensor& a, const Tensor& b, int n_proj, Rng& rng);

// Kolmogorov-Smirnov statistic against a reference CDF
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

// fraction of samples nearest to each center
std::vector<double> mode_masses(const Tensor& samples, const Tensor& centers);

double sample_mean(const std::vector<double>& v);
double sample_std(const std::vector<double>& v);

} // namespace trigflow
