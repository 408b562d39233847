#pragma once

#include "cpsde/tensor.hpp"

namespace cpsde {

/// Median Euclidean distance over all distinct pairs of the pooled rows of a and b.
/// Returns 1 when every pooled distance is zero.
double median_bandwidth(const Tensor& a, const Tensor& b);

/// Gaussian kernel exp(-|u - v|^2 / (2 bandwidth^2)) on rows.
double gaussian_kernel(const double* u, const double* v, std::size_t dim, double bandwidth);

/// Squared MMD, V-statistic (includes the diagonal; never negative).
double mmd2_biased(const Tensor& a, const Tensor& b, double bandwidth);
/// Squared MMD, unbiased U-statistic (excludes within-sample diagonals; may be negative).
double mmd2_unbiased(const Tensor& a, const Tensor& b, double bandwidth);

}  // namespace cpsde
