#pragma once

#include <Eigen/Dense>

#include "grpnorm/gaussian.hpp"
#include "grpnorm/grouped_data.hpp"

namespace grpnorm {

/// Moments of a normal distribution restricted to a rectangle: the region
/// probability alpha, the conditional mean E[X | X in rect] and the
/// conditional second raw moment E[X X^T | X in rect].
struct TruncMoments {
    double alpha = 0.0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd second;

    Eigen::MatrixXd covariance() const { return second - mean * mean.transpose(); }
};

/// E[X | a <= X < b] for X ~ N(mu, sigma^2):
///   mu - sigma * (phi(b*) - phi(a*)) / (Phi(b*) - Phi(a*)).
/// Throws EmptyCell when the interval mass underflows (< ~1e-300).
double trunc_mean_1d(const Rectangle& rect, double mu, double sigma);

/// E[(X - center)^2 | a <= X < b], the three-term expansion
///   sigma^2 [1 - (b* phi(b*) - a* phi(a*)) / alpha]
///   + (center - mu)^2 + 2 sigma (center - mu) (phi(b*) - phi(a*)) / alpha.
double trunc_second_central_1d(const Rectangle& rect, double mu, double sigma, double center);

/// Rectangle-truncated moments of N(params) via the moment-generating-function
/// identities: E(X_i) = sum_k sigma_ik (F_k(a_k) - F_k(b_k)) and the matching
/// second-moment formula, where F_k / F_kq are one- and two-coordinate
/// marginal densities of the truncated distribution (Manjunath & Wilhelm).
/// Each F_k(x) is evaluated as a univariate density times a conditional
/// (d-1)-dimensional rectangle probability divided by alpha.
/// Throws EmptyCell when alpha < 1e-12.
TruncMoments trunc_moments_nd(const Rectangle& rect, const GaussianParams& params);

}  // namespace grpnorm
