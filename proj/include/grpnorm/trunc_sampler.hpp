#pragma once

#include <vector>

#include <Eigen/Dense>

#include "grpnorm/gaussian.hpp"
#include "grpnorm/grouped_data.hpp"
#include "grpnorm/rng.hpp"

namespace grpnorm {

/// count i.i.d. draws from N(mu, sigma^2) restricted to the interval, by
/// inversion: x = mu + sigma * Phi^-1(Phi(a*) + U (Phi(b*) - Phi(a*))).
/// Cells entirely in the right tail are inverted through the survival
/// function so accuracy is retained for |a*| > 6. Every draw lies in [a, b).
std::vector<double> sample_trunc_1d(const Rectangle& rect, double mu, double sigma,
                                    std::size_t count, RngState rng);

/// count draws from N(params) restricted to the rectangle. Rejection from the
/// untruncated distribution while the acceptance estimate (the rectangle
/// probability) is >= 1e-2; otherwise coordinate-wise Gibbs with burn-in 100
/// sweeps and thinning 5. Throws MixingFailure if any coordinate's mean
/// drifts more than 5 MC standard errors between the two halves of the run.
Eigen::MatrixXd sample_trunc_nd(const Rectangle& rect, const GaussianParams& params,
                                std::size_t count, RngState rng);

}  // namespace grpnorm
