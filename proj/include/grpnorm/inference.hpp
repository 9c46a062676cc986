#pragma once

#include <Eigen/Dense>

#include "grpnorm/estimators.hpp"

namespace grpnorm {

/// Standard errors and 95% confidence intervals for the mean estimates, from
/// the empirical observed information matrix with the covariance parameters
/// held fixed at their fitted values.
struct MeanInference {
    Eigen::VectorXd se;
    Eigen::VectorXd ci_lower;
    Eigen::VectorXd ci_upper;
    Eigen::MatrixXd info;
};

/// Per-cell score for the mean: Sigma^-1 (E[X | cell] - mu).
Eigen::VectorXd mean_score(const Rectangle& cell, const GaussianParams& params);

/// info = sum_cells count * s s^T - n * sbar sbar^T with the count-weighted
/// average sbar; se = sqrt(diag(info^-1)); CI = mean -+ 1.96 se. Throws
/// SingularInformation when info is not numerically PD.
MeanInference empirical_info_em(const GroupedTable& table, const GaussianParams& params);

/// Same formula with each cell's truncated mean replaced by the average of M
/// fresh draws at the fitted parameters (the Monte-Carlo analogue used after
/// an MCEM fit).
MeanInference empirical_info_mcem(const GroupedTable& table, const GaussianParams& params, int M,
                                  RngState rng);

}  // namespace grpnorm
