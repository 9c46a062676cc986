#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "grpnorm/gaussian.hpp"
#include "grpnorm/grouped_data.hpp"
#include "grpnorm/rng.hpp"

namespace grpnorm {

enum class Method { ExactMLE, EM, MCEM };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct FitOptions {
    int max_iter = 500;
    double tol = 1e-8;
    /// Monte-Carlo draws per cell and iteration; 0 picks the dimension
    /// default (1000 at d=1, 5000 at d>=2).
    int mcem_samples = 0;
    std::uint64_t seed = 0;
    bool record_trace = false;
    /// Worker threads for per-cell MCEM sampling; results are independent of
    /// the thread count.
    int threads = 1;
};

int default_mcem_samples(Eigen::Index dim);

struct TracePoint {
    int iteration;
    double loglik;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

struct FitResult {
    GaussianParams params;
    double loglik = 0.0;
    std::vector<TracePoint> trace;
    int iterations = 0;
    bool converged = false;
    Method method = Method::EM;
};

/// Multinomial observed-data log-likelihood sum_cells count * log P_cell,
/// additive constant dropped. Throws DegenerateCell if a counted cell has
/// zero probability (the log-likelihood is -inf there).
double grouped_loglik(const GroupedTable& table, const GaussianParams& params);

/// Direct maximization of grouped_loglik by Nelder-Mead with one restart
/// from the best vertex. d=1 searches (mu/sigma, 1/sigma); d>=2 searches
/// (mean, log-Cholesky of cov), so every iterate is positive definite.
FitResult fit_exact_mle(const GroupedTable& table, const GaussianParams& init,
                        const FitOptions& opts);

/// One EM update: means first from the truncated cell means, then the
/// covariance from second central moments about the *new* mean.
GaussianParams em_step(const GroupedTable& table, const GaussianParams& current);

FitResult fit_em(const GroupedTable& table, const GaussianParams& init, const FitOptions& opts);

/// One Monte-Carlo EM update: per counted cell, M truncated draws from the
/// stream rng.child(cell) replace the analytic moments.
GaussianParams mcem_step(const GroupedTable& table, const GaussianParams& current, int M,
                         RngState rng, int threads = 1);

/// Iterates mcem_step with fixed M; stops when the per-iteration maximum
/// relative parameter change, averaged over 3 consecutive iterations, falls
/// below 1e-4 (or at max_iter). loglik is the deterministic value at the
/// final parameters.
FitResult fit_mcem(const GroupedTable& table, const GaussianParams& init, const FitOptions& opts);

/// Method-of-moments initial values from bin midpoints; infinite bins are
/// assigned the adjacent finite edge offset by one interior bin width. The
/// covariance diagonal gets a bin-width floor so the result is always PD.
GaussianParams moment_init(const GroupedTable& table);

}  // namespace grpnorm
