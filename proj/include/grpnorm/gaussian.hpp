#pragma once

#include <Eigen/Dense>

#include "grpnorm/grouped_data.hpp"

namespace grpnorm {

/// Mean vector and covariance matrix of a d-variate normal. The covariance
/// must be symmetric (1e-12 relative) and positive definite; the Cholesky
/// factor is computed once at construction.
class GaussianParams {
  public:
    GaussianParams(Eigen::VectorXd mean, Eigen::MatrixXd cov);

    /// Univariate convenience: N(mu, sigma^2).
    static GaussianParams univariate(double mu, double sigma);

    Eigen::Index dim() const { return mean_.size(); }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& cov() const { return cov_; }
    /// Lower Cholesky factor of cov.
    const Eigen::MatrixXd& chol() const { return chol_; }

    double sigma(Eigen::Index i) const { return std::sqrt(cov_(i, i)); }
    double rho(Eigen::Index i, Eigen::Index j) const {
        return cov_(i, j) / (sigma(i) * sigma(j));
    }

  private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd cov_;
    Eigen::MatrixXd chol_;
};

// -- scalar normal primitives -------------------------------------------------

/// Standard normal density.
double std_normal_pdf(double x);

/// Standard normal CDF; exact 0/1 at -+infinity, |error| <~ 1e-15 elsewhere.
double std_normal_cdf(double x);

/// Upper tail P(Z > x), accurate without cancellation for large x.
double std_normal_sf(double x);

/// Inverse standard normal CDF (Wichura's AS 241, PPND16). DomainError
/// outside (0,1).
double std_normal_quantile(double p);

// -- rectangle probabilities --------------------------------------------------

/// P(Z1 > h, Z2 > k) for standard bivariate normal with correlation rho.
/// Genz (2004) adaptation of Drezner-Wesolowsky; |error| < 5e-16.
double bvn_upper(double h, double k, double rho);

/// P(X in rect) for X ~ N(params). d=1 is a CDF difference; d=2 the
/// deterministic bivariate algorithm; d>=3 separation-of-variables QMC with
/// a deterministic internal point set. Throws ToleranceNotReached if the QMC
/// error estimate stays above tol at the sample budget.
double rect_prob(const Rectangle& rect, const GaussianParams& params, double tol);
double rect_prob(const Rectangle& rect, const GaussianParams& params);

/// Default tolerances used by the two-argument overload.
constexpr double kRectTolBivariate = 1e-10;
constexpr double kRectTolQmc = 1e-6;

/// Density of N(params) at x, via the cached Cholesky factor.
double mvn_density(const Eigen::VectorXd& x, const GaussianParams& params);
double mvn_log_density(const Eigen::VectorXd& x, const GaussianParams& params);

}  // namespace grpnorm
