#include "grpnorm/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "grpnorm/rng.hpp"

namespace grpnorm {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kSqrt2 = std::numbers::sqrt2;

double horner(const double* c, int n, double x) {
    double r = c[n - 1];
    for (int i = n - 2; i >= 0; --i) r = r * x + c[i];
    return r;
}

}  // namespace

GaussianParams::GaussianParams(Eigen::VectorXd mean, Eigen::MatrixXd cov)
    : mean_(std::move(mean)), cov_(std::move(cov)) {
    const auto d = mean_.size();
    if (d < 1 || cov_.rows() != d || cov_.cols() != d)
        throw ShapeMismatch("mean/cov dimension mismatch");
    const double scale = std::max(cov_.cwiseAbs().maxCoeff(), 1e-300);
    if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw NonPositiveDefinite("covariance not symmetric");
    cov_ = ((cov_ + cov_.transpose()) / 2.0).eval();
    Eigen::LLT<Eigen::MatrixXd> llt(cov_);
    if (llt.info() != Eigen::Success)
        throw NonPositiveDefinite("covariance not positive definite");
    chol_ = llt.matrixL();
}

GaussianParams GaussianParams::univariate(double mu, double sigma) {
    Eigen::VectorXd m(1);
    m << mu;
    Eigen::MatrixXd s(1, 1);
    s << sigma * sigma;
    return GaussianParams(std::move(m), std::move(s));
}

double std_normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(kTwoPi);
}

double std_normal_cdf(double x) {
    if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
    return 0.5 * std::erfc(-x / kSqrt2);
}

double std_normal_sf(double x) {
    if (std::isinf(x)) return x > 0 ? 0.0 : 1.0;
    return 0.5 * std::erfc(x / kSqrt2);
}

// Wichura (1988), algorithm AS 241 (PPND16): ~16 significant digits.
double std_normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile requires p in (0,1)");
    static const double a[8] = {3.3871328727963666080e0,  1.3314166789178437745e2,
                                1.9715909503065514427e3,  1.3731693765509461125e4,
                                4.5921953931549871457e4,  6.7265770927008700853e4,
                                3.3430575583588128105e4,  2.5090809287301226727e3};
    static const double b[8] = {1.0,
                                4.2313330701600911252e1,
                                6.8718700749205790830e2,
                                5.3941960214247511077e3,
                                2.1213794301586595867e4,
                                3.9307895800092710610e4,
                                2.8729085735721942674e4,
                                5.2264952788528545610e3};
    static const double c[8] = {1.42343711074968357734e0,  4.63033784615654529590e0,
                                5.76949722146069140550e0,  3.64784832476320460504e0,
                                1.27045825245236838258e0,  2.41780725177450611770e-1,
                                2.27238449892691845833e-2, 7.74545014278341407640e-4};
    static const double d[8] = {1.0,
                                2.05319162663775882187e0,
                                1.67638483018380384940e0,
                                6.89767334985100004550e-1,
                                1.48103976427480074590e-1,
                                1.51986665636164571966e-2,
                                5.47593808499534494600e-4,
                                1.05075007164441684324e-9};
    static const double e[8] = {6.65790464350110377720e0,  5.46378491116411436990e0,
                                1.78482653991729133580e0,  2.96560571828504891230e-1,
                                2.65321895265761230930e-2, 1.24266094738807843860e-3,
                                2.71155556874348757815e-5, 2.01033439929228813265e-7};
    static const double f[8] = {1.0,
                                5.99832206555887937690e-1,
                                1.36929880922735805310e-1,
                                1.48753612908506148525e-2,
                                7.86869131145613259100e-4,
                                1.84631831751005468180e-5,
                                1.42151175831644588870e-7,
                                2.04426310338993978564e-15};
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q * horner(a, 8, r) / horner(b, 8, r);
    }
    double r = q < 0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double z;
    if (r <= 5.0) {
        r -= 1.6;
        z = horner(c, 8, r) / horner(d, 8, r);
    } else {
        r -= 5.0;
        z = horner(e, 8, r) / horner(f, 8, r);
    }
    return q < 0 ? -z : z;
}

// Genz (2004) bivariate normal: P(X > h, Y > k) with correlation rho.
double bvn_upper(double h, double k, double rho) {
    static const double w1[3] = {0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
    static const double x1[3] = {0.9324695142031522, 0.6612093864662647, 0.2386191860831970};
    static const double w2[6] = {0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                                 0.2031674267230659,  0.2334925365383547, 0.2491470458134029};
    static const double x2[6] = {0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                                 0.5873179542866171, 0.3678314989981802, 0.1252334085114692};
    static const double w3[10] = {0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                                  0.08327674157670475, 0.1019301198172404,  0.1181945319615184,
                                  0.1316886384491766,  0.1420961093183821,  0.1491729864726037,
                                  0.1527533871307259};
    static const double x3[10] = {0.9931285991850949, 0.9639719272779138,  0.9122344282513259,
                                  0.8391169718222188, 0.7463319064601508,  0.6360536807265150,
                                  0.5108670019508271, 0.3737060887154196,  0.2277858511416451,
                                  0.07652652113349733};
    const double* w;
    const double* x;
    int lg;
    const double ar = std::abs(rho);
    if (ar < 0.3) {
        w = w1;
        x = x1;
        lg = 3;
    } else if (ar < 0.75) {
        w = w2;
        x = x2;
        lg = 6;
    } else {
        w = w3;
        x = x3;
        lg = 10;
    }

    double hh = h, kk = k;
    double hk = hh * kk;
    double bvn = 0.0;
    if (ar < 0.925) {
        if (ar > 0) {
            const double hs = (hh * hh + kk * kk) / 2;
            const double asr = std::asin(rho);
            for (int i = 0; i < lg; ++i) {
                for (int is = -1; is <= 1; is += 2) {
                    const double sn = std::sin(asr * (is * x[i] + 1) / 2);
                    bvn += w[i] * std::exp((sn * hk - hs) / (1 - sn * sn));
                }
            }
            bvn = bvn * asr / (2 * kTwoPi);
        }
        bvn += std_normal_sf(hh) * std_normal_sf(kk);
    } else {
        if (rho < 0) {
            kk = -kk;
            hk = -hk;
        }
        if (ar < 1) {
            const double as = (1 - rho) * (1 + rho);
            double aa = std::sqrt(as);
            const double bs = (hh - kk) * (hh - kk);
            const double cc = (4 - hk) / 8;
            const double dd = (12 - hk) / 16;
            double asr = -(bs / as + hk) / 2;
            if (asr > -100)
                bvn = aa * std::exp(asr) *
                      (1 - cc * (bs - as) * (1 - dd * bs / 5) / 3 + cc * dd * as * as / 5);
            if (-hk < 100) {
                const double bb = std::sqrt(bs);
                const double sp = std::sqrt(kTwoPi) * std_normal_cdf(-bb / aa);
                bvn -= std::exp(-hk / 2) * sp * bb * (1 - cc * bs * (1 - dd * bs / 5) / 3);
            }
            aa /= 2;
            for (int i = 0; i < lg; ++i) {
                for (int is = -1; is <= 1; is += 2) {
                    const double xs = std::pow(aa * (is * x[i] + 1), 2);
                    const double rs = std::sqrt(1 - xs);
                    asr = -(bs / xs + hk) / 2;
                    if (asr > -100) {
                        const double sp = 1 + cc * xs * (1 + dd * xs);
                        const double ep = std::exp(-hk * (1 - rs) / (2 * (1 + rs))) / rs;
                        bvn += aa * w[i] * std::exp(asr) * (ep - sp);
                    }
                }
            }
            bvn = -bvn / kTwoPi;
        }
        if (rho > 0) {
            bvn += std_normal_sf(std::max(hh, kk));
        } else {
            bvn = -bvn;
            if (kk > hh) bvn += std_normal_cdf(kk) - std_normal_cdf(hh);
        }
    }
    return std::clamp(bvn, 0.0, 1.0);
}

namespace {

// Upper-orthant probability with infinite limits folded in.
double bvn_upper_ext(double h, double k, double rho) {
    if (h == std::numeric_limits<double>::infinity() ||
        k == std::numeric_limits<double>::infinity())
        return 0.0;
    const bool hinf = std::isinf(h);  // h = -inf here
    const bool kinf = std::isinf(k);
    if (hinf && kinf) return 1.0;
    if (hinf) return std_normal_sf(k);
    if (kinf) return std_normal_sf(h);
    return bvn_upper(h, k, rho);
}

double rect_prob_1d(double lo, double hi, double mu, double sigma) {
    const double a = std::isinf(lo) ? lo : (lo - mu) / sigma;
    const double b = std::isinf(hi) ? hi : (hi - mu) / sigma;
    double p;
    if (a >= 0)
        p = std_normal_sf(a) - std_normal_sf(b);
    else
        p = std_normal_cdf(b) - std_normal_cdf(a);
    return std::clamp(p, 0.0, 1.0);
}

double rect_prob_2d(const Rectangle& rect, const GaussianParams& params) {
    double a[2], b[2];
    for (int i = 0; i < 2; ++i) {
        const double s = params.sigma(i);
        a[i] = std::isinf(rect.lower[i]) ? rect.lower[i] : (rect.lower[i] - params.mean()[i]) / s;
        b[i] = std::isinf(rect.upper[i]) ? rect.upper[i] : (rect.upper[i] - params.mean()[i]) / s;
    }
    const double rho = params.rho(0, 1);
    const double p = bvn_upper_ext(a[0], a[1], rho) - bvn_upper_ext(b[0], a[1], rho) -
                     bvn_upper_ext(a[0], b[1], rho) + bvn_upper_ext(b[0], b[1], rho);
    return std::clamp(p, 0.0, 1.0);
}

// Genz separation-of-variables transform with randomized Richtmyer QMC.
// Variables are processed in order of increasing marginal mass; the shifted
// lattice is derived from a fixed internal seed, so equal inputs always give
// equal outputs.
double rect_prob_qmc(const Rectangle& rect, const GaussianParams& params, double tol) {
    const int d = static_cast<int>(params.dim());
    std::vector<int> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> lo(d), hi(d), marg(d);
    for (int i = 0; i < d; ++i) {
        const double s = params.sigma(i);
        lo[i] = std::isinf(rect.lower[i]) ? rect.lower[i] : (rect.lower[i] - params.mean()[i]) / s;
        hi[i] = std::isinf(rect.upper[i]) ? rect.upper[i] : (rect.upper[i] - params.mean()[i]) / s;
        marg[i] = std_normal_cdf(hi[i]) - std_normal_cdf(lo[i]);
    }
    std::sort(order.begin(), order.end(), [&](int i, int j) { return marg[i] < marg[j]; });

    Eigen::MatrixXd corr(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) corr(i, j) = params.rho(order[i], order[j]);
    Eigen::LLT<Eigen::MatrixXd> llt(corr);
    if (llt.info() != Eigen::Success)
        throw NonPositiveDefinite("correlation matrix not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();
    std::vector<double> a(d), b(d);
    for (int i = 0; i < d; ++i) {
        a[i] = lo[order[i]];
        b[i] = hi[order[i]];
    }

    static const double primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                                    31, 37, 41, 43, 47, 53, 59, 61, 67, 71};
    const int qdim = d - 1;
    std::vector<double> root(qdim);
    for (int i = 0; i < qdim; ++i) root[i] = std::sqrt(primes[i % 20]);

    auto eval_point = [&](const double* wpt) {
        std::vector<double> y(d, 0.0);
        double prod = 1.0;
        for (int j = 0; j < d; ++j) {
            double s = 0.0;
            for (int m = 0; m < j; ++m) s += L(j, m) * y[m];
            const double alo =
                std::isinf(a[j]) ? (a[j] > 0 ? 1.0 : 0.0) : std_normal_cdf((a[j] - s) / L(j, j));
            const double ahi =
                std::isinf(b[j]) ? (b[j] > 0 ? 1.0 : 0.0) : std_normal_cdf((b[j] - s) / L(j, j));
            const double pj = std::max(ahi - alo, 0.0);
            prod *= pj;
            if (prod <= 0.0) return 0.0;
            if (j < d - 1) {
                double u = alo + wpt[j] * (ahi - alo);
                u = std::clamp(u, 1e-300, 1.0 - 1e-16);
                y[j] = std_normal_quantile(u);
            }
        }
        return prod;
    };

    constexpr int kShifts = 12;
    Rng shift_rng(RngState{0x67656E7A2D716D63ULL, static_cast<std::uint64_t>(d)});
    std::vector<double> shifts(kShifts * qdim);
    for (auto& v : shifts) v = shift_rng.next_double();

    std::vector<double> sums(kShifts, 0.0);
    std::vector<double> wpt(qdim);
    long n_done = 0;
    long n_block = 256;
    constexpr long kMaxEvals = 4'000'000;
    double estimate = 0.0, err = std::numeric_limits<double>::infinity();
    while (true) {
        for (int k = 0; k < kShifts; ++k) {
            double s = 0.0;
            for (long j = n_done; j < n_done + n_block; ++j) {
                for (int i = 0; i < qdim; ++i) {
                    const double v = static_cast<double>(j + 1) * root[i] + shifts[k * qdim + i];
                    wpt[i] = v - std::floor(v);
                }
                s += eval_point(wpt.data());
            }
            sums[k] += s;
        }
        n_done += n_block;
        double mean = 0.0;
        for (int k = 0; k < kShifts; ++k) mean += sums[k] / static_cast<double>(n_done);
        mean /= kShifts;
        double var = 0.0;
        for (int k = 0; k < kShifts; ++k) {
            const double dkk = sums[k] / static_cast<double>(n_done) - mean;
            var += dkk * dkk;
        }
        var /= kShifts * (kShifts - 1);
        estimate = std::clamp(mean, 0.0, 1.0);
        err = 3.0 * std::sqrt(var);
        if (err <= tol) return estimate;
        if (static_cast<long>(kShifts) * (n_done + n_block * 2) > kMaxEvals) break;
        n_block *= 2;
    }
    throw ToleranceNotReached("qmc rectangle probability did not reach tolerance", estimate, err);
}

}  // namespace

double rect_prob(const Rectangle& rect, const GaussianParams& params, double tol) {
    if (static_cast<Eigen::Index>(rect.dim()) != params.dim())
        throw ShapeMismatch("rectangle/params dimension mismatch");
    if (tol <= 0) throw DomainError("tol must be positive");
    switch (params.dim()) {
        case 1:
            return rect_prob_1d(rect.lower[0], rect.upper[0], params.mean()[0], params.sigma(0));
        case 2:
            return rect_prob_2d(rect, params);
        default:
            return rect_prob_qmc(rect, params, tol);
    }
}

double rect_prob(const Rectangle& rect, const GaussianParams& params) {
    return rect_prob(rect, params, params.dim() <= 2 ? kRectTolBivariate : kRectTolQmc);
}

double mvn_log_density(const Eigen::VectorXd& x, const GaussianParams& params) {
    if (x.size() != params.dim()) throw ShapeMismatch("point/params dimension mismatch");
    const auto& L = params.chol();
    Eigen::VectorXd y = L.triangularView<Eigen::Lower>().solve(x - params.mean());
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < params.dim(); ++i) logdet += std::log(L(i, i));
    return -0.5 * static_cast<double>(params.dim()) * std::log(kTwoPi) - logdet -
           0.5 * y.squaredNorm();
}

double mvn_density(const Eigen::VectorXd& x, const GaussianParams& params) {
    return std::exp(mvn_log_density(x, params));
}

}  // namespace grpnorm
