#include "grpnorm/trunc_sampler.hpp"

#include <cmath>
#include <limits>

namespace grpnorm {

namespace {

// Draw from the standard normal truncated to [a, b], a < b (standardized,
// possibly infinite). Uses the CDF scale for cells reaching into the left
// half and the survival scale for right-tail cells.
double draw_std_trunc(double a, double b, double u) {
    if (a >= 0) {
        const double ta = std_normal_sf(a);
        const double tb = std_normal_sf(b);
        const double t = tb + (1.0 - u) * (ta - tb);
        return -std_normal_quantile(std::clamp(t, 1e-300, 1.0 - 1e-16));
    }
    const double ca = std_normal_cdf(a);
    const double cb = std_normal_cdf(b);
    const double t = ca + u * (cb - ca);
    return std_normal_quantile(std::clamp(t, 1e-300, 1.0 - 1e-16));
}

double clamp_into(double x, double lo, double hi) {
    if (x < lo) return lo;
    if (x >= hi) return std::isinf(hi) ? x : std::nextafter(hi, lo);
    return x;
}

void check_mixing(const Eigen::MatrixXd& draws) {
    const auto n = draws.rows();
    if (n < 8) return;
    const auto h = n / 2;
    for (Eigen::Index j = 0; j < draws.cols(); ++j) {
        const auto first = draws.col(j).head(h);
        const auto second = draws.col(j).tail(n - h);
        const double m1 = first.mean(), m2 = second.mean();
        const double v1 = (first.array() - m1).square().sum() / static_cast<double>(h - 1);
        const double v2 =
            (second.array() - m2).square().sum() / static_cast<double>(n - h - 1);
        const double se = std::sqrt(v1 / static_cast<double>(h) + v2 / static_cast<double>(n - h));
        if (se > 0 && std::abs(m1 - m2) > 5.0 * se)
            throw MixingFailure("gibbs chain mean drift exceeds 5 MC standard errors");
    }
}

}  // namespace

std::vector<double> sample_trunc_1d(const Rectangle& rect, double mu, double sigma,
                                    std::size_t count, RngState rng) {
    if (rect.dim() != 1) throw ShapeMismatch("sample_trunc_1d needs a 1-D rectangle");
    if (!(sigma > 0)) throw DomainError("sigma must be positive");
    if (count == 0) throw DomainError("count must be positive");
    const double a = std::isinf(rect.lower[0]) ? rect.lower[0] : (rect.lower[0] - mu) / sigma;
    const double b = std::isinf(rect.upper[0]) ? rect.upper[0] : (rect.upper[0] - mu) / sigma;
    const double alpha = a >= 0 ? std_normal_sf(a) - std_normal_sf(b)
                                : std_normal_cdf(b) - std_normal_cdf(a);
    if (!(alpha > 1e-300)) throw EmptyCell("interval probability underflow");

    Rng gen(rng);
    std::vector<double> out(count);
    for (auto& x : out) {
        const double z = draw_std_trunc(a, b, gen.next_open());
        x = clamp_into(mu + sigma * z, rect.lower[0], rect.upper[0]);
    }
    return out;
}

Eigen::MatrixXd sample_trunc_nd(const Rectangle& rect, const GaussianParams& params,
                                std::size_t count, RngState rng) {
    const auto d = params.dim();
    if (static_cast<Eigen::Index>(rect.dim()) != d)
        throw ShapeMismatch("rectangle/params dimension mismatch");
    if (count == 0) throw DomainError("count must be positive");
    if (d == 1) {
        auto v = sample_trunc_1d(rect, params.mean()[0], params.sigma(0), count, rng);
        return Eigen::Map<Eigen::MatrixXd>(v.data(), static_cast<Eigen::Index>(count), 1);
    }

    const double alpha = rect_prob(rect, params);
    if (!(alpha > 1e-12)) throw EmptyCell("rectangle probability below 1e-12");

    Rng gen(rng);
    Eigen::MatrixXd draws(count, d);

    if (alpha >= 1e-2) {
        const auto& L = params.chol();
        Eigen::VectorXd z(d), y(d);
        for (std::size_t m = 0; m < count; ++m) {
            while (true) {
                for (Eigen::Index i = 0; i < d; ++i) z[i] = std_normal_quantile(gen.next_open());
                y = params.mean();
                for (Eigen::Index i = 0; i < d; ++i)
                    for (Eigen::Index k = 0; k <= i; ++k) y[i] += L(i, k) * z[k];
                bool inside = true;
                for (Eigen::Index i = 0; i < d; ++i) {
                    if (!(y[i] >= rect.lower[i] && y[i] < rect.upper[i])) {
                        inside = false;
                        break;
                    }
                }
                if (inside) {
                    draws.row(m) = y;
                    break;
                }
            }
        }
        return draws;
    }

    // Gibbs fallback for thin cells: full conditionals are univariate
    // truncated normals. Precompute regression weights and residual sds.
    const Eigen::MatrixXd& S = params.cov();
    std::vector<Eigen::VectorXd> weights(d);
    std::vector<double> csd(d);
    for (Eigen::Index k = 0; k < d; ++k) {
        Eigen::MatrixXd Soo(d - 1, d - 1);
        Eigen::VectorXd sok(d - 1);
        Eigen::Index r = 0;
        for (Eigen::Index i = 0; i < d; ++i) {
            if (i == k) continue;
            sok[r] = S(i, k);
            Eigen::Index c = 0;
            for (Eigen::Index j = 0; j < d; ++j) {
                if (j == k) continue;
                Soo(r, c++) = S(i, j);
            }
            ++r;
        }
        weights[k] = Soo.ldlt().solve(sok);
        const double v = S(k, k) - sok.dot(weights[k]);
        if (!(v > 0)) throw NonPositiveDefinite("conditional variance not positive");
        csd[k] = std::sqrt(v);
    }

    // Start from an interior point.
    Eigen::VectorXd x(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        const double lo = rect.lower[i], hi = rect.upper[i];
        if (std::isinf(lo) && std::isinf(hi))
            x[i] = params.mean()[i];
        else if (std::isinf(lo))
            x[i] = hi - params.sigma(i);
        else if (std::isinf(hi))
            x[i] = lo + params.sigma(i);
        else
            x[i] = 0.5 * (lo + hi);
    }

    constexpr int kBurnIn = 100;
    constexpr int kThin = 5;
    auto sweep = [&] {
        for (Eigen::Index k = 0; k < d; ++k) {
            double cm = params.mean()[k];
            Eigen::Index r = 0;
            for (Eigen::Index i = 0; i < d; ++i) {
                if (i == k) continue;
                cm += weights[k][r++] * (x[i] - params.mean()[i]);
            }
            const double lo = rect.lower[k], hi = rect.upper[k];
            const double a = std::isinf(lo) ? lo : (lo - cm) / csd[k];
            const double b = std::isinf(hi) ? hi : (hi - cm) / csd[k];
            const double z = draw_std_trunc(a, b, gen.next_open());
            x[k] = clamp_into(cm + csd[k] * z, lo, hi);
        }
    };
    for (int i = 0; i < kBurnIn; ++i) sweep();
    for (std::size_t m = 0; m < count; ++m) {
        for (int t = 0; t < kThin; ++t) sweep();
        draws.row(m) = x;
    }
    check_mixing(draws);
    return draws;
}

}  // namespace grpnorm
