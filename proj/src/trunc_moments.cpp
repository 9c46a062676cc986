#include "grpnorm/trunc_moments.hpp"

#include <cmath>

namespace grpnorm {

namespace {

struct Std1d {
    double a, b, alpha, dphi, dxphi;  // dphi = phi(b*)-phi(a*), dxphi = b*phi(b*)-a*phi(a*)
};

Std1d standardize(const Rectangle& rect, double mu, double sigma) {
    if (!(sigma > 0)) throw DomainError("sigma must be positive");
    const double a = std::isinf(rect.lower[0]) ? rect.lower[0] : (rect.lower[0] - mu) / sigma;
    const double b = std::isinf(rect.upper[0]) ? rect.upper[0] : (rect.upper[0] - mu) / sigma;
    double alpha;
    if (a >= 0)
        alpha = std_normal_sf(a) - std_normal_sf(b);
    else
        alpha = std_normal_cdf(b) - std_normal_cdf(a);
    if (!(alpha > 1e-300)) throw EmptyCell("interval probability underflow");
    const double pa = std::isinf(a) ? 0.0 : std_normal_pdf(a);
    const double pb = std::isinf(b) ? 0.0 : std_normal_pdf(b);
    const double xpa = std::isinf(a) ? 0.0 : a * pa;
    const double xpb = std::isinf(b) ? 0.0 : b * pb;
    return {a, b, alpha, pb - pa, xpb - xpa};
}

}  // namespace

double trunc_mean_1d(const Rectangle& rect, double mu, double sigma) {
    if (rect.dim() != 1) throw ShapeMismatch("trunc_mean_1d needs a 1-D rectangle");
    const auto s = standardize(rect, mu, sigma);
    return mu - sigma * s.dphi / s.alpha;
}

double trunc_second_central_1d(const Rectangle& rect, double mu, double sigma, double center) {
    if (rect.dim() != 1) throw ShapeMismatch("trunc_second_central_1d needs a 1-D rectangle");
    const auto s = standardize(rect, mu, sigma);
    const double shift = center - mu;
    const double v =
        sigma * sigma * (1.0 - s.dxphi / s.alpha) + shift * shift + 2.0 * sigma * shift * s.dphi / s.alpha;
    return std::max(v, 0.0);
}

TruncMoments trunc_moments_nd(const Rectangle& rect, const GaussianParams& params) {
    const auto d = params.dim();
    if (static_cast<Eigen::Index>(rect.dim()) != d)
        throw ShapeMismatch("rectangle/params dimension mismatch");

    const Eigen::MatrixXd& S = params.cov();
    // Work with the centered variable X = Y - mu on the shifted rectangle.
    Eigen::VectorXd a(d), b(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        a[i] = std::isinf(rect.lower[i]) ? rect.lower[i] : rect.lower[i] - params.mean()[i];
        b[i] = std::isinf(rect.upper[i]) ? rect.upper[i] : rect.upper[i] - params.mean()[i];
    }
    GaussianParams centered(Eigen::VectorXd::Zero(d), S);
    const double alpha = rect_prob(
        Rectangle(std::vector<double>(a.data(), a.data() + d),
                  std::vector<double>(b.data(), b.data() + d)),
        centered);
    if (!(alpha > 1e-12)) throw EmptyCell("rectangle probability below 1e-12");

    // F_k(x): marginal density of the alpha-normalized truncated N(0,S) at
    // coordinate k. Factorizes as phi(x; S_kk) * P(conditional rect) / alpha.
    auto Fk = [&](Eigen::Index k, double x) -> double {
        if (std::isinf(x)) return 0.0;
        const double skk = S(k, k);
        const double dens = std_normal_pdf(x / std::sqrt(skk)) / std::sqrt(skk);
        if (d == 1) return dens / alpha;
        std::vector<double> clo, chi;
        Eigen::VectorXd sk(d - 1);
        Eigen::MatrixXd Sc(d - 1, d - 1);
        Eigen::Index r = 0;
        for (Eigen::Index i = 0; i < d; ++i) {
            if (i == k) continue;
            sk[r] = S(i, k);
            Eigen::Index c = 0;
            for (Eigen::Index j = 0; j < d; ++j) {
                if (j == k) continue;
                Sc(r, c++) = S(i, j);
            }
            ++r;
        }
        Sc -= sk * sk.transpose() / skk;
        const Eigen::VectorXd cm = sk * (x / skk);
        r = 0;
        for (Eigen::Index i = 0; i < d; ++i) {
            if (i == k) continue;
            clo.push_back(std::isinf(a[i]) ? a[i] : a[i] - cm[r]);
            chi.push_back(std::isinf(b[i]) ? b[i] : b[i] - cm[r]);
            ++r;
        }
        const double cp = rect_prob(Rectangle(std::move(clo), std::move(chi)),
                                    GaussianParams(Eigen::VectorXd::Zero(d - 1), Sc));
        return dens * cp / alpha;
    };

    // F_kq(x, y): two-coordinate marginal density of the truncated
    // distribution, phi2((x,y); S_{kq}) * P(conditional rect) / alpha.
    auto Fkq = [&](Eigen::Index k, Eigen::Index q, double x, double y) -> double {
        if (std::isinf(x) || std::isinf(y)) return 0.0;
        Eigen::MatrixXd Skq(2, 2);
        Skq << S(k, k), S(k, q), S(q, k), S(q, q);
        Eigen::Vector2d xy(x, y);
        GaussianParams pair(Eigen::VectorXd::Zero(2), Skq);
        const double dens = mvn_density(xy, pair);
        if (d == 2) return dens / alpha;
        const Eigen::Vector2d sol = Skq.ldlt().solve(xy);
        std::vector<double> clo, chi;
        Eigen::MatrixXd Skr(d - 2, 2);
        Eigen::MatrixXd Sc(d - 2, d - 2);
        Eigen::Index r = 0;
        for (Eigen::Index i = 0; i < d; ++i) {
            if (i == k || i == q) continue;
            Skr(r, 0) = S(i, k);
            Skr(r, 1) = S(i, q);
            Eigen::Index c = 0;
            for (Eigen::Index j = 0; j < d; ++j) {
                if (j == k || j == q) continue;
                Sc(r, c++) = S(i, j);
            }
            ++r;
        }
        Sc -= Skr * Skq.ldlt().solve(Skr.transpose());
        const Eigen::VectorXd cm = Skr * sol;
        r = 0;
        for (Eigen::Index i = 0; i < d; ++i) {
            if (i == k || i == q) continue;
            clo.push_back(std::isinf(a[i]) ? a[i] : a[i] - cm[r]);
            chi.push_back(std::isinf(b[i]) ? b[i] : b[i] - cm[r]);
            ++r;
        }
        const double cp = rect_prob(Rectangle(std::move(clo), std::move(chi)),
                                    GaussianParams(Eigen::VectorXd::Zero(d - 2), Sc));
        return dens * cp / alpha;
    };

    Eigen::VectorXd Fa(d), Fb(d);
    for (Eigen::Index k = 0; k < d; ++k) {
        Fa[k] = Fk(k, a[k]);
        Fb[k] = Fk(k, b[k]);
    }
    const Eigen::VectorXd ex = S * (Fa - Fb);  // E[X] of the centered variable

    // Pairwise F_kq differences are shared across (i,j); precompute.
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index k = 0; k < d; ++k) {
        for (Eigen::Index q = 0; q < d; ++q) {
            if (q == k) continue;
            G(k, q) = (Fkq(k, q, a[k], a[q]) - Fkq(k, q, a[k], b[q])) -
                      (Fkq(k, q, b[k], a[q]) - Fkq(k, q, b[k], b[q]));
        }
    }

    Eigen::MatrixXd e2 = S;
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            double acc = 0.0;
            for (Eigen::Index k = 0; k < d; ++k) {
                const double ta = std::isinf(a[k]) ? 0.0 : a[k] * Fa[k];
                const double tb = std::isinf(b[k]) ? 0.0 : b[k] * Fb[k];
                acc += S(i, k) * S(j, k) / S(k, k) * (ta - tb);
                for (Eigen::Index q = 0; q < d; ++q) {
                    if (q == k) continue;
                    const double coef = S(i, k) * (S(j, q) - S(k, q) * S(j, k) / S(k, k));
                    if (coef != 0.0) acc += coef * G(k, q);
                }
            }
            e2(i, j) += acc;
        }
    }

    TruncMoments out;
    out.alpha = alpha;
    out.mean = ex + params.mean();
    Eigen::MatrixXd second = e2 + params.mean() * ex.transpose() + ex * params.mean().transpose() +
                             params.mean() * params.mean().transpose();
    out.second = ((second + second.transpose()) / 2.0).eval();
    return out;
}

}  // namespace grpnorm
