#include "grpnorm/inference.hpp"

#include <cmath>

#include "grpnorm/trunc_moments.hpp"
#include "grpnorm/trunc_sampler.hpp"

namespace grpnorm {

namespace {

constexpr double kZ975 = 1.96;

MeanInference build_inference(const GroupedTable& table, const GaussianParams& params,
                              const std::vector<Eigen::VectorXd>& scores) {
    const auto d = params.dim();
    const double n = static_cast<double>(table.total());
    const auto cells = table.occupied_cells();

    Eigen::VectorXd sbar = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i < cells.size(); ++i)
        sbar += static_cast<double>(table.counts()[cells[i]]) * scores[i];
    sbar /= n;

    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t i = 0; i < cells.size(); ++i)
        info += static_cast<double>(table.counts()[cells[i]]) * scores[i] * scores[i].transpose();
    info -= n * sbar * sbar.transpose();
    info = ((info + info.transpose()) / 2.0).eval();

    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() != Eigen::Success)
        throw SingularInformation("empirical information matrix is not positive definite");
    // Cholesky pivot ratio check: treat near-singular as singular.
    const Eigen::MatrixXd L = llt.matrixL();
    double dmin = L(0, 0), dmax = L(0, 0);
    for (Eigen::Index i = 0; i < d; ++i) {
        dmin = std::min(dmin, L(i, i));
        dmax = std::max(dmax, L(i, i));
    }
    if (!(dmin * dmin > 1e-12 * dmax * dmax))
        throw SingularInformation("empirical information matrix is numerically singular");

    MeanInference mi;
    mi.info = info;
    const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(d, d));
    mi.se = cov.diagonal().cwiseSqrt();
    mi.ci_lower = params.mean() - kZ975 * mi.se;
    mi.ci_upper = params.mean() + kZ975 * mi.se;
    return mi;
}

}  // namespace

Eigen::VectorXd mean_score(const Rectangle& cell, const GaussianParams& params) {
    const auto d = params.dim();
    Eigen::VectorXd tm(d);
    if (d == 1) {
        tm[0] = trunc_mean_1d(cell, params.mean()[0], params.sigma(0));
    } else {
        tm = trunc_moments_nd(cell, params).mean;
    }
    return params.chol().transpose().triangularView<Eigen::Upper>().solve(
        params.chol().triangularView<Eigen::Lower>().solve(
            Eigen::VectorXd(tm - params.mean())));
}

MeanInference empirical_info_em(const GroupedTable& table, const GaussianParams& params) {
    const auto cells = table.occupied_cells();
    std::vector<Eigen::VectorXd> scores(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i)
        scores[i] = mean_score(table.cell_rectangle(cells[i]), params);
    return build_inference(table, params, scores);
}

MeanInference empirical_info_mcem(const GroupedTable& table, const GaussianParams& params, int M,
                                  RngState rng) {
    if (M < 1) throw DomainError("M must be positive");
    const auto d = params.dim();
    const auto cells = table.occupied_cells();
    std::vector<Eigen::VectorXd> scores(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto rect = table.cell_rectangle(cells[i]);
        const RngState st = rng.child(cells[i]);
        Eigen::VectorXd avg(d);
        if (d == 1) {
            const auto draws = sample_trunc_1d(rect, params.mean()[0], params.sigma(0),
                                               static_cast<std::size_t>(M), st);
            double s = 0.0;
            for (double x : draws) s += x;
            avg[0] = s / M;
        } else {
            avg = sample_trunc_nd(rect, params, static_cast<std::size_t>(M), st).colwise().mean();
        }
        scores[i] = params.chol().transpose().triangularView<Eigen::Upper>().solve(
            params.chol().triangularView<Eigen::Lower>().solve(
                Eigen::VectorXd(avg - params.mean())));
    }
    return build_inference(table, params, scores);
}

}  // namespace grpnorm
