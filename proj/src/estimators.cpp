#include "grpnorm/estimators.hpp"

#include <cmath>
#include <deque>
#include <thread>

#include "grpnorm/trunc_moments.hpp"
#include "grpnorm/trunc_sampler.hpp"
#include "nelder_mead.hpp"

namespace grpnorm {

std::string method_name(Method m) {
    switch (m) {
        case Method::ExactMLE: return "exact";
        case Method::EM: return "em";
        case Method::MCEM: return "mcem";
    }
    return "?";
}

Method method_from_name(const std::string& name) {
    if (name == "exact" || name == "exact-mle" || name == "mle") return Method::ExactMLE;
    if (name == "em") return Method::EM;
    if (name == "mcem") return Method::MCEM;
    throw DomainError("unknown method '" + name + "' (valid: exact, em, mcem)");
}

int default_mcem_samples(Eigen::Index dim) { return dim == 1 ? 1000 : 5000; }

double grouped_loglik(const GroupedTable& table, const GaussianParams& params) {
    double ll = 0.0;
    for (std::size_t flat : table.occupied_cells()) {
        const double p = rect_prob(table.cell_rectangle(flat), params);
        if (!(p > 0.0))
            throw DegenerateCell("counted cell has zero probability at these parameters");
        ll += static_cast<double>(table.counts()[flat]) * std::log(p);
    }
    return ll;
}

namespace {

// Unconstrained transforms for the direct optimizer.

Eigen::VectorXd pack_params(const GaussianParams& p) {
    const auto d = p.dim();
    if (d == 1) {
        const double sigma = p.sigma(0);
        Eigen::VectorXd t(2);
        t << p.mean()[0] / sigma, 1.0 / sigma;
        return t;
    }
    const Eigen::MatrixXd& L = p.chol();
    Eigen::VectorXd t(d + d * (d + 1) / 2);
    t.head(d) = p.mean();
    Eigen::Index pos = d;
    for (Eigen::Index i = 0; i < d; ++i) t[pos++] = std::log(L(i, i));
    for (Eigen::Index i = 1; i < d; ++i)
        for (Eigen::Index j = 0; j < i; ++j) t[pos++] = L(i, j);
    return t;
}

GaussianParams unpack_params(const Eigen::VectorXd& t, Eigen::Index d) {
    if (d == 1) {
        const double sigma = 1.0 / t[1];
        return GaussianParams::univariate(t[0] * sigma, sigma);
    }
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(d, d);
    Eigen::Index pos = d;
    for (Eigen::Index i = 0; i < d; ++i) L(i, i) = std::exp(t[pos++]);
    for (Eigen::Index i = 1; i < d; ++i)
        for (Eigen::Index j = 0; j < i; ++j) L(i, j) = t[pos++];
    return GaussianParams(t.head(d), L * L.transpose());
}

constexpr double kBigPenalty = 1e100;

}  // namespace

FitResult fit_exact_mle(const GroupedTable& table, const GaussianParams& init,
                        const FitOptions& opts) {
    const auto d = init.dim();
    if (static_cast<Eigen::Index>(table.dim()) != d)
        throw ShapeMismatch("table/init dimension mismatch");

    const auto objective = [&](const Eigen::VectorXd& t) -> double {
        if (d == 1 && !(t[1] > 0)) return kBigPenalty;
        try {
            return -grouped_loglik(table, unpack_params(t, d));
        } catch (const Error&) {
            return kBigPenalty;
        }
    };

    // A table with fewer than two occupied cells carries a flat likelihood;
    // report the init back unconverged rather than pretending to optimize.
    if (table.occupied_cells().size() < 2) {
        FitResult r{init, grouped_loglik(table, init), {}, 0, false, Method::ExactMLE};
        return r;
    }

    auto run = detail::nelder_mead(objective, pack_params(init), opts.tol, opts.max_iter);
    auto rerun = detail::nelder_mead(objective, run.x, opts.tol, opts.max_iter);
    const auto& best = rerun.f <= run.f ? rerun : run;

    FitResult r{unpack_params(best.x, d), -best.f, {},
                run.iterations + rerun.iterations, rerun.converged, Method::ExactMLE};
    if (opts.record_trace)
        r.trace.push_back({r.iterations, r.loglik, r.params.mean(), r.params.cov()});
    return r;
}

GaussianParams em_step(const GroupedTable& table, const GaussianParams& current) {
    const auto d = current.dim();
    if (static_cast<Eigen::Index>(table.dim()) != d)
        throw ShapeMismatch("table/params dimension mismatch");
    const double n = static_cast<double>(table.total());
    const auto cells = table.occupied_cells();

    try {
        if (d == 1) {
            const double mu = current.mean()[0];
            const double sigma = current.sigma(0);
            double m1 = 0.0;
            for (std::size_t flat : cells)
                m1 += static_cast<double>(table.counts()[flat]) *
                      trunc_mean_1d(table.cell_rectangle(flat), mu, sigma);
            m1 /= n;
            double v = 0.0;
            for (std::size_t flat : cells)
                v += static_cast<double>(table.counts()[flat]) *
                     trunc_second_central_1d(table.cell_rectangle(flat), mu, sigma, m1);
            v /= n;
            return GaussianParams::univariate(m1, std::sqrt(v));
        }

        std::vector<TruncMoments> tms(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i)
            tms[i] = trunc_moments_nd(table.cell_rectangle(cells[i]), current);

        Eigen::VectorXd m1 = Eigen::VectorXd::Zero(d);
        for (std::size_t i = 0; i < cells.size(); ++i)
            m1 += static_cast<double>(table.counts()[cells[i]]) * tms[i].mean;
        m1 /= n;

        Eigen::MatrixXd S = Eigen::MatrixXd::Zero(d, d);
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const double c = static_cast<double>(table.counts()[cells[i]]);
            S += c * (tms[i].second - tms[i].mean * m1.transpose() - m1 * tms[i].mean.transpose() +
                      m1 * m1.transpose());
        }
        S /= n;
        return GaussianParams(std::move(m1), ((S + S.transpose()) / 2.0).eval());
    } catch (const EmptyCell& e) {
        throw DegenerateCell(std::string("counted cell with vanishing probability: ") + e.what());
    }
}

FitResult fit_em(const GroupedTable& table, const GaussianParams& init, const FitOptions& opts) {
    FitResult r{init, grouped_loglik(table, init), {}, 0, false, Method::EM};
    if (opts.record_trace) r.trace.push_back({0, r.loglik, init.mean(), init.cov()});
    double ll_prev = r.loglik;
    for (int p = 1; p <= opts.max_iter; ++p) {
        r.params = em_step(table, r.params);
        r.loglik = grouped_loglik(table, r.params);
        r.iterations = p;
        if (opts.record_trace) r.trace.push_back({p, r.loglik, r.params.mean(), r.params.cov()});
        if (std::abs(r.loglik - ll_prev) <= opts.tol * (1.0 + std::abs(r.loglik))) {
            r.converged = true;
            break;
        }
        ll_prev = r.loglik;
    }
    return r;
}

namespace {

struct CellStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd raw2;  // (1/M) sum x x^T
};

CellStats sample_cell_stats(const Rectangle& rect, const GaussianParams& params, int M,
                            RngState rng) {
    const auto d = params.dim();
    CellStats cs{Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d)};
    if (d == 1) {
        const auto draws =
            sample_trunc_1d(rect, params.mean()[0], params.sigma(0), static_cast<std::size_t>(M), rng);
        double s = 0.0, s2 = 0.0;
        for (double x : draws) {
            s += x;
            s2 += x * x;
        }
        cs.mean[0] = s / M;
        cs.raw2(0, 0) = s2 / M;
        return cs;
    }
    const Eigen::MatrixXd draws = sample_trunc_nd(rect, params, static_cast<std::size_t>(M), rng);
    cs.mean = draws.colwise().mean();
    cs.raw2 = draws.transpose() * draws / static_cast<double>(M);
    return cs;
}

}  // namespace

GaussianParams mcem_step(const GroupedTable& table, const GaussianParams& current, int M,
                         RngState rng, int threads) {
    const auto d = current.dim();
    if (static_cast<Eigen::Index>(table.dim()) != d)
        throw ShapeMismatch("table/params dimension mismatch");
    if (M < 1) throw DomainError("mcem_samples must be positive");
    const double n = static_cast<double>(table.total());
    const auto cells = table.occupied_cells();

    std::vector<CellStats> stats(cells.size());
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            stats[i] = sample_cell_stats(table.cell_rectangle(cells[i]), current, M,
                                         rng.child(cells[i]));
    };
    const int nthreads = std::max(1, threads);
    if (nthreads == 1 || cells.size() < 2) {
        work(0, cells.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (cells.size() + nthreads - 1) / nthreads;
        for (int t = 0; t < nthreads; ++t) {
            const std::size_t b = t * chunk;
            if (b >= cells.size()) break;
            pool.emplace_back(work, b, std::min(cells.size(), b + chunk));
        }
        for (auto& th : pool) th.join();
    }

    Eigen::VectorXd m1 = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i < cells.size(); ++i)
        m1 += static_cast<double>(table.counts()[cells[i]]) * stats[i].mean;
    m1 /= n;

    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const double c = static_cast<double>(table.counts()[cells[i]]);
        S += c * (stats[i].raw2 - stats[i].mean * m1.transpose() - m1 * stats[i].mean.transpose() +
                  m1 * m1.transpose());
    }
    S /= n;
    return GaussianParams(std::move(m1), ((S + S.transpose()) / 2.0).eval());
}

namespace {

Eigen::VectorXd flat_params(const GaussianParams& p) {
    const auto d = p.dim();
    Eigen::VectorXd v(d + d * (d + 1) / 2);
    v.head(d) = p.mean();
    Eigen::Index pos = d;
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) v[pos++] = p.cov()(i, j);
    return v;
}

}  // namespace

FitResult fit_mcem(const GroupedTable& table, const GaussianParams& init, const FitOptions& opts) {
    const int M = opts.mcem_samples > 0 ? opts.mcem_samples : default_mcem_samples(init.dim());
    const RngState base{opts.seed, 0};
    FitResult r{init, 0.0, {}, 0, false, Method::MCEM};
    Eigen::VectorXd prev = flat_params(init);
    std::deque<double> window;
    constexpr double kParamTol = 1e-4;

    for (int p = 1; p <= opts.max_iter; ++p) {
        r.params = mcem_step(table, r.params, M, base.child(p), opts.threads);
        r.iterations = p;
        const Eigen::VectorXd cur = flat_params(r.params);
        double change = 0.0;
        for (Eigen::Index j = 0; j < cur.size(); ++j)
            change = std::max(change, std::abs(cur[j] - prev[j]) / std::max(std::abs(prev[j]), 1e-12));
        prev = cur;
        window.push_back(change);
        if (window.size() > 3) window.pop_front();
        if (opts.record_trace) {
            const double ll = grouped_loglik(table, r.params);
            r.trace.push_back({p, ll, r.params.mean(), r.params.cov()});
        }
        if (window.size() == 3) {
            const double avg = (window[0] + window[1] + window[2]) / 3.0;
            if (avg < kParamTol) {
                r.converged = true;
                break;
            }
        }
    }
    r.loglik = grouped_loglik(table, r.params);
    return r;
}

GaussianParams moment_init(const GroupedTable& table) {
    const auto d = static_cast<Eigen::Index>(table.dim());
    const double n = static_cast<double>(table.total());

    std::vector<std::vector<double>> mids(d);
    std::vector<double> width(d, 1.0);
    for (Eigen::Index ax = 0; ax < d; ++ax) {
        const auto& e = table.axis(ax).edges();
        const std::size_t k = e.size() - 1;
        // one interior bin width, if any interior bin exists
        double w = 1.0;
        for (std::size_t i = 0; i < k; ++i) {
            if (!std::isinf(e[i]) && !std::isinf(e[i + 1])) {
                w = e[i + 1] - e[i];
                break;
            }
        }
        width[ax] = w;
        mids[ax].resize(k);
        for (std::size_t i = 0; i < k; ++i) {
            if (std::isinf(e[i]) && std::isinf(e[i + 1]))
                mids[ax][i] = 0.0;
            else if (std::isinf(e[i]))
                mids[ax][i] = e[i + 1] - w;
            else if (std::isinf(e[i + 1]))
                mids[ax][i] = e[i] + w;
            else
                mids[ax][i] = 0.5 * (e[i] + e[i + 1]);
        }
    }

    Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
    for (std::size_t flat : table.occupied_cells()) {
        const auto idx = table.unravel(flat);
        const double c = static_cast<double>(table.counts()[flat]);
        for (Eigen::Index ax = 0; ax < d; ++ax) mu[ax] += c * mids[ax][idx[ax]];
    }
    mu /= n;

    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t flat : table.occupied_cells()) {
        const auto idx = table.unravel(flat);
        const double c = static_cast<double>(table.counts()[flat]);
        Eigen::VectorXd dev(d);
        for (Eigen::Index ax = 0; ax < d; ++ax) dev[ax] = mids[ax][idx[ax]] - mu[ax];
        S += c * dev * dev.transpose();
    }
    S /= n;
    for (Eigen::Index ax = 0; ax < d; ++ax)
        S(ax, ax) += std::max(width[ax] * width[ax] / 12.0, 1e-6);
    return GaussianParams(std::move(mu), std::move(S));
}

}  // namespace grpnorm
