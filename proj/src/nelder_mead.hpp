#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace grpnorm::detail {

struct NmResult {
    Eigen::VectorXd x;
    double f = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Standard Nelder-Mead simplex minimizer (reflection 1, expansion 2,
// contraction 0.5, shrink 0.5) with the fminsearch initial-simplex rule.
// Converged when the function spread over the simplex drops below tol.
inline NmResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x0, double tol, int max_iter) {
    const int n = static_cast<int>(x0.size());
    std::vector<Eigen::VectorXd> x(n + 1, x0);
    for (int i = 0; i < n; ++i) {
        if (x0[i] != 0.0)
            x[i + 1][i] *= 1.05;
        else
            x[i + 1][i] = 0.00025;
    }
    std::vector<double> fx(n + 1);
    for (int i = 0; i <= n; ++i) fx[i] = f(x[i]);

    std::vector<int> idx(n + 1);
    NmResult res;
    int it = 0;
    for (; it < max_iter; ++it) {
        for (int i = 0; i <= n; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fx[a] < fx[b]; });
        if (std::abs(fx[idx[n]] - fx[idx[0]]) < tol) {
            res.converged = true;
            break;
        }
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < n; ++i) centroid += x[idx[i]];
        centroid /= n;
        const int worst = idx[n];

        const Eigen::VectorXd xr = centroid + (centroid - x[worst]);
        const double fr = f(xr);
        if (fr < fx[idx[0]]) {
            const Eigen::VectorXd xe = centroid + 2.0 * (xr - centroid);
            const double fe = f(xe);
            if (fe < fr) {
                x[worst] = xe;
                fx[worst] = fe;
            } else {
                x[worst] = xr;
                fx[worst] = fr;
            }
        } else if (fr < fx[idx[n - 1]]) {
            x[worst] = xr;
            fx[worst] = fr;
        } else {
            const bool outside = fr < fx[worst];
            const Eigen::VectorXd xc =
                outside ? centroid + 0.5 * (xr - centroid) : centroid + 0.5 * (x[worst] - centroid);
            const double fc = f(xc);
            if (fc < (outside ? fr : fx[worst])) {
                x[worst] = xc;
                fx[worst] = fc;
            } else {
                for (int i = 1; i <= n; ++i) {
                    x[idx[i]] = x[idx[0]] + 0.5 * (x[idx[i]] - x[idx[0]]);
                    fx[idx[i]] = f(x[idx[i]]);
                }
            }
        }
    }
    const auto best = std::min_element(fx.begin(), fx.end()) - fx.begin();
    res.x = x[best];
    res.f = fx[best];
    res.iterations = it;
    return res;
}

}  // namespace grpnorm::detail
