#include "fdsad/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fdsad {

SimplexResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                          const SimplexOptions& opts) {
    const Eigen::Index p = x0.size();
    const double inf = std::numeric_limits<double>::infinity();
    auto eval = [&](const Vector& x, int& count) {
        ++count;
        const double v = f(x);
        return std::isfinite(v) ? v : inf;
    };

    SimplexResult res;
    if (p == 0) {
        res.x = x0;
        res.value = eval(x0, res.evaluations);
        res.converged = true;
        return res;
    }

    std::vector<Vector> pts(static_cast<std::size_t>(p + 1), x0);
    std::vector<double> vals(static_cast<std::size_t>(p + 1));
    for (Eigen::Index k = 0; k < p; ++k) {
        const double h = opts.initial_step * std::max(1.0, std::abs(x0[k]));
        pts[static_cast<std::size_t>(k + 1)][k] += h;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) vals[i] = eval(pts[i], res.evaluations);

    std::vector<std::size_t> order(pts.size());
    while (res.evaluations < opts.max_evaluations) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[order.size() - 2];

        double diam = 0.0;
        for (const auto& q : pts) diam = std::max(diam, (q - pts[best]).lpNorm<Eigen::Infinity>());
        const double spread = std::abs(vals[worst] - vals[best]);
        if (std::isfinite(vals[worst]) && spread <= opts.ftol * (std::abs(vals[best]) + 1e-300) + 1e-300 &&
            diam <= std::max(opts.xtol, 1e-6)) {
            res.converged = true;
            break;
        }
        if (diam <= opts.xtol) {
            res.converged = std::isfinite(vals[best]);
            break;
        }

        Vector centroid = Vector::Zero(p);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i != worst) centroid += pts[i];
        }
        centroid /= static_cast<double>(p);

        const Vector xr = centroid + (centroid - pts[worst]);
        const double fr = eval(xr, res.evaluations);
        if (fr < vals[best]) {
            const Vector xe = centroid + 2.0 * (centroid - pts[worst]);
            const double fe = eval(xe, res.evaluations);
            if (fe < fr) {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
            continue;
        }
        if (fr < vals[second]) {
            pts[worst] = xr;
            vals[worst] = fr;
            continue;
        }
        const bool outside = fr < vals[worst];
        const Vector xc = outside ? Vector(centroid + 0.5 * (xr - centroid)) : Vector(centroid + 0.5 * (pts[worst] - centroid));
        const double fc = eval(xc, res.evaluations);
        if (fc < (outside ? fr : vals[worst])) {
            pts[worst] = xc;
            vals[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i == best) continue;
            pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
            vals[i] = eval(pts[i], res.evaluations);
        }
    }
    const auto it = std::min_element(vals.begin(), vals.end());
    res.x = pts[static_cast<std::size_t>(it - vals.begin())];
    res.value = *it;
    return res;
}

}  // namespace fdsad
