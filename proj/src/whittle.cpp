#include "fdsad/whittle.hpp"

#include "fdsad/error.hpp"
#include "fdsad/optimize.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace fdsad {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Relative distance of theta to the admissible boundary in d, used to tell a
// boundary stall from an interior one.
bool near_boundary(const SpectralModel& model, const Vector& theta) {
    const auto r = model.memory_range();
    const double d = theta[*model.layout().d];
    if (d - r.lower < 1e-6 || r.upper - d < 1e-6) return true;
    Vector probe = theta;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
        for (double s : {-1e-5, 1e-5}) {
            probe[k] = theta[k] + s;
            if (!model.is_valid(probe)) return true;
        }
        probe[k] = theta[k];
    }
    return false;
}

}  // namespace

std::string_view to_string(ScoreVariant v) noexcept { return v == ScoreVariant::Plain ? "plain" : "profiled"; }

std::string_view to_string(FitStatus s) noexcept {
    switch (s) {
        case FitStatus::Converged: return "converged";
        case FitStatus::NonConvergence: return "NonConvergence";
        case FitStatus::BoundaryHit: return "BoundaryHit";
        case FitStatus::SingularJacobian: return "SingularJacobian";
    }
    return "unknown";
}

Matrix ScoreSet::jacobian_sum() const {
    const Vector s = jac.colwise().sum().transpose();
    return Eigen::Map<const Matrix>(s.data(), p(), p());
}

WhittleProblem::WhittleProblem(Periodogram pg, SpectralModel model, ScoreVariant variant)
    : pg_(std::move(pg)), model_(std::move(model)), variant_(variant) {
    if (pg_.m() == 0) throw Error(ErrorCode::TooShort, "periodogram has no ordinates");
    if (variant_ == ScoreVariant::Profiled && !model_.unit_variance()) {
        throw Error(ErrorCode::ConfigError, "profiled scores need a unit-variance model");
    }
    if (variant_ == ScoreVariant::Profiled && model_.family() != Family::Arfima) {
        throw Error(ErrorCode::ConfigError, "profiled scores are defined for ARFIMA models");
    }
    grid_ = model_.make_grid(pg_.frequencies);
    I_ = Eigen::Map<const Vector>(pg_.ordinates.data(), static_cast<Eigen::Index>(pg_.m()));
}

ScoreSet WhittleProblem::scores(const Vector& theta, bool with_jacobian) const {
    const Eigen::Index m = this->m();
    const Eigen::Index p = dim();
    const SpectralEval ev = model_.evaluate(grid_, theta, with_jacobian);
    const Vector r = (I_.array() * (-ev.log_f.array()).exp()).matrix();
    ScoreSet out;
    out.psi.resize(m, p);
    if (with_jacobian) out.jac.resize(m, p * p);

    if (variant_ == ScoreVariant::Plain) {
        out.psi = ev.z.array().colwise() * (r.array() - 1.0);
        if (with_jacobian) {
            for (Eigen::Index j = 0; j < m; ++j) {
                Matrix Jj = -r[j] * ev.z.row(j).transpose() * ev.z.row(j) + (r[j] - 1.0) * ev.hess(j, p);
                out.jac.row(j) = Eigen::Map<const Eigen::RowVectorXd>(Jj.data(), p * p);
            }
        }
        return out;
    }

    const Eigen::RowVectorXd zbar = ev.z.colwise().mean();
    const Matrix zc = ev.z.rowwise() - zbar;
    out.psi = zc.array().colwise() * r.array();
    if (with_jacobian) {
        const Eigen::RowVectorXd hbar = ev.hessian.colwise().mean();
        for (Eigen::Index j = 0; j < m; ++j) {
            const Eigen::RowVectorXd hc = ev.hessian.row(j) - hbar;
            Matrix Jj = -r[j] * zc.row(j).transpose() * ev.z.row(j) +
                        r[j] * Eigen::Map<const Matrix>(hc.data(), p, p);
            out.jac.row(j) = Eigen::Map<const Eigen::RowVectorXd>(Jj.data(), p * p);
        }
    }
    return out;
}

Vector WhittleProblem::score_sum(const Vector& theta) const { return scores(theta, false).sum(); }

double WhittleProblem::neg_loglik(const Vector& theta) const {
    const SpectralEval ev = model_.evaluate(grid_, theta, false);
    return ev.log_f.sum() + (I_.array() * (-ev.log_f.array()).exp()).sum();
}

double WhittleProblem::objective(const Vector& theta) const {
    if (variant_ == ScoreVariant::Plain) return neg_loglik(theta);
    const SpectralEval ev = model_.evaluate(grid_, theta, false);
    const double s = (I_.array() * (-ev.log_f.array()).exp()).sum();
    return ev.log_f.sum() + static_cast<double>(m()) * std::log(s);
}

double WhittleProblem::profiled_sigma2(const Vector& theta) const {
    const SpectralEval ev = model_.evaluate(grid_, theta, false);
    return (I_.array() * (-ev.log_f.array()).exp()).mean();
}

double whittle_neg_loglik(const Periodogram& pg, const SpectralModel& model, const Vector& theta) {
    model.validate(theta);
    return WhittleProblem(pg, model, ScoreVariant::Plain).neg_loglik(theta);
}

Vector score_sum(const Periodogram& pg, const SpectralModel& model, const Vector& theta, ScoreVariant variant) {
    model.validate(theta);
    return WhittleProblem(pg, model, variant).score_sum(theta);
}

void sandwich(const WhittleProblem& problem, const Vector& theta, Matrix& A, Matrix& B, Matrix& V) {
    const ScoreSet s = problem.scores(theta, true);
    const double m = static_cast<double>(s.m());
    A = s.jacobian_sum() / m;
    B = s.psi.transpose() * s.psi / m;
    const Eigen::FullPivLU<Matrix> lu(A);
    if (!lu.isInvertible()) {
        V = Matrix::Constant(A.rows(), A.cols(), std::numeric_limits<double>::quiet_NaN());
        return;
    }
    const Matrix Ai = lu.inverse();
    V = Ai * B * Ai.transpose();
    V = 0.5 * (V + V.transpose());
}

namespace {

/// d at 20/50/80% of the memory range, AR and MA blocks each set to -0.5, 0 or 0.5.
std::vector<Vector> restart_points(const SpectralModel& model, const Vector& base) {
    const ParamLayout& lay = model.layout();
    const MemoryRange r = model.memory_range();
    std::vector<Vector> out;
    for (double fd : {0.2, 0.5, 0.8}) {
        for (double a : {-0.5, 0.0, 0.5}) {
            for (double b : {-0.5, 0.0, 0.5}) {
                if ((lay.ar.empty() && a != 0.0) || (lay.ma.empty() && b != 0.0)) continue;
                Vector s = base;
                if (lay.d) s[*lay.d] = r.lower + fd * (r.upper - r.lower);
                for (Eigen::Index k : lay.ar) s[k] = a;
                for (Eigen::Index k : lay.ma) s[k] = b;
                if (model.is_valid(s)) out.push_back(std::move(s));
            }
        }
    }
    return out;
}

struct NewtonOutcome {
    Vector theta;
    double norm = kInf;
    int iterations = 0;
    bool converged = false;
    bool blocked_by_boundary = false;
};

NewtonOutcome newton(const WhittleProblem& pr, Vector theta, double tol, int max_iter, int extra_polish) {
    NewtonOutcome out;
    const SpectralModel& model = pr.model();
    ScoreSet s = pr.scores(theta, true);
    Vector S = s.sum();
    double norm = S.norm();
    int polish_left = extra_polish;
    for (int it = 0; it < max_iter; ++it) {
        out.iterations = it + 1;
        if (!std::isfinite(norm)) break;
        if (norm <= tol) {
            out.converged = true;
            if (polish_left-- <= 0 || norm == 0.0) break;
        }
        const Matrix J = s.jacobian_sum();
        const Eigen::ColPivHouseholderQR<Matrix> qr(J);
        if (qr.rank() < J.rows()) break;
        const Vector step = qr.solve(-S);
        if (!step.allFinite()) break;
        double t = 1.0;
        bool accepted = false;
        bool hit_invalid = false;
        for (int h = 0; h < 40; ++h, t *= 0.5) {
            const Vector cand = theta + t * step;
            if (!model.is_valid(cand)) {
                hit_invalid = true;
                continue;
            }
            ScoreSet sc = pr.scores(cand, true);
            const Vector Sc = sc.sum();
            const double nc = Sc.norm();
            if (std::isfinite(nc) && nc * nc <= (1.0 - 1e-4 * t) * norm * norm) {
                theta = cand;
                s = std::move(sc);
                S = Sc;
                norm = nc;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            out.blocked_by_boundary = hit_invalid;
            break;
        }
    }
    out.theta = theta;
    out.norm = norm;
    if (norm <= tol) out.converged = true;
    return out;
}

}  // namespace

WhittleFit solve_whittle(const WhittleProblem& pr, const Vector& theta_init, const SolverOptions& opts) {
    const SpectralModel& model = pr.model();
    model.validate(theta_init);
    const double tol = opts.tol.value_or(1e-8 * static_cast<double>(pr.m()));
    constexpr int kPolish = 3;

    NewtonOutcome nw = newton(pr, theta_init, tol, opts.max_iter, kPolish);
    int iterations = nw.iterations;

    if (!nw.converged && opts.fallback_simplex) {
        auto obj = [&](const Vector& th) { return model.is_valid(th) ? pr.objective(th) : kInf; };
        SimplexOptions so;
        so.max_evaluations = 400 * static_cast<int>(model.dim() + 1);
        // Start from whichever of the two points has the lower objective.
        const Vector start = (model.is_valid(nw.theta) && obj(nw.theta) < obj(theta_init)) ? nw.theta : theta_init;
        SimplexResult sr = nelder_mead(obj, start, so);
        sr = nelder_mead(obj, sr.x, so);  // restart shakes off a collapsed simplex
        iterations += sr.evaluations;
        if (model.is_valid(sr.x)) {
            NewtonOutcome pol = newton(pr, sr.x, tol, opts.max_iter, kPolish);
            iterations += pol.iterations;
            if (pol.converged || pol.norm < nw.norm) nw = pol;
            if (!pol.converged && pol.norm >= nw.norm && near_boundary(model, sr.x)) nw.blocked_by_boundary = true;
            if (!pol.converged && near_boundary(model, pol.theta)) nw.blocked_by_boundary = true;
        }
    }

    if (!nw.converged && opts.multistart) {
        double best = kInf;
        for (const Vector& start : restart_points(model, theta_init)) {
            NewtonOutcome r = newton(pr, start, tol, opts.max_iter, kPolish);
            iterations += r.iterations;
            if (!r.converged) continue;
            const double v = pr.objective(r.theta);
            if (v < best) {
                best = v;
                nw = r;
            }
        }
    }

    WhittleFit fit;
    fit.theta_hat = model.params(nw.theta);
    fit.iterations = iterations;
    fit.score_norm = nw.norm;
    fit.variant = pr.variant();
    fit.n = pr.periodogram().n;
    fit.m = pr.periodogram().m();
    fit.converged = nw.converged;
    fit.status = nw.converged ? FitStatus::Converged
                              : (nw.blocked_by_boundary || near_boundary(model, nw.theta) ? FitStatus::BoundaryHit
                                                                                           : FitStatus::NonConvergence);
    if (pr.variant() == ScoreVariant::Profiled) fit.sigma2_hat = pr.profiled_sigma2(nw.theta);
    else if (model.layout().sigma2) fit.sigma2_hat = nw.theta[*model.layout().sigma2];

    sandwich(pr, nw.theta, fit.A_hat, fit.B_hat, fit.V_hat);
    if (fit.converged) {
        const Eigen::JacobiSVD<Matrix> svd(fit.A_hat);
        const auto& sv = svd.singularValues();
        const double cond = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1] : kInf;
        if (!(cond <= 1e12)) {
            fit.converged = false;
            fit.status = FitStatus::SingularJacobian;
        }
    }
    return fit;
}

WhittleFit solve_whittle(const Periodogram& pg, const SpectralModel& model, const Vector& theta_init,
                         ScoreVariant variant, const SolverOptions& opts) {
    return solve_whittle(WhittleProblem(pg, model, variant), theta_init, opts);
}

double quadratic_form(const Vector& a, const Vector& b, const Matrix& precision, double c) {
    const Vector d = a - b;
    return c * d.dot(precision * d);
}

namespace {

Matrix invert_covariance(const Matrix& V) {
    if (!V.allFinite()) throw Error(ErrorCode::SingularCovariance, "covariance has non-finite entries");
    const Eigen::LDLT<Matrix> ldlt(V);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0) {
        throw Error(ErrorCode::SingularCovariance, "covariance is not positive definite");
    }
    const Matrix P = ldlt.solve(Matrix::Identity(V.rows(), V.cols()));
    return 0.5 * (P + P.transpose());
}

double scale_of(const WhittleFit& fit, WaldScale s) { return static_cast<double>(s == WaldScale::M ? fit.m : fit.n); }

}  // namespace

double wald_statistic(const WhittleFit& fit, const Vector& theta0, WaldScale scale) {
    if (theta0.size() != fit.theta_hat.values.size()) {
        throw Error(ErrorCode::InvalidParameter, "null value has the wrong length");
    }
    return quadratic_form(fit.theta_hat.values, theta0, invert_covariance(fit.V_hat), scale_of(fit, scale));
}

double wald_statistic(const WhittleFit& fit, const std::vector<Eigen::Index>& slots, const Vector& theta1_0,
                      WaldScale scale) {
    const auto k = static_cast<Eigen::Index>(slots.size());
    if (theta1_0.size() != k) throw Error(ErrorCode::InvalidParameter, "null value has the wrong length");
    Matrix V11(k, k);
    Vector est(k);
    for (Eigen::Index a = 0; a < k; ++a) {
        est[a] = fit.theta_hat.values[slots[a]];
        for (Eigen::Index b = 0; b < k; ++b) V11(a, b) = fit.V_hat(slots[a], slots[b]);
    }
    return quadratic_form(est, theta1_0, invert_covariance(V11), scale_of(fit, scale));
}

Matrix asymptotic_covariance(const SpectralModel& model, const Vector& theta, int n_freq_grid) {
    model.validate(theta);
    if (n_freq_grid < 10) throw Error(ErrorCode::ConfigError, "quadrature grid too small");
    const Eigen::Index p = model.dim();
    std::vector<double> lam(static_cast<std::size_t>(n_freq_grid));
    std::vector<double> wts(lam.size());
    const double h = 1.0 / n_freq_grid;
    for (int i = 0; i < n_freq_grid; ++i) {
        const double t = (i + 0.5) * h;
        lam[static_cast<std::size_t>(i)] = std::numbers::pi * t * t * t;
        wts[static_cast<std::size_t>(i)] = 3.0 * std::numbers::pi * t * t * h;
    }
    const auto ev = model.evaluate(model.make_grid(lam), theta, false);
    Matrix G = Matrix::Zero(p, p);
    for (int i = 0; i < n_freq_grid; ++i) {
        const auto z = ev.z.row(i);
        G.noalias() += wts[static_cast<std::size_t>(i)] * z.transpose() * z;
    }
    G *= 2.0;  // even integrand over (-pi, pi)
    G = 0.5 * (G + G.transpose());
    const Eigen::LDLT<Matrix> ldlt(G);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 1e-14 * G.norm()) {
        throw Error(ErrorCode::SingularInformation, "information integral is rank deficient");
    }
    Matrix S = 4.0 * std::numbers::pi * ldlt.solve(Matrix::Identity(p, p));
    return 0.5 * (S + S.transpose());
}

}  // namespace fdsad
