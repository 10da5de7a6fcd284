#include "fdsad/saddlepoint.hpp"

#include "fdsad/error.hpp"
#include "fdsad/io.hpp"
#include "fdsad/optimize.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace fdsad {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Slack for accepting a step that only reduces the gradient once the
// objective no longer changes above rounding level.
double roundoff(double v) { return 1e-12 * (1.0 + std::abs(v)); }

double log_mean_exp(const Vector& a) {
    const double mx = a.maxCoeff();
    if (!std::isfinite(mx)) return mx;
    return mx + std::log((a.array() - mx).exp().mean());
}

}  // namespace

// ---------------------------------------------------------------- exponential

ExpCgf::ExpCgf(const SpectralModel& model, const FrequencyGrid& grid, Vector theta0, ScoreVariant variant)
    : model_(&model), grid_(&grid), theta0_(std::move(theta0)), variant_(variant) {
    model.validate(theta0_);
    log_f0_ = model.evaluate(grid, theta0_, false).log_f;
}

ExpCgf::Terms ExpCgf::terms(const Vector& theta) const {
    const SpectralEval ev = model_->evaluate(*grid_, theta, false);
    Terms t;
    t.w = (log_f0_ - ev.log_f).array().exp().matrix();
    if (variant_ == ScoreVariant::Plain) {
        t.u = ev.z;
        t.v = ev.z;
    } else {
        const Eigen::RowVectorXd zbar = ev.z.colwise().mean();
        t.u = ev.z.rowwise() - zbar;
        t.v = Matrix::Zero(ev.z.rows(), ev.z.cols());
    }
    return t;
}

bool ExpCgf::eval(const Terms& t, const Vector& ups, double& K, Vector* grad, Matrix* hess) {
    const Vector uu = t.u * ups;
    const Vector vv = t.v * ups;
    const Eigen::Index m = uu.size();
    K = 0.0;
    if (grad) *grad = Vector::Zero(ups.size());
    if (hess) *hess = Matrix::Zero(ups.size(), ups.size());
    for (Eigen::Index j = 0; j < m; ++j) {
        const double a = t.w[j] * uu[j];
        if (!(a < 1.0)) return false;
        K += -std::log1p(-a) - vv[j];
        if (grad || hess) {
            const double c = t.w[j] / (1.0 - a);
            if (grad) *grad += c * t.u.row(j).transpose() - t.v.row(j).transpose();
            if (hess) hess->noalias() += c * c * t.u.row(j).transpose() * t.u.row(j);
        }
    }
    return std::isfinite(K);
}

double ExpCgf::term(const Vector& upsilon, Eigen::Index j, const Vector& theta) const {
    const double lf = model_->evaluate(*grid_, theta, false).log_f[j];
    const Vector z = model_->log_gradient(grid_->lambda(j), theta);
    const double f = std::exp(lf);
    const double f0 = std::exp(log_f0_[j]);
    if (variant_ == ScoreVariant::Plain) {
        const double s = upsilon.dot(z) / f - 1.0 / f0;
        if (!(s < 0.0)) throw Error(ErrorCode::DomainViolation, "CGF argument outside its domain");
        return std::log(-1.0 / (f0 * s)) - upsilon.dot(z);
    }
    const Terms t = terms(theta);
    const double a = t.w[j] * t.u.row(j).dot(upsilon);
    if (!(a < 1.0)) throw Error(ErrorCode::DomainViolation, "CGF argument outside its domain");
    return -std::log1p(-a);
}

double ExpCgf::value(const Vector& upsilon, const Vector& theta) const {
    double K = 0.0;
    if (!eval(terms(theta), upsilon, K, nullptr, nullptr)) {
        throw Error(ErrorCode::DomainViolation, "CGF argument outside its domain");
    }
    return K;
}

SaddlepointSolution ExpCgf::legendre(const Vector& theta, const Vector* init) const {
    const Terms t = terms(theta);
    const Eigen::Index p = theta.size();
    const double m = static_cast<double>(t.w.size());
    Vector ups = Vector::Zero(p);
    double K = 0.0;
    Vector g;
    Matrix H;
    if (init && init->size() == p && eval(t, *init, K, &g, &H)) {
        ups = *init;
    } else {
        ups.setZero();
        eval(t, ups, K, &g, &H);
    }
    SaddlepointSolution sol;
    for (int it = 0; it < 100; ++it) {
        sol.iterations = it + 1;
        if (g.norm() / m <= 1e-10) {
            sol.converged = true;
            break;
        }
        const Eigen::LDLT<Matrix> ldlt(H);
        Vector step = ldlt.solve(-g);
        if (ldlt.info() != Eigen::Success || !step.allFinite()) {
            throw Error(ErrorCode::Degenerate, "singular CGF Hessian");
        }
        double s = 1.0;
        bool ok = false;
        bool in_domain = false;
        for (int h = 0; h < 60; ++h, s *= 0.5) {
            const Vector cand = ups + s * step;
            double Kc = 0.0;
            Vector gc;
            Matrix Hc;
            if (!eval(t, cand, Kc, &gc, &Hc)) continue;
            in_domain = true;
            if (Kc <= K + 1e-4 * s * g.dot(step) || (Kc <= K + roundoff(K) && gc.norm() < g.norm())) {
                ups = cand;
                K = Kc;
                g = gc;
                H = Hc;
                ok = true;
                break;
            }
        }
        if (!ok) {
            if (!in_domain) throw Error(ErrorCode::DomainViolation, "no feasible step for the CGF saddlepoint");
            break;
        }
    }
    sol.upsilon = ups;
    sol.residual = g.norm();
    sol.K_value = K;
    sol.K_dagger = -K;
    sol.hessian = H;
    if (!sol.converged && sol.residual / m <= 1e-10) sol.converged = true;
    if (!sol.converged) throw Error(ErrorCode::NonConvergence, "CGF saddlepoint did not converge");
    return sol;
}

double exp_cgf(const Vector& upsilon, Eigen::Index j, const Vector& theta, const Vector& theta0,
               const SpectralModel& model, const FrequencyGrid& grid, ScoreVariant variant) {
    return ExpCgf(model, grid, theta0, variant).term(upsilon, j, theta);
}

SaddlepointSolution exp_legendre(const Vector& theta, const Vector& theta0, const SpectralModel& model,
                                 const FrequencyGrid& grid, ScoreVariant variant) {
    return ExpCgf(model, grid, theta0, variant).legendre(theta);
}

double exp_sadd_test_simple(const WhittleFit& fit, const Vector& theta0, const WhittleProblem& problem) {
    const ExpCgf cgf(problem.model(), problem.grid(), theta0, problem.variant());
    return std::max(0.0, 2.0 * cgf.legendre(fit.theta_hat.values).K_dagger);
}

CompositeSaddleResult exp_sadd_test_composite(const WhittleFit& fit, const std::vector<Eigen::Index>& tested,
                                              const Vector& theta1_0, const WhittleProblem& problem) {
    const Eigen::Index p = fit.theta_hat.values.size();
    if (static_cast<Eigen::Index>(tested.size()) != theta1_0.size()) {
        throw Error(ErrorCode::InvalidParameter, "tested slots and null value differ in length");
    }
    std::vector<bool> is_tested(static_cast<std::size_t>(p), false);
    for (auto k : tested) {
        if (k < 0 || k >= p || is_tested[static_cast<std::size_t>(k)]) {
            throw Error(ErrorCode::InvalidParameter, "bad tested slot");
        }
        is_tested[static_cast<std::size_t>(k)] = true;
    }
    std::vector<Eigen::Index> nuis;
    for (Eigen::Index k = 0; k < p; ++k) {
        if (!is_tested[static_cast<std::size_t>(k)]) nuis.push_back(k);
    }
    const Vector& th = fit.theta_hat.values;
    Vector theta0 = th;
    for (std::size_t a = 0; a < tested.size(); ++a) theta0[tested[a]] = theta1_0[static_cast<Eigen::Index>(a)];

    CompositeSaddleResult res;
    const ExpCgf cgf(problem.model(), problem.grid(), theta0, problem.variant());
    if (nuis.empty()) {
        res.statistic = std::max(0.0, 2.0 * cgf.legendre(th).K_dagger);
        res.inner_converged = res.outer_converged = true;
        return res;
    }

    bool inner_ok = true;
    auto objective = [&](const Vector& t2) {
        Vector theta = th;
        for (std::size_t a = 0; a < nuis.size(); ++a) theta[nuis[a]] = t2[static_cast<Eigen::Index>(a)];
        if (!problem.model().is_valid(theta)) return kInf;
        try {
            return cgf.legendre(theta).K_dagger;
        } catch (const Error&) {
            return kInf;
        }
    };
    Vector t2hat(static_cast<Eigen::Index>(nuis.size()));
    for (std::size_t a = 0; a < nuis.size(); ++a) t2hat[static_cast<Eigen::Index>(a)] = th[nuis[a]];
    const double at_hat = objective(t2hat);
    if (!std::isfinite(at_hat)) inner_ok = false;

    SimplexOptions so;
    so.initial_step = 0.02;
    so.max_evaluations = 300 * static_cast<int>(nuis.size() + 1);
    const SimplexResult sr = nelder_mead(objective, t2hat, so);
    res.outer_evaluations = sr.evaluations;
    res.outer_converged = sr.converged;
    if (sr.value <= at_hat) {
        res.nuisance = sr.x;
        res.statistic = 2.0 * sr.value;
    } else {
        res.nuisance = t2hat;
        res.statistic = 2.0 * at_hat;
    }
    res.inner_converged = inner_ok && std::isfinite(res.statistic);
    if (!std::isfinite(res.statistic)) throw Error(ErrorCode::NonConvergence, "inner saddlepoint failed everywhere");
    res.statistic = std::max(0.0, res.statistic);
    return res;
}

// ------------------------------------------------------------------ empirical

EmpiricalCgfContext EmpiricalCgfContext::at(const WhittleProblem& problem, const Vector& theta, bool with_jacobian) {
    ScoreSet s = problem.scores(theta, with_jacobian);
    EmpiricalCgfContext ctx;
    ctx.theta = theta;
    ctx.psi = std::move(s.psi);
    if (with_jacobian) ctx.jac = std::move(s.jac);
    return ctx;
}

double emp_cgf(const Vector& upsilon, const EmpiricalCgfContext& ctx) { return log_mean_exp(ctx.psi * upsilon); }

Vector tilt_weights(const Vector& upsilon, const EmpiricalCgfContext& ctx) {
    const Vector a = ctx.psi * upsilon;
    Vector w = (a.array() - a.maxCoeff()).exp().matrix();
    return w / w.sum();
}

SaddlepointSolution solve_emp_saddlepoint(const EmpiricalCgfContext& ctx, const Vector& upsilon_init,
                                          const EmpSolverOptions& opts) {
    const Eigen::Index p = ctx.p();
    const double log_m = std::log(static_cast<double>(ctx.m()));
    Vector ups = upsilon_init.size() == p && upsilon_init.allFinite() ? upsilon_init : Vector::Zero(p);

    auto state = [&](const Vector& u, double& K, Vector& g, Matrix& H) {
        const Vector a = ctx.psi * u;
        const double mx = a.maxCoeff();
        const Vector e = (a.array() - mx).exp().matrix();
        const double se = e.sum();
        K = mx + std::log(se) - log_m;
        const Vector w = e / se;
        g = ctx.psi.transpose() * w;
        H = ctx.psi.transpose() * w.asDiagonal() * ctx.psi - g * g.transpose();
    };

    double K = 0.0;
    Vector g;
    Matrix H;
    state(ups, K, g, H);
    if (!std::isfinite(K)) {
        ups.setZero();
        state(ups, K, g, H);
    }
    SaddlepointSolution sol;
    bool converged = false;
    for (int it = 0; it < opts.max_iter; ++it) {
        sol.iterations = it + 1;
        if (g.norm() < opts.tol) {
            converged = true;
            break;
        }
        const Eigen::LDLT<Matrix> ldlt(H);
        const double scale = std::max(H.diagonal().maxCoeff(), 1e-300);
        if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 1e-13 * scale) {
            throw Error(ErrorCode::Degenerate, "tilted score covariance is singular");
        }
        const Vector step = ldlt.solve(-g);
        double s = 1.0;
        bool ok = false;
        for (int h = 0; h <= opts.max_halvings; ++h, s *= 0.5) {
            const Vector cand = ups + s * step;
            double Kc = 0.0;
            Vector gc;
            Matrix Hc;
            state(cand, Kc, gc, Hc);
            if (!std::isfinite(Kc)) continue;
            if (Kc <= K + 1e-4 * s * g.dot(step) || (Kc <= K + roundoff(K) && gc.norm() < g.norm())) {
                ups = cand;
                K = Kc;
                g = gc;
                H = Hc;
                ok = true;
                break;
            }
        }
        if (!ok) break;
        // K^ >= -ln m whenever a minimiser exists; going below means the
        // origin is outside the hull of the scores.
        if (K < -log_m - 1e-9) throw Error(ErrorCode::NonConvergence, "empirical saddlepoint does not exist");
    }
    if (!converged && g.norm() < opts.tol) converged = true;
    if (!converged) throw Error(ErrorCode::NonConvergence, "empirical saddlepoint did not converge");
    sol.upsilon = ups;
    sol.converged = true;
    sol.residual = g.norm();
    sol.K_value = K;
    sol.K_dagger = -K;
    sol.hessian = H + g * g.transpose();  // tilted second moment
    return sol;
}

EmpDensityValue emp_log_density_at(const WhittleProblem& problem, const Vector& theta, const Vector* upsilon_init,
                                   const EmpSolverOptions& opts) {
    const EmpiricalCgfContext ctx = EmpiricalCgfContext::at(problem, theta, true);
    const Eigen::Index p = ctx.p();
    const double m = static_cast<double>(ctx.m());
    EmpDensityValue out;
    out.saddle = solve_emp_saddlepoint(ctx, upsilon_init ? *upsilon_init : Vector::Zero(p), opts);
    const Vector w = tilt_weights(out.saddle.upsilon, ctx);

    Vector Mv = ctx.jac.transpose() * w;
    const Eigen::Map<const Matrix> M(Mv.data(), p, p);
    const Matrix S = ctx.psi.transpose() * w.asDiagonal() * ctx.psi;
    const Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::SingularTilt, "tilted second moment is not PD");
    out.log_det_Sigma = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const Eigen::PartialPivLU<Matrix> lu(M);
    const Matrix& LU = lu.matrixLU();
    double lad = 0.0;
    for (Eigen::Index k = 0; k < p; ++k) lad += std::log(std::abs(LU(k, k)));
    out.log_abs_det_M = lad;
    out.log_density = 0.5 * static_cast<double>(p) * std::log(m / (2.0 * std::numbers::pi)) + lad -
                      0.5 * out.log_det_Sigma + m * out.saddle.K_value;
    return out;
}

double emp_density_at(const WhittleProblem& problem, const Vector& theta) {
    problem.model().validate(theta);
    return std::exp(emp_log_density_at(problem, theta).log_density);
}

Vector emp_dagger_gradient(const EmpiricalCgfContext& ctx, const SaddlepointSolution& sp) {
    const Eigen::Index p = ctx.p();
    if (ctx.jac.rows() != ctx.m()) throw Error(ErrorCode::ConfigError, "context lacks score Jacobians");
    const Vector w = tilt_weights(sp.upsilon, ctx);
    const Vector Mv = ctx.jac.transpose() * w;
    const Eigen::Map<const Matrix> M(Mv.data(), p, p);
    // d/dtheta_b K^ = sum_j w_j sum_a upsilon_a d psi_ja / d theta_b
    return -(M.transpose() * sp.upsilon);
}

DensityGrid emp_density_grid_1d(const WhittleProblem& problem, const WhittleFit& fit, double half_width, int A,
                                bool warm_start) {
    if (problem.dim() != 1) throw Error(ErrorCode::ConfigError, "density grid needs a univariate parameter");
    if (!(half_width > 0.0) || A < 3) throw Error(ErrorCode::ConfigError, "bad density grid configuration");
    const int K = (A - 1 + 1) / 2;  // ceil((A-1)/2)
    const int n_pts = 2 * K + 1;
    const double centre = fit.theta_hat.values[0];
    DensityGrid g;
    g.points.resize(static_cast<std::size_t>(n_pts));
    g.upsilon.assign(g.points.size(), 0.0);
    g.K.assign(g.points.size(), 0.0);
    g.density.assign(g.points.size(), 0.0);
    g.failed.assign(g.points.size(), false);
    for (int k = -K; k <= K; ++k) g.points[static_cast<std::size_t>(k + K)] = centre + half_width * k / K;

    auto solve_at = [&](std::size_t idx, const Vector& init) -> std::optional<Vector> {
        Vector theta(1);
        theta[0] = g.points[idx];
        if (!problem.model().is_valid(theta)) return std::nullopt;
        try {
            const EmpDensityValue v = emp_log_density_at(problem, theta, &init);
            g.upsilon[idx] = v.saddle.upsilon[0];
            g.K[idx] = v.saddle.K_value;
            g.density[idx] = std::exp(v.log_density);
            return v.saddle.upsilon;
        } catch (const Error&) {
            return std::nullopt;
        }
    };

    const std::size_t c = static_cast<std::size_t>(K);
    const auto centre_sp = solve_at(c, Vector::Zero(1));
    if (!centre_sp) throw Error(ErrorCode::NonConvergence, "saddlepoint fails at the estimate");
    for (int dir : {1, -1}) {
        Vector prev = *centre_sp;
        bool dead = false;
        for (int k = 1; k <= K; ++k) {
            const auto idx = static_cast<std::size_t>(static_cast<int>(c) + dir * k);
            if (!dead) {
                const auto r = solve_at(idx, warm_start ? prev : Vector::Zero(1));
                if (r) {
                    prev = *r;
                    continue;
                }
                dead = true;
            }
            g.failed[idx] = true;
            g.density[idx] = 0.0;
            ++g.failures;
        }
    }
    double C = 0.0;
    for (std::size_t a = 1; a < g.points.size(); ++a) C += (g.points[a] - g.points[a - 1]) * g.density[a];
    if (!(C > 0.0)) throw Error(ErrorCode::NonConvergence, "density grid has no mass");
    g.normalizer = C;
    g.density_normalized.resize(g.points.size());
    for (std::size_t a = 0; a < g.points.size(); ++a) g.density_normalized[a] = g.density[a] / C;
    return g;
}

std::string density_grid_csv(const DensityGrid& grid) {
    std::ostringstream os;
    os.precision(17);
    os << "theta,upsilon,K,K_dagger,density_unnormalized,density_normalized\n";
    for (std::size_t a = 0; a < grid.points.size(); ++a) {
        os << grid.points[a] << ',' << grid.upsilon[a] << ',' << grid.K[a] << ',' << -grid.K[a] << ','
           << grid.density[a] << ',' << grid.density_normalized[a] << '\n';
    }
    return os.str();
}

void write_density_grid_csv(const DensityGrid& grid, const std::filesystem::path& path) {
    write_text_atomic(path, density_grid_csv(grid));
}

double fdet_statistic(const WhittleProblem& problem, const WhittleFit& fit, const Vector& theta0, WaldScale scale) {
    problem.model().validate(theta0);
    const EmpiricalCgfContext ctx = EmpiricalCgfContext::at(problem, theta0, false);
    const SaddlepointSolution sp = solve_emp_saddlepoint(ctx, Vector::Zero(ctx.p()));
    const double c = static_cast<double>(scale == WaldScale::M ? fit.m : fit.n);
    return std::max(0.0, 2.0 * c * sp.K_dagger);
}

OwenResult fdel_owen(const WhittleProblem& problem, const Vector& theta) {
    problem.model().validate(theta);
    const Matrix psi = problem.scores(theta, false).psi;
    const Eigen::Index p = psi.cols();
    const double m = static_cast<double>(psi.rows());
    Vector xi = Vector::Zero(p);

    auto eval = [&](const Vector& x, double& L, Vector* g, Matrix* H) {
        const Vector a = (psi * x).array() + 1.0;
        if (a.minCoeff() <= 1e-12) return false;
        L = a.array().log().sum();
        if (g) *g = psi.transpose() * a.cwiseInverse();
        if (H) *H = -(psi.transpose() * a.array().square().inverse().matrix().asDiagonal() * psi);
        return true;
    };
    double L = 0.0;
    Vector g;
    Matrix H;
    eval(xi, L, &g, &H);
    const double tol = 1e-10 * std::max(1.0, m);
    OwenResult res;
    bool converged = false;
    for (int it = 0; it < 200; ++it) {
        res.iterations = it + 1;
        if (g.norm() <= tol) {
            converged = true;
            break;
        }
        const Eigen::LDLT<Matrix> ldlt(-H);
        if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0) {
            throw Error(ErrorCode::InfeasibleTilt, "empirical likelihood Hessian is singular");
        }
        const Vector step = ldlt.solve(g);
        double s = 1.0;
        bool ok = false;
        for (int h = 0; h < 60; ++h, s *= 0.5) {
            const Vector cand = xi + s * step;
            double Lc = 0.0;
            Vector gc;
            Matrix Hc;
            if (!eval(cand, Lc, &gc, &Hc)) continue;
            if (Lc >= L + 1e-4 * s * g.dot(step) || (Lc >= L - roundoff(L) && gc.norm() < g.norm())) {
                xi = cand;
                L = Lc;
                g = gc;
                H = Hc;
                ok = true;
                break;
            }
        }
        if (!ok) break;
    }
    if (!converged && g.norm() <= tol) converged = true;
    if (!converged) throw Error(ErrorCode::InfeasibleTilt, "no positive-weight empirical likelihood solution");
    res.xi = xi;
    res.statistic = std::max(0.0, 2.0 * L);
    return res;
}

double fdel_owen_statistic(const WhittleProblem& problem, const Vector& theta) {
    return fdel_owen(problem, theta).statistic;
}

}  // namespace fdsad
