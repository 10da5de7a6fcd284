#pragma once

#include "fdsad/whittle.hpp"

#include <filesystem>
#include <vector>

namespace fdsad {

struct SaddlepointSolution {
    Vector upsilon;
    bool converged = false;
    double residual = 0.0;  ///< ||d K / d upsilon|| (empirical: mean tilted score)
    double K_value = 0.0;
    double K_dagger = 0.0;  ///< -K_value
    int iterations = 0;
    Matrix hessian;  ///< d^2 K / d upsilon^2 at the solution
};

/// Exponential-based CGF of the scores, built at a hypothesised theta0:
/// the ordinates are treated as I_j = f(lambda_j; theta0) E_j, E_j ~ Exp(1).
/// For Plain scores this is ln(-1/(f0 s_j)) - upsilon' z_j with
/// s_j = upsilon' z_j / f_j - 1/f0_j. Profiled scores use the centred
/// covariates and drop the linear term.
class ExpCgf {
public:
    ExpCgf(const SpectralModel& model, const FrequencyGrid& grid, Vector theta0,
           ScoreVariant variant = ScoreVariant::Plain);

    [[nodiscard]] const Vector& theta0() const noexcept { return theta0_; }
    [[nodiscard]] Eigen::Index m() const noexcept { return grid_->size(); }

    /// K_j(upsilon; theta). Throws DomainViolation when s_j >= 0.
    [[nodiscard]] double term(const Vector& upsilon, Eigen::Index j, const Vector& theta) const;
    /// sum_j K_j. Throws DomainViolation.
    [[nodiscard]] double value(const Vector& upsilon, const Vector& theta) const;
    /// sup_upsilon -sum_j K_j(upsilon; theta) by damped Newton from `init`.
    [[nodiscard]] SaddlepointSolution legendre(const Vector& theta, const Vector* init = nullptr) const;

private:
    struct Terms {
        Matrix u;   // m x p, multiplies the exponential variable
        Matrix v;   // m x p, linear part
        Vector w;   // f0 / f
    };
    [[nodiscard]] Terms terms(const Vector& theta) const;
    // returns false when outside the domain
    static bool eval(const Terms& t, const Vector& ups, double& K, Vector* grad, Matrix* hess);

    const SpectralModel* model_;
    const FrequencyGrid* grid_;
    Vector theta0_;
    Vector log_f0_;
    ScoreVariant variant_;
};

/// Standalone form of ExpCgf::term.
[[nodiscard]] double exp_cgf(const Vector& upsilon, Eigen::Index j, const Vector& theta, const Vector& theta0,
                             const SpectralModel& model, const FrequencyGrid& grid,
                             ScoreVariant variant = ScoreVariant::Plain);

[[nodiscard]] SaddlepointSolution exp_legendre(const Vector& theta, const Vector& theta0, const SpectralModel& model,
                                               const FrequencyGrid& grid, ScoreVariant variant = ScoreVariant::Plain);

/// 2 K~dagger(theta_hat) with the CGF built at theta0.
[[nodiscard]] double exp_sadd_test_simple(const WhittleFit& fit, const Vector& theta0, const WhittleProblem& problem);

struct CompositeSaddleResult {
    double statistic = 0.0;
    Vector nuisance;      ///< minimising theta_(2)
    bool outer_converged = false;
    bool inner_converged = false;
    int outer_evaluations = 0;
};

/// 2 inf_{theta2} K~dagger(theta1_hat, theta2). The reference null of the
/// inner CGF is (theta1_0, theta2_hat). The outer simplex starts at
/// theta2_hat and the result never exceeds the objective there.
[[nodiscard]] CompositeSaddleResult exp_sadd_test_composite(const WhittleFit& fit,
                                                            const std::vector<Eigen::Index>& tested,
                                                            const Vector& theta1_0, const WhittleProblem& problem);

/// Scores (and Jacobians) at one theta, for the empirical CGF.
struct EmpiricalCgfContext {
    Vector theta;
    Matrix psi;     ///< m x p
    RowMatrix jac;  ///< m x p*p, empty unless requested

    static EmpiricalCgfContext at(const WhittleProblem& problem, const Vector& theta, bool with_jacobian);
    [[nodiscard]] Eigen::Index m() const noexcept { return psi.rows(); }
    [[nodiscard]] Eigen::Index p() const noexcept { return psi.cols(); }
};

/// ln[(1/m) sum_j exp(upsilon' psi_j)], overflow safe.
[[nodiscard]] double emp_cgf(const Vector& upsilon, const EmpiricalCgfContext& ctx);

struct EmpSolverOptions {
    double tol = 1e-10;  ///< on || sum_j w_j psi_j || with normalised tilt weights w
    int max_iter = 100;
    int max_halvings = 40;
};

/// Minimises K^(upsilon; theta) by Newton with step halving. Throws
/// NonConvergence when the minimum does not exist or is not reached,
/// Degenerate when the scores are confined to a subspace.
[[nodiscard]] SaddlepointSolution solve_emp_saddlepoint(const EmpiricalCgfContext& ctx, const Vector& upsilon_init,
                                                        const EmpSolverOptions& opts = {});

/// Normalised tilt weights exp(upsilon' psi_j) / sum_k exp(upsilon' psi_k).
[[nodiscard]] Vector tilt_weights(const Vector& upsilon, const EmpiricalCgfContext& ctx);

struct EmpDensityValue {
    double log_density = 0.0;  ///< ln g^(theta), unnormalised
    SaddlepointSolution saddle;
    double log_abs_det_M = 0.0;
    double log_det_Sigma = 0.0;
};

/// (m/2pi)^{p/2} |det M^| |det Sigma^|^{-1/2} exp(m K^), evaluated in logs.
/// Throws SingularTilt when Sigma^ is not positive definite.
[[nodiscard]] EmpDensityValue emp_log_density_at(const WhittleProblem& problem, const Vector& theta,
                                                 const Vector* upsilon_init = nullptr,
                                                 const EmpSolverOptions& opts = {});
[[nodiscard]] double emp_density_at(const WhittleProblem& problem, const Vector& theta);

/// d K^dagger / d theta = -sum_j w_j (grad psi_j)' upsilon^ (envelope theorem).
[[nodiscard]] Vector emp_dagger_gradient(const EmpiricalCgfContext& ctx_with_jac, const SaddlepointSolution& sp);

struct DensityGrid {
    std::vector<double> points;
    std::vector<double> upsilon;
    std::vector<double> K;
    std::vector<double> density;  ///< unnormalised, 0 where the solver failed
    std::vector<double> density_normalized;
    std::vector<bool> failed;
    double normalizer = 0.0;  ///< C = sum_{a>=2} (v_a - v_{a-1}) g_a
    std::size_t failures = 0;
};

/// Grid theta_hat + half_width * k / K, k = -K..K with K = ceil((A-1)/2),
/// swept outward from the centre with warm starts. Points past the first
/// failure on each side are marked failed with density 0.
[[nodiscard]] DensityGrid emp_density_grid_1d(const WhittleProblem& problem, const WhittleFit& fit,
                                              double half_width, int A = 100, bool warm_start = true);

/// CSV with header `theta,upsilon,K,K_dagger,density_unnormalized,density_normalized`.
[[nodiscard]] std::string density_grid_csv(const DensityGrid& grid);
void write_density_grid_csv(const DensityGrid& grid, const std::filesystem::path& path);

/// 2 * scale * K^dagger(theta0), scale = m or n.
[[nodiscard]] double fdet_statistic(const WhittleProblem& problem, const WhittleFit& fit, const Vector& theta0,
                                    WaldScale scale = WaldScale::M);

struct OwenResult {
    double statistic = 0.0;
    Vector xi;
    int iterations = 0;
};

/// Maximises sum_j ln(1 + xi' psi_j) over the region where all terms are
/// positive; returns 2 * the maximum. Throws InfeasibleTilt when theta lies
/// outside the empirical-likelihood hull.
[[nodiscard]] OwenResult fdel_owen(const WhittleProblem& problem, const Vector& theta);
[[nodiscard]] double fdel_owen_statistic(const WhittleProblem& problem, const Vector& theta);

}  // namespace fdsad
