#pragma once

#include "fdsad/periodogram.hpp"
#include "fdsad/spectral_models.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fdsad {

/// Plain: psi_j = (I_j/f_j - 1) z_j.
/// Profiled: psi_j = (I_j/f1_j) (z_j - mean_k z_k), f1 the unit-variance density;
/// the mean runs over the same m frequencies.
enum class ScoreVariant { Plain, Profiled };

[[nodiscard]] std::string_view to_string(ScoreVariant v) noexcept;

/// Per-frequency scores and (optionally) their Jacobians.
struct ScoreSet {
    Matrix psi;  ///< m x p
    RowMatrix jac;  ///< m x p*p, row j = column-major d psi_j / d theta (entry (a,b) = d psi_a / d theta_b)

    [[nodiscard]] Eigen::Index m() const noexcept { return psi.rows(); }
    [[nodiscard]] Eigen::Index p() const noexcept { return psi.cols(); }
    [[nodiscard]] Eigen::Map<const Matrix> jacobian(Eigen::Index j) const { return {jac.row(j).data(), p(), p()}; }
    [[nodiscard]] Vector sum() const { return psi.colwise().sum().transpose(); }
    [[nodiscard]] Matrix jacobian_sum() const;
};

/// A periodogram bound to a model and score variant, with the frequency
/// tables computed once.
class WhittleProblem {
public:
    WhittleProblem(Periodogram pg, SpectralModel model, ScoreVariant variant);

    [[nodiscard]] const Periodogram& periodogram() const noexcept { return pg_; }
    [[nodiscard]] const SpectralModel& model() const noexcept { return model_; }
    [[nodiscard]] ScoreVariant variant() const noexcept { return variant_; }
    [[nodiscard]] const FrequencyGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] Eigen::Index m() const noexcept { return static_cast<Eigen::Index>(pg_.m()); }
    [[nodiscard]] Eigen::Index dim() const noexcept { return model_.dim(); }

    /// Does not validate theta.
    [[nodiscard]] ScoreSet scores(const Vector& theta, bool with_jacobian) const;
    [[nodiscard]] Vector score_sum(const Vector& theta) const;

    /// sum_j [ln f_j + I_j / f_j].
    [[nodiscard]] double neg_loglik(const Vector& theta) const;
    /// Objective whose stationary points solve the score equations:
    /// neg_loglik for Plain, sum ln f1 + m ln sum(I/f1) for Profiled.
    [[nodiscard]] double objective(const Vector& theta) const;
    /// mean_j I_j / f1_j (Profiled only).
    [[nodiscard]] double profiled_sigma2(const Vector& theta) const;

private:
    Periodogram pg_;
    SpectralModel model_;
    ScoreVariant variant_;
    FrequencyGrid grid_;
    Vector I_;
};

enum class FitStatus { Converged, NonConvergence, BoundaryHit, SingularJacobian };

[[nodiscard]] std::string_view to_string(FitStatus s) noexcept;

struct SolverOptions {
    std::optional<double> tol;  ///< on ||sum psi||; default 1e-8 * m
    int max_iter = 100;
    bool fallback_simplex = true;
    /// When Newton and the simplex both fail: Newton from a fixed grid of
    /// interior starts, keeping the converged root with the lowest objective.
    bool multistart = true;
};

struct WhittleFit {
    ParamVector theta_hat;
    std::optional<double> sigma2_hat;
    Matrix A_hat;  ///< mean_j grad psi_j
    Matrix B_hat;  ///< mean_j psi_j psi_j^T
    Matrix V_hat;  ///< A^-1 B A^-T
    bool converged = false;
    FitStatus status = FitStatus::NonConvergence;
    int iterations = 0;
    double score_norm = 0.0;
    ScoreVariant variant = ScoreVariant::Plain;
    std::size_t n = 0;
    std::size_t m = 0;
};

[[nodiscard]] double whittle_neg_loglik(const Periodogram& pg, const SpectralModel& model, const Vector& theta);
[[nodiscard]] Vector score_sum(const Periodogram& pg, const SpectralModel& model, const Vector& theta,
                               ScoreVariant variant);

/// Damped Newton on the score with backtracking on ||score||^2; falls back to
/// a Nelder-Mead minimisation of `objective` followed by Newton polishing.
/// Failure is reported through `converged`/`status`, never by clamping.
[[nodiscard]] WhittleFit solve_whittle(const WhittleProblem& problem, const Vector& theta_init,
                                       const SolverOptions& opts = {});
[[nodiscard]] WhittleFit solve_whittle(const Periodogram& pg, const SpectralModel& model, const Vector& theta_init,
                                       ScoreVariant variant, const SolverOptions& opts = {});

/// A, B and V at an arbitrary theta (used by solve_whittle at theta_hat).
void sandwich(const WhittleProblem& problem, const Vector& theta, Matrix& A, Matrix& B, Matrix& V);

enum class WaldScale { M, N };

/// scale * (theta_hat - theta0)^T V^-1 (theta_hat - theta0), scale = m or n.
[[nodiscard]] double wald_statistic(const WhittleFit& fit, const Vector& theta0, WaldScale scale = WaldScale::M);
/// Same restricted to `slots`, using the corresponding block of V.
[[nodiscard]] double wald_statistic(const WhittleFit& fit, const std::vector<Eigen::Index>& slots,
                                    const Vector& theta1_0, WaldScale scale = WaldScale::M);

/// Quadratic form with an explicit centre and precision: c * (a-b)^T P (a-b).
[[nodiscard]] double quadratic_form(const Vector& a, const Vector& b, const Matrix& precision, double c);

/// Sigma_W = 4 pi (int_{-pi}^{pi} z z^T)^{-1}, midpoint rule in t with
/// lambda = pi t^3 to absorb the log singularity at the origin.
[[nodiscard]] Matrix asymptotic_covariance(const SpectralModel& model, const Vector& theta, int n_freq_grid = 10000);

}  // namespace fdsad
