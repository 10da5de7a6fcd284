#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fdsad {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Named slots of a parameter vector. Indices refer to positions in
/// `ParamVector::values`.
struct ParamLayout {
    std::optional<Eigen::Index> d;
    std::vector<Eigen::Index> ar;
    std::vector<Eigen::Index> ma;
    std::vector<Eigen::Index> eta;
    std::optional<Eigen::Index> sigma2;
    std::vector<std::string> names;

    [[nodiscard]] Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(names.size()); }
    [[nodiscard]] std::optional<Eigen::Index> index_of(std::string_view name) const;
};

/// Admissible range for the memory parameter, half-open [lower, upper).
struct MemoryRange {
    double lower = 0.0;
    double upper = 0.5;
};

/// Parameter vector with its slot layout.
struct ParamVector {
    ParamLayout layout;
    Vector values;

    /// Throws InvalidParameter when the layout is inconsistent, d is outside
    /// `range` or sigma2 is not positive.
    void check(MemoryRange range = {}) const;
    [[nodiscard]] double at(std::string_view name) const;
};

/// Fourier frequencies with the trigonometric tables the models need,
/// precomputed once per periodogram.
class FrequencyGrid {
public:
    FrequencyGrid() = default;
    explicit FrequencyGrid(std::span<const double> lambdas, int max_order = 0);

    [[nodiscard]] Eigen::Index size() const noexcept { return lambdas_.size(); }
    [[nodiscard]] const Vector& lambdas() const noexcept { return lambdas_; }
    [[nodiscard]] double lambda(Eigen::Index j) const noexcept { return lambdas_[j]; }
    /// ln|1 - e^{i lambda}|^2 = ln(4 sin^2(lambda/2)).
    [[nodiscard]] double log_pole(Eigen::Index j) const noexcept { return log_pole_[j]; }
    /// cos(k lambda_j), sin(k lambda_j) for k = 1..max_order.
    [[nodiscard]] double cos_k(Eigen::Index j, int k) const noexcept { return cos_(j, k - 1); }
    [[nodiscard]] double sin_k(Eigen::Index j, int k) const noexcept { return sin_(j, k - 1); }
    [[nodiscard]] int max_order() const noexcept { return static_cast<int>(cos_.cols()); }
    [[nodiscard]] const double* cos_row(Eigen::Index j) const noexcept { return cos_.row(j).data(); }
    [[nodiscard]] const double* sin_row(Eigen::Index j) const noexcept { return sin_.row(j).data(); }

private:
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Vector lambdas_;
    Vector log_pole_;
    RowMajor cos_;
    RowMajor sin_;
};

/// ln f, its gradient z_j and (optionally) its Hessian at every frequency.
struct SpectralEval {
    Vector log_f;   ///< m
    Matrix z;       ///< m x p, row j = grad ln f(lambda_j)
    RowMatrix hessian; ///< m x (p*p), row j = column-major Hessian of ln f; empty if not requested

    [[nodiscard]] Eigen::Map<const Matrix> hess(Eigen::Index j, Eigen::Index p) const {
        return {hessian.row(j).data(), p, p};
    }
};

enum class Family { Arfima, Fexp };

/// Parametric spectral density family: ARFIMA(p,d,q) or FEXP with long
/// memory component g and short memory basis q_1..q_p.
class SpectralModel {
public:
    using ScalarFn = std::function<double(double)>;

    /// ARFIMA(p,d,q) with phi(z) = 1 - sum phi_k z^k, theta(z) = 1 + sum ma_k z^k.
    /// Slot order: d, phi_1..phi_p, ma_1..ma_q, [sigma2]. With `fix_sigma2` the
    /// innovation variance is 1 and no sigma2 slot exists.
    static SpectralModel arfima(int p_order, int q_order, bool fix_sigma2);

    /// FEXP: f = g(lambda)^{-2d} exp(sum_{k=0}^p eta_k q_k(lambda)), q_0 = 1.
    /// Defaults: g(lambda) = |1 - e^{i lambda}|, q_k = cos(k lambda).
    /// Slot order: d, eta_0..eta_p.
    static SpectralModel fexp(int p_order, ScalarFn g = {}, std::vector<ScalarFn> basis = {});

    [[nodiscard]] Family family() const noexcept { return family_; }
    [[nodiscard]] int ar_order() const noexcept { return p_order_; }
    [[nodiscard]] int ma_order() const noexcept { return q_order_; }
    [[nodiscard]] int fexp_order() const noexcept { return p_order_; }
    [[nodiscard]] bool has_sigma2() const noexcept { return layout_.sigma2.has_value(); }
    [[nodiscard]] bool unit_variance() const noexcept { return !has_sigma2(); }
    [[nodiscard]] const ParamLayout& layout() const noexcept { return layout_; }
    [[nodiscard]] Eigen::Index dim() const noexcept { return layout_.size(); }
    [[nodiscard]] int max_trig_order() const noexcept;

    [[nodiscard]] MemoryRange memory_range() const noexcept { return d_range_; }
    void set_memory_range(MemoryRange range);

    [[nodiscard]] ParamVector params(Vector values) const { return {layout_, std::move(values)}; }

    /// Throws InvalidParameter with the reason.
    void validate(const Vector& theta) const;
    [[nodiscard]] bool is_valid(const Vector& theta) const noexcept;
    /// Null when theta is admissible.
    [[nodiscard]] const char* invalid_reason(const Vector& theta) const noexcept;

    [[nodiscard]] double density(double lambda, const Vector& theta) const;
    [[nodiscard]] double log_density(double lambda, const Vector& theta) const;
    [[nodiscard]] Vector log_gradient(double lambda, const Vector& theta) const;
    [[nodiscard]] Matrix log_hessian(double lambda, const Vector& theta) const;

    /// Batch evaluation over a frequency grid. Does not validate theta.
    [[nodiscard]] SpectralEval evaluate(const FrequencyGrid& grid, const Vector& theta,
                                        bool with_hessian) const;
    [[nodiscard]] FrequencyGrid make_grid(std::span<const double> lambdas) const;

    /// d = 0.1, AR/MA = 0, sigma2 = sample variance, eta_0 = ln(sample variance / 2pi).
    [[nodiscard]] Vector default_init(double sample_variance) const;

    /// FEXP covariates [ln g(lambda), 1, q_1(lambda), ..., q_p(lambda)].
    [[nodiscard]] Vector fexp_covariates(double lambda) const;

    [[nodiscard]] std::string describe() const;

private:
    SpectralModel() = default;

    struct TrigPoint {
        double lambda;
        double log_pole;
        const double* cosk;  // cos(k lambda), k = 1..max_trig_order
        const double* sink;
    };
    // z has length p, hess is p*p column-major (may be null).
    void evaluate_point(const TrigPoint& pt, const Vector& theta, double& log_f, double* z,
                        double* hess) const;
    void evaluate_single(double lambda, const Vector& theta, double& log_f, double* z,
                         double* hess) const;

    Family family_ = Family::Arfima;
    int p_order_ = 0;
    int q_order_ = 0;
    ParamLayout layout_;
    MemoryRange d_range_{};
    ScalarFn g_;
    std::vector<ScalarFn> basis_;
    bool default_fexp_basis_ = true;
};

/// Pure AR/MA root checks; tolerance is distance from the unit circle.
[[nodiscard]] bool ar_is_causal(std::span<const double> phi, double tol = 1e-8);
[[nodiscard]] bool ma_is_invertible(std::span<const double> ma, double tol = 1e-8);

/// ARFIMA spectral density; the model orders are read from the layout.
[[nodiscard]] double arfima_spectral_density(double lambda, const ParamVector& theta);
[[nodiscard]] Vector arfima_log_gradient(double lambda, const ParamVector& theta);
[[nodiscard]] double fexp_spectral_density(double lambda, const ParamVector& theta,
                                           const SpectralModel::ScalarFn& g = {});

}  // namespace fdsad
