#pragma once

#include "fdsad/saddlepoint.hpp"
#include "fdsad/whittle.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace fdsad {

enum class StatisticKind { Wald, Fdet, Owen };

[[nodiscard]] std::string_view to_string(StatisticKind s) noexcept;
[[nodiscard]] StatisticKind statistic_from_string(std::string_view s);

/// Simple when `tested` is empty (theta0 has full length); composite
/// otherwise (theta0 holds the tested components in the order of `tested`).
struct HypothesisSpec {
    std::vector<Eigen::Index> tested;
    Vector theta0;
    StatisticKind statistic = StatisticKind::Wald;

    [[nodiscard]] bool composite() const noexcept { return !tested.empty(); }
    [[nodiscard]] Eigen::Index dof(Eigen::Index p) const noexcept {
        return composite() ? static_cast<Eigen::Index>(tested.size()) : p;
    }
};

/// Which density is integrated. `Proposal` replaces the saddlepoint density
/// by the Gaussian proposal itself (a calibration check).
enum class IsDensity { Fdes, Proposal };

struct IsConfig {
    std::size_t R = 10000;
    std::uint64_t seed = 1;
    double inflation = 1.0;  ///< proposal covariance c * V / m
    WaldScale scale = WaldScale::M;
    IsDensity density = IsDensity::Fdes;
    double unreliable_fraction = 0.2;
};

struct IsEstimate {
    double estimate = 0.0;
    double se = 0.0;
};

/// Plain importance sampling: mean of 1_S(z) f(z) / phi(z) over R Gaussian
/// draws. Throws DegenerateProposal when `cov` is not positive definite.
[[nodiscard]] IsEstimate importance_sample(const std::function<double(const Vector&)>& integrand,
                                           const std::function<bool(const Vector&)>& region, const Vector& mean,
                                           const Matrix& cov, std::size_t R, std::uint64_t seed);

/// One shared importance sample: per draw the log weight ln g(z) - ln phi(z)
/// (or -inf) and the statistic w(z). Numerator and denominator of every
/// p-value or CDF value are formed from these same draws.
struct FdesSample {
    std::vector<double> log_weight;
    std::vector<double> statistic;
    double observed = 0.0;  ///< w(theta0)
    std::size_t R = 0;
    std::size_t outside = 0;   ///< draws outside the parameter space
    std::size_t failures = 0;  ///< saddlepoint failures inside it
    std::uint64_t seed = 0;

    [[nodiscard]] std::size_t n_effective() const;
    [[nodiscard]] bool unreliable(double fraction = 0.2) const;
    /// IS(w > x) / IS(Theta) and its delta-method standard error.
    [[nodiscard]] IsEstimate tail(double x) const;
    [[nodiscard]] double cdf(double x) const { return 1.0 - tail(x).estimate; }
    /// Inverse CDF by bisection.
    [[nodiscard]] double quantile(double prob) const;
};

/// Draws the sample for `hyp`; the statistic as a function of theta is the
/// one named in the hypothesis (Wald with the fitted V; FDET 2 scale K^dagger;
/// Owen). For composite hypotheses the nuisance slots of each draw are
/// replaced by the fitted values before evaluating the statistic.
[[nodiscard]] FdesSample fdes_sample(const WhittleProblem& problem, const WhittleFit& fit, const HypothesisSpec& hyp,
                                     const IsConfig& cfg);

struct TestReport {
    std::string hypothesis;
    StatisticKind statistic = StatisticKind::Wald;
    double statistic_value = 0.0;
    double p_fdes = 0.0;
    double p_chi2 = 0.0;
    double mc_se = 0.0;
    Eigen::Index dof = 0;
    std::size_t R = 0;
    std::uint64_t seed = 0;
    std::size_t n_effective = 0;
    std::size_t failures = 0;
    std::size_t outside = 0;
    bool unreliable = false;
};

[[nodiscard]] TestReport report_from_sample(const FdesSample& s, const HypothesisSpec& hyp, Eigen::Index p,
                                            const IsConfig& cfg, const std::vector<std::string>& names = {});

/// Algorithm: shared proposal draws, p = IS(B) / IS(Theta),
/// B = {theta : w(theta) > w(theta0)}. Throws AllWeightsZero.
[[nodiscard]] TestReport p_value_fdes(const WhittleProblem& problem, const WhittleFit& fit, const HypothesisSpec& hyp,
                                      const IsConfig& cfg);
/// Nuisance handling through the integration set; `hyp` must be composite.
[[nodiscard]] TestReport p_value_fdes_composite(const WhittleProblem& problem, const WhittleFit& fit,
                                                const HypothesisSpec& hyp, const IsConfig& cfg);

/// 1 - IS(w > x)/IS(Theta) at each x, from one shared sample.
[[nodiscard]] std::vector<double> cdf_approx(const WhittleProblem& problem, const WhittleFit& fit,
                                             const HypothesisSpec& hyp, const IsConfig& cfg,
                                             const std::vector<double>& xs);

/// Value of the hypothesis' statistic at the null.
[[nodiscard]] double observed_statistic(const WhittleProblem& problem, const WhittleFit& fit,
                                        const HypothesisSpec& hyp, WaldScale scale = WaldScale::M);

/// Upper chi-square tail via the regularised incomplete gamma function.
[[nodiscard]] double p_value_chi2(double x, double dof);
[[nodiscard]] double chi2_quantile(double prob, double dof);

/// Inverse of a nondecreasing CDF by bisection on [lo, hi] (hi is grown
/// until cdf(hi) >= prob).
[[nodiscard]] double invert_cdf(const std::function<double(double)>& cdf, double prob, double lo = 0.0,
                                double hi = 1.0, double tol = 1e-10);
/// Type-7 sample quantiles.
[[nodiscard]] std::vector<double> quantiles_type7(std::vector<double> samples, const std::vector<double>& probs);
[[nodiscard]] std::vector<double> quantiles_table(const std::function<double(double)>& cdf,
                                                  const std::vector<double>& probs = {0.90, 0.95, 0.99});

}  // namespace fdsad
