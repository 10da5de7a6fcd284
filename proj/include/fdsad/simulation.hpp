#pragma once

#include "fdsad/parallel.hpp"
#include "fdsad/periodogram.hpp"
#include "fdsad/testing.hpp"
#include "fdsad/whittle.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fdsad {

/// Innovation laws, all with mean 0 and variance 1: N(0,1); U[-sqrt3, sqrt3];
/// t_6 * sqrt(4/6); (chi2_5 - 5)/sqrt(10).
enum class Innovation { Gaussian, Uniform, StudentT6, ChiSq5 };

[[nodiscard]] std::string_view to_string(Innovation k) noexcept;
[[nodiscard]] Innovation innovation_from_string(std::string_view s);
inline constexpr Innovation kAllInnovations[] = {Innovation::Gaussian, Innovation::Uniform, Innovation::StudentT6,
                                                 Innovation::ChiSq5};

class InnovationDist {
public:
    explicit InnovationDist(Innovation kind = Innovation::Gaussian) : kind_(kind) {}
    [[nodiscard]] Innovation kind() const noexcept { return kind_; }
    double operator()(Rng& rng) const;
    void fill(Rng& rng, std::span<double> out) const;

private:
    Innovation kind_;
};

/// phi(L) (1-L)^d X_t = theta(L) sigma eps_t, simulated by a truncated
/// MA(inf) fractional filter followed by the ARMA recursion.
struct ArfimaGenerator {
    double d = 0.0;
    std::vector<double> ar;
    std::vector<double> ma;
    double sigma2 = 1.0;
    std::size_t truncation = 5000;
    std::size_t burn_in = 1000;  ///< applied only when there is an AR part

    /// a_0..a_{T-1} with a_r = a_{r-1} (r-1+d)/r.
    [[nodiscard]] std::vector<double> weights() const;
    void validate() const;
    /// Reads d, AR, MA and sigma2 (1 for unit-variance models) from theta.
    static ArfimaGenerator from_model(const SpectralModel& model, const Vector& theta);
};

[[nodiscard]] TimeSeriesData simulate_arfima(std::size_t n, const ArfimaGenerator& gen, const InnovationDist& innov,
                                             std::uint64_t seed);

struct SwResult {
    double w = 1.0;
    double p_value = 1.0;
};

/// Shapiro-Wilk W and p-value by Royston's approximation (3 <= n <= 5000).
[[nodiscard]] SwResult shapiro_wilk(std::span<const double> x);

/// Phi^{-1}(1 - exp(-x)) elementwise, computed through the upper tail.
[[nodiscard]] std::vector<double> exponential_to_normal(std::span<const double> x);

struct SwCell {
    Innovation innovation = Innovation::Gaussian;
    double d = 0.0;
    std::size_t n = 0;
    std::size_t replicates = 0;
    double rejection_rate = 0.0;
};

/// For each (innovation, d, n): simulate ARFIMA(0,d,0), standardise the
/// ordinates by the true density, map to normal scores and record how often
/// Shapiro-Wilk rejects at `level`.
[[nodiscard]] std::vector<SwCell> shapiro_wilk_study(const std::vector<double>& d_values,
                                                     const std::vector<std::size_t>& n_values,
                                                     const std::vector<Innovation>& innovations,
                                                     std::size_t replicates, std::uint64_t seed,
                                                     double level = 0.05);

[[nodiscard]] std::string sw_table_csv(const std::vector<SwCell>& cells);

enum class NullStatistic { Wald, Fdet, Owen, Saddlepoint };

[[nodiscard]] std::string_view to_string(NullStatistic s) noexcept;
[[nodiscard]] NullStatistic null_statistic_from_string(std::string_view s);

struct McOptions {
    ScoreVariant variant = ScoreVariant::Plain;
    Innovation innovation = Innovation::Gaussian;
    WaldScale scale = WaldScale::M;
    std::vector<Eigen::Index> tested;  ///< composite Wald when non-empty
    SolverOptions solver{};
    std::size_t truncation = 5000;
    std::size_t burn_in = 1000;
};

struct McResult {
    std::vector<double> statistics;
    std::vector<std::size_t> replicate_index;  ///< source replicate of each statistic
    std::size_t requested = 0;
    std::size_t failures = 0;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::string model;

    [[nodiscard]] double convergence_fraction() const {
        return requested ? static_cast<double>(requested - failures) / static_cast<double>(requested) : 0.0;
    }
};

/// Series for replicate r of a Monte Carlo run (seed derived from (seed, r)).
[[nodiscard]] TimeSeriesData simulate_replicate(const SpectralModel& model, const Vector& theta0, std::size_t n,
                                                std::uint64_t seed, std::size_t r, const McOptions& opts = {});

/// Per replicate: simulate under theta0, fit from the default start, skip
/// non-convergent fits (counted), evaluate the statistic at theta0.
[[nodiscard]] McResult mc_null_distribution(const SpectralModel& model, const Vector& theta0, std::size_t n,
                                            std::size_t replicates, NullStatistic statistic, std::uint64_t seed,
                                            const McOptions& opts = {});

struct PowerPoint {
    std::size_t n = 0;
    double d = 0.0;
    double power = 0.0;
    double se = 0.0;
    std::size_t used = 0;
    std::size_t failures = 0;
};

/// Rejection rate of the exponential saddlepoint test of H0: d = d0 at the
/// chi2_1 critical value, data from ARFIMA(0,d,0) under each alternative.
[[nodiscard]] std::vector<PowerPoint> power_curve(const SpectralModel& model, double d0,
                                                  const std::vector<double>& alternatives,
                                                  const std::vector<std::size_t>& n_values, double level,
                                                  std::size_t replicates, std::uint64_t seed);

/// Saddlepoint approximation of the null distribution of a statistic, set
/// against the Monte Carlo truth. For each of the first `series` replicates of
/// `truth` (same seeds), the FDES CDF of the statistic is built by importance
/// sampling and its quantiles are taken; the reported FDES quantile is the
/// median over series, which is the quantile of the pointwise median CDF.
struct QuantileComparison {
    std::vector<double> probs;
    std::vector<double> truth;
    std::vector<double> fdes;
    std::vector<double> chi2;
    std::size_t series_used = 0;
    std::size_t series_failed = 0;
};

[[nodiscard]] QuantileComparison fdes_quantile_study(const McResult& truth, const SpectralModel& model,
                                                     const Vector& theta0, std::size_t series,
                                                     const HypothesisSpec& hyp, const IsConfig& is,
                                                     const std::vector<double>& probs, const McOptions& opts = {});

/// CSV with header `p,quantile_true,quantile_fdes,quantile_chi2`.
[[nodiscard]] std::string qq_table_csv(const QuantileComparison& q);

}  // namespace fdsad
