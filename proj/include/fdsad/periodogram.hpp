#pragma once

#include "fdsad/spectral_models.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace fdsad {

/// Observations X_1..X_n. Entries are finite and the series is non-empty;
/// spectral operations additionally require n >= 8.
class TimeSeriesData {
public:
    TimeSeriesData() = default;
    explicit TimeSeriesData(std::vector<double> values);

    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] double operator[](std::size_t i) const noexcept { return values_[i]; }
    [[nodiscard]] double mean() const;
    [[nodiscard]] double variance() const;  ///< divisor n

private:
    std::vector<double> values_;
};

inline constexpr std::size_t kMinSpectralLength = 8;

/// Data taper h on [0,1].
class Taper {
public:
    enum class Kind { None, Cosine, Custom };

    static Taper none() { return Taper{}; }
    /// Split cosine bell tapering `proportion` of the data at each end.
    static Taper cosine(double proportion = 0.1);
    /// Samples of h on an equispaced grid over [0,1], linearly interpolated.
    static Taper custom(std::vector<double> samples);

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] double weight(double u) const;
    [[nodiscard]] std::vector<double> weights(std::size_t n) const;  ///< h(t/n), t = 1..n

private:
    Kind kind_ = Kind::None;
    double proportion_ = 0.0;
    std::vector<double> samples_;
};

/// Periodogram ordinates at the positive Fourier frequencies j = 1..m.
struct Periodogram {
    std::size_t n = 0;
    std::vector<double> frequencies;
    std::vector<double> ordinates;

    [[nodiscard]] std::size_t m() const noexcept { return ordinates.size(); }
};

/// 2 pi j / n for j = 1..floor((n-1)/2). Throws TooShort for n < 8.
[[nodiscard]] std::vector<double> fourier_frequencies(std::size_t n);

/// I_j = |sum_t h(t/n) X_t e^{-i t lambda_j}|^2 / (2 pi sum_t h(t/n)^2), via FFT.
/// The series is not demeaned.
[[nodiscard]] Periodogram compute_periodogram(const TimeSeriesData& x, const Taper& taper = Taper::none());

/// I_j / f(lambda_j; theta).
[[nodiscard]] std::vector<double> standardized_ordinates(const Periodogram& pg, const SpectralModel& model,
                                                         const Vector& theta);

/// CSV with header `j,lambda,I`.
void write_periodogram_csv(const Periodogram& pg, const std::filesystem::path& path);

}  // namespace fdsad
