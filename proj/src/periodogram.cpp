#include "fdsad/periodogram.hpp"

#include "fdsad/error.hpp"
#include "fdsad/io.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>
#include <sstream>

namespace fdsad {
namespace {

// FFTW's planner is not re-entrant. Plans are cached per length and executed
// through the new-array interface on call-local buffers.
class PlanCache {
public:
    fftw_plan get(int n) {
        std::lock_guard lock(mutex_);
        auto it = plans_.find(n);
        if (it != plans_.end()) return it->second;
        auto* in = static_cast<double*>(fftw_malloc(sizeof(double) * static_cast<std::size_t>(n)));
        auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(n / 2 + 1)));
        fftw_plan plan = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
        fftw_free(in);
        fftw_free(out);
        plans_.emplace(n, plan);
        return plan;
    }

    ~PlanCache() {
        for (auto& [n, plan] : plans_) fftw_destroy_plan(plan);
    }

private:
    std::mutex mutex_;
    std::map<int, fftw_plan> plans_;
};

PlanCache& plan_cache() {
    static PlanCache cache;
    return cache;
}

struct FftwDeleter {
    void operator()(void* p) const noexcept { fftw_free(p); }
};

}  // namespace

TimeSeriesData::TimeSeriesData(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw Error(ErrorCode::EmptySeries, "time series is empty");
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw Error(ErrorCode::ParseError, "non-finite observation at index " + std::to_string(i + 1));
        }
    }
}

double TimeSeriesData::mean() const {
    return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
}

double TimeSeriesData::variance() const {
    const double mu = mean();
    double s = 0.0;
    for (double v : values_) s += (v - mu) * (v - mu);
    return s / static_cast<double>(values_.size());
}

Taper Taper::cosine(double proportion) {
    if (!(proportion > 0.0 && proportion <= 0.5)) {
        throw Error(ErrorCode::ConfigError, "cosine taper proportion must be in (0, 0.5]");
    }
    Taper t;
    t.kind_ = Kind::Cosine;
    t.proportion_ = proportion;
    return t;
}

Taper Taper::custom(std::vector<double> samples) {
    if (samples.size() < 2) throw Error(ErrorCode::ConfigError, "custom taper needs at least two samples");
    for (double v : samples) {
        if (!std::isfinite(v)) throw Error(ErrorCode::ConfigError, "custom taper samples must be finite");
    }
    Taper t;
    t.kind_ = Kind::Custom;
    t.samples_ = std::move(samples);
    return t;
}

double Taper::weight(double u) const {
    switch (kind_) {
        case Kind::None:
            return 1.0;
        case Kind::Cosine: {
            if (u < proportion_) return 0.5 * (1.0 - std::cos(std::numbers::pi * u / proportion_));
            if (u > 1.0 - proportion_) return 0.5 * (1.0 - std::cos(std::numbers::pi * (1.0 - u) / proportion_));
            return 1.0;
        }
        case Kind::Custom: {
            const double pos = std::clamp(u, 0.0, 1.0) * static_cast<double>(samples_.size() - 1);
            const auto i = std::min(static_cast<std::size_t>(pos), samples_.size() - 2);
            const double frac = pos - static_cast<double>(i);
            if (frac == 0.0) return samples_[i];
            return samples_[i] + frac * (samples_[i + 1] - samples_[i]);
        }
    }
    return 1.0;
}

std::vector<double> Taper::weights(std::size_t n) const {
    std::vector<double> h(n);
    for (std::size_t t = 1; t <= n; ++t) h[t - 1] = weight(static_cast<double>(t) / static_cast<double>(n));
    return h;
}

std::vector<double> fourier_frequencies(std::size_t n) {
    if (n < kMinSpectralLength) {
        throw Error(ErrorCode::TooShort, "need at least 8 observations, got " + std::to_string(n));
    }
    const std::size_t m = (n - 1) / 2;
    std::vector<double> lam(m);
    for (std::size_t j = 1; j <= m; ++j) {
        lam[j - 1] = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
    }
    return lam;
}

Periodogram compute_periodogram(const TimeSeriesData& x, const Taper& taper) {
    const std::size_t n = x.size();
    Periodogram pg;
    pg.n = n;
    pg.frequencies = fourier_frequencies(n);
    const std::size_t m = pg.frequencies.size();

    std::unique_ptr<double, FftwDeleter> in(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
    std::unique_ptr<fftw_complex, FftwDeleter> out(
        static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1))));

    double h2 = 0.0;
    if (taper.kind() == Taper::Kind::None) {
        std::copy(x.values().begin(), x.values().end(), in.get());
        h2 = static_cast<double>(n);
    } else {
        const auto h = taper.weights(n);
        for (std::size_t t = 0; t < n; ++t) {
            in.get()[t] = h[t] * x[t];
            h2 += h[t] * h[t];
        }
    }
    if (!(h2 > 0.0)) throw Error(ErrorCode::ConfigError, "taper has zero energy");

    // FFTW indexes time from 0; the extra phase e^{-i lambda} of t = 1..n does not change |d_n|.
    fftw_execute_dft_r2c(plan_cache().get(static_cast<int>(n)), in.get(), out.get());
    const double scale = 1.0 / (2.0 * std::numbers::pi * h2);
    pg.ordinates.resize(m);
    for (std::size_t j = 1; j <= m; ++j) {
        const double re = out.get()[j][0];
        const double im = out.get()[j][1];
        pg.ordinates[j - 1] = (re * re + im * im) * scale;
    }
    return pg;
}

std::vector<double> standardized_ordinates(const Periodogram& pg, const SpectralModel& model, const Vector& theta) {
    model.validate(theta);
    const auto grid = model.make_grid(pg.frequencies);
    const auto ev = model.evaluate(grid, theta, false);
    std::vector<double> out(pg.m());
    for (std::size_t j = 0; j < pg.m(); ++j) out[j] = pg.ordinates[j] * std::exp(-ev.log_f[static_cast<Eigen::Index>(j)]);
    return out;
}

void write_periodogram_csv(const Periodogram& pg, const std::filesystem::path& path) {
    std::ostringstream os;
    os.precision(17);
    os << "j,lambda,I\n";
    for (std::size_t j = 0; j < pg.m(); ++j) os << (j + 1) << ',' << pg.frequencies[j] << ',' << pg.ordinates[j] << '\n';
    write_text_atomic(path, os.str());
}

}  // namespace fdsad
