#include "fdsad/simulation.hpp"

#include "fdsad/error.hpp"
#include "fdsad/saddlepoint.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace fdsad {
namespace {

const boost::math::normal_distribution<double> kStdNormal{};

double poly(const double* c, int nord, double x) {
    double r = c[nord - 1];
    for (int k = nord - 2; k >= 0; --k) r = r * x + c[k];
    return r;
}

}  // namespace

std::string_view to_string(Innovation k) noexcept {
    switch (k) {
        case Innovation::Gaussian: return "gaussian";
        case Innovation::Uniform: return "uniform";
        case Innovation::StudentT6: return "student_t6";
        case Innovation::ChiSq5: return "chisq5";
    }
    return "unknown";
}

Innovation innovation_from_string(std::string_view s) {
    if (s == "gaussian" || s == "normal") return Innovation::Gaussian;
    if (s == "uniform") return Innovation::Uniform;
    if (s == "student_t6" || s == "t6") return Innovation::StudentT6;
    if (s == "chisq5" || s == "chi2_5") return Innovation::ChiSq5;
    throw Error(ErrorCode::ConfigError, "unknown innovation law '" + std::string(s) + "'");
}

double InnovationDist::operator()(Rng& rng) const {
    switch (kind_) {
        case Innovation::Gaussian: return std::normal_distribution<double>{}(rng);
        case Innovation::Uniform: {
            const double a = std::sqrt(3.0);
            return std::uniform_real_distribution<double>{-a, a}(rng);
        }
        case Innovation::StudentT6: return std::student_t_distribution<double>{6.0}(rng) * std::sqrt(4.0 / 6.0);
        case Innovation::ChiSq5: return (std::chi_squared_distribution<double>{5.0}(rng) - 5.0) / std::sqrt(10.0);
    }
    return 0.0;
}

void InnovationDist::fill(Rng& rng, std::span<double> out) const {
    switch (kind_) {
        case Innovation::Gaussian: {
            std::normal_distribution<double> nd;
            for (double& v : out) v = nd(rng);
            return;
        }
        case Innovation::Uniform: {
            const double a = std::sqrt(3.0);
            std::uniform_real_distribution<double> ud(-a, a);
            for (double& v : out) v = ud(rng);
            return;
        }
        case Innovation::StudentT6: {
            std::student_t_distribution<double> td(6.0);
            const double s = std::sqrt(4.0 / 6.0);
            for (double& v : out) v = td(rng) * s;
            return;
        }
        case Innovation::ChiSq5: {
            std::chi_squared_distribution<double> cd(5.0);
            const double s = 1.0 / std::sqrt(10.0);
            for (double& v : out) v = (cd(rng) - 5.0) * s;
            return;
        }
    }
}

std::vector<double> ArfimaGenerator::weights() const {
    std::vector<double> a(std::max<std::size_t>(truncation, 1));
    a[0] = 1.0;
    for (std::size_t r = 1; r < a.size(); ++r) {
        a[r] = a[r - 1] * (static_cast<double>(r) - 1.0 + d) / static_cast<double>(r);
    }
    return a;
}

void ArfimaGenerator::validate() const {
    if (!(d > -0.5 && d < 0.5)) throw Error(ErrorCode::InvalidParameter, "d must lie in (-0.5, 0.5)");
    if (!(sigma2 > 0.0)) throw Error(ErrorCode::InvalidParameter, "innovation variance must be positive");
    if (!ar_is_causal(ar)) throw Error(ErrorCode::InvalidParameter, "AR polynomial is not causal");
    if (truncation < 1) throw Error(ErrorCode::InvalidParameter, "truncation must be positive");
}

ArfimaGenerator ArfimaGenerator::from_model(const SpectralModel& model, const Vector& theta) {
    if (model.family() != Family::Arfima) throw Error(ErrorCode::ConfigError, "simulation supports ARFIMA models");
    model.validate(theta);
    const auto& lay = model.layout();
    ArfimaGenerator g;
    g.d = theta[*lay.d];
    for (auto k : lay.ar) g.ar.push_back(theta[k]);
    for (auto k : lay.ma) g.ma.push_back(theta[k]);
    g.sigma2 = lay.sigma2 ? theta[*lay.sigma2] : 1.0;
    return g;
}

TimeSeriesData simulate_arfima(std::size_t n, const ArfimaGenerator& gen, const InnovationDist& innov,
                               std::uint64_t seed) {
    gen.validate();
    if (n == 0) throw Error(ErrorCode::InvalidParameter, "series length must be positive");
    const std::size_t q = gen.ma.size();
    const std::size_t burn = gen.ar.empty() ? 0 : gen.burn_in;
    const std::size_t len = n + burn + q;  // fractional-noise values needed
    const bool fractional = gen.d != 0.0;
    const std::size_t T = fractional ? gen.truncation : 1;

    // eps[T-1 ..] drives the output window (stream 0); the prehistory eps[0 .. T-2]
    // comes from stream 1, most recent first, so a longer truncation only adds
    // older shocks and leaves the rest of the path's innovations unchanged.
    std::vector<double> eps(len + T - 1);
    Rng rng = make_rng(seed, 0);
    innov.fill(rng, std::span<double>(eps).subspan(T - 1));
    if (T > 1) {
        Rng pre = make_rng(seed, 1);
        for (std::size_t k = 1; k < T; ++k) eps[T - 1 - k] = innov(pre);
    }

    std::vector<double> y(len);
    if (fractional) {
        // y_t = sum_r a_r eps_{t+T-1-r}; with reversed weights this is a contiguous dot product.
        const std::vector<double> a = gen.weights();
        Vector wr(static_cast<Eigen::Index>(T));
        for (std::size_t k = 0; k < T; ++k) wr[static_cast<Eigen::Index>(k)] = a[T - 1 - k];
        for (std::size_t t = 0; t < len; ++t) {
            y[t] = wr.dot(Eigen::Map<const Vector>(eps.data() + t, static_cast<Eigen::Index>(T)));
        }
    } else {
        std::copy(eps.begin(), eps.end(), y.begin());
    }

    const std::size_t total = n + burn;
    std::vector<double> x(total);
    const std::size_t p = gen.ar.size();
    for (std::size_t t = 0; t < total; ++t) {
        double u = y[t + q];
        for (std::size_t k = 1; k <= q; ++k) u += gen.ma[k - 1] * y[t + q - k];
        for (std::size_t k = 1; k <= p && k <= t; ++k) u += gen.ar[k - 1] * x[t - k];
        x[t] = u;
    }
    const double s = std::sqrt(gen.sigma2);
    std::vector<double> out(x.begin() + static_cast<std::ptrdiff_t>(burn), x.end());
    if (s != 1.0) {
        for (double& v : out) v *= s;
    }
    return TimeSeriesData(std::move(out));
}

SwResult shapiro_wilk(std::span<const double> xin) {
    const std::size_t nn = xin.size();
    if (nn < 3) throw Error(ErrorCode::TooShort, "Shapiro-Wilk needs at least 3 observations");
    if (nn > 5000) throw Error(ErrorCode::InvalidParameter, "Shapiro-Wilk approximation is valid up to n = 5000");
    std::vector<double> x(xin.begin(), xin.end());
    std::sort(x.begin(), x.end());
    const double range = x.back() - x.front();
    if (!(range > 1e-19 * std::max(1.0, std::abs(x.back())))) {
        throw Error(ErrorCode::Degenerate, "Shapiro-Wilk input has zero range");
    }

    static constexpr double c1[] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
    static constexpr double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
    static constexpr double c3[] = {0.5440, -0.39978, 0.025054, -6.714e-4};
    static constexpr double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
    static constexpr double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
    static constexpr double c6[] = {-0.4803, -0.082676, 0.0030302};
    static constexpr double g[] = {-2.273, 0.459};

    const int n = static_cast<int>(nn);
    const int n2 = n / 2;
    const double an = n;
    std::vector<double> a(static_cast<std::size_t>(n2));
    if (n == 3) {
        a[0] = std::sqrt(0.5);
    } else {
        const double an25 = an + 0.25;
        double summ2 = 0.0;
        std::vector<double> mq(static_cast<std::size_t>(n2));
        for (int i = 0; i < n2; ++i) {
            mq[static_cast<std::size_t>(i)] = boost::math::quantile(kStdNormal, (i + 1 - 0.375) / an25);
            summ2 += mq[static_cast<std::size_t>(i)] * mq[static_cast<std::size_t>(i)];
        }
        summ2 *= 2.0;
        const double ssumm2 = std::sqrt(summ2);
        const double rsn = 1.0 / std::sqrt(an);
        const double a1 = poly(c1, 6, rsn) - mq[0] / ssumm2;
        int i1 = 0;
        double fac = 0.0;
        if (n > 5) {
            i1 = 2;
            const double a2 = -mq[1] / ssumm2 + poly(c2, 6, rsn);
            fac = std::sqrt((summ2 - 2.0 * mq[0] * mq[0] - 2.0 * mq[1] * mq[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
            a[0] = a1;
            a[1] = a2;
        } else {
            i1 = 1;
            fac = std::sqrt((summ2 - 2.0 * mq[0] * mq[0]) / (1.0 - 2.0 * a1 * a1));
            a[0] = a1;
        }
        for (int i = i1; i < n2; ++i) a[static_cast<std::size_t>(i)] = -mq[static_cast<std::size_t>(i)] / fac;
    }

    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= an;
    double ssq = 0.0;
    for (double v : x) ssq += (v - mean) * (v - mean);
    double num = 0.0;
    for (int i = 0; i < n2; ++i) {
        num += a[static_cast<std::size_t>(i)] * (x[static_cast<std::size_t>(n - 1 - i)] - x[static_cast<std::size_t>(i)]);
    }
    SwResult res;
    res.w = std::min(1.0, num * num / ssq);
    const double w1 = 1.0 - res.w;

    if (n == 3) {
        constexpr double pi6 = 6.0 / 3.14159265358979323846;
        constexpr double stqr = 3.14159265358979323846 / 3.0;
        res.p_value = std::max(0.0, pi6 * (std::asin(std::sqrt(res.w)) - stqr));
        return res;
    }
    if (!(w1 > 0.0)) {
        res.p_value = 1.0;
        return res;
    }
    double y = std::log(w1);
    const double xx = std::log(an);
    double m = 0.0;
    double s = 0.0;
    if (n <= 11) {
        const double gamma = poly(g, 2, an);
        if (y >= gamma) {
            res.p_value = 1e-99;
            return res;
        }
        y = -std::log(gamma - y);
        m = poly(c3, 4, an);
        s = std::exp(poly(c4, 4, an));
    } else {
        m = poly(c5, 4, xx);
        s = std::exp(poly(c6, 3, xx));
    }
    res.p_value = boost::math::cdf(boost::math::complement(kStdNormal, (y - m) / s));
    return res;
}

std::vector<double> exponential_to_normal(std::span<const double> x) {
    std::vector<double> out;
    out.reserve(x.size());
    for (double v : x) {
        // 1 - P(v) = exp(-v) is the upper-tail probability.
        if (!(v > 0.0)) {
            out.push_back(-std::numeric_limits<double>::infinity());
            continue;
        }
        if (v < 0.5) {
            // lower tail 1 - exp(-v) without cancellation
            out.push_back(boost::math::quantile(kStdNormal, -std::expm1(-v)));
            continue;
        }
        const double tail = std::exp(-v);
        if (tail <= 0.0) {
            out.push_back(std::numeric_limits<double>::infinity());
        } else {
            out.push_back(boost::math::quantile(boost::math::complement(kStdNormal, tail)));
        }
    }
    return out;
}

std::vector<SwCell> shapiro_wilk_study(const std::vector<double>& d_values, const std::vector<std::size_t>& n_values,
                                       const std::vector<Innovation>& innovations, std::size_t replicates,
                                       std::uint64_t seed, double level) {
    if (replicates == 0) throw Error(ErrorCode::ConfigError, "replicates must be positive");
    std::vector<SwCell> cells;
    for (Innovation inn : innovations)
        for (double d : d_values)
            for (std::size_t n : n_values) cells.push_back({inn, d, n, replicates, 0.0});

    const SpectralModel model = [] {
        auto m = SpectralModel::arfima(0, 0, true);
        m.set_memory_range({-0.49, 0.5});
        return m;
    }();
    std::vector<double> rate(cells.size(), 0.0);
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const SwCell& cell = cells[c];
        ArfimaGenerator gen;
        gen.d = cell.d;
        const InnovationDist innov(cell.innovation);
        Vector theta(1);
        theta[0] = cell.d;
        const auto lam = fourier_frequencies(cell.n);
        const auto grid = model.make_grid(lam);
        const Vector inv_f = (-model.evaluate(grid, theta, false).log_f.array()).exp().matrix();
        const std::uint64_t cell_seed = derive_seed(seed, c);
        std::vector<unsigned char> reject(replicates, 0);
        parallel_for(replicates, [&](std::size_t r) {
            const TimeSeriesData x = simulate_arfima(cell.n, gen, innov, derive_seed(cell_seed, r));
            const Periodogram pg = compute_periodogram(x);
            std::vector<double> e(pg.m());
            for (std::size_t j = 0; j < pg.m(); ++j) e[j] = pg.ordinates[j] * inv_f[static_cast<Eigen::Index>(j)];
            const auto z = exponential_to_normal(e);
            reject[r] = shapiro_wilk(z).p_value < level ? 1 : 0;
        });
        std::size_t k = 0;
        for (auto v : reject) k += v;
        rate[c] = static_cast<double>(k) / static_cast<double>(replicates);
    }
    for (std::size_t c = 0; c < cells.size(); ++c) cells[c].rejection_rate = rate[c];
    return cells;
}

std::string sw_table_csv(const std::vector<SwCell>& cells) {
    std::ostringstream os;
    os << "innovation,d,n,replicates,rejection_rate\n";
    for (const auto& c : cells) {
        os << to_string(c.innovation) << ',' << c.d << ',' << c.n << ',' << c.replicates << ',' << c.rejection_rate
           << '\n';
    }
    return os.str();
}

std::string_view to_string(NullStatistic s) noexcept {
    switch (s) {
        case NullStatistic::Wald: return "wald";
        case NullStatistic::Fdet: return "fdet";
        case NullStatistic::Owen: return "owen";
        case NullStatistic::Saddlepoint: return "saddlepoint";
    }
    return "unknown";
}

NullStatistic null_statistic_from_string(std::string_view s) {
    if (s == "wald") return NullStatistic::Wald;
    if (s == "fdet") return NullStatistic::Fdet;
    if (s == "owen" || s == "fdel") return NullStatistic::Owen;
    if (s == "saddlepoint" || s == "sadd") return NullStatistic::Saddlepoint;
    throw Error(ErrorCode::ConfigError, "unknown statistic '" + std::string(s) + "'");
}

TimeSeriesData simulate_replicate(const SpectralModel& model, const Vector& theta0, std::size_t n,
                                  std::uint64_t seed, std::size_t r, const McOptions& opts) {
    ArfimaGenerator gen = ArfimaGenerator::from_model(model, theta0);
    gen.truncation = opts.truncation;
    gen.burn_in = opts.burn_in;
    return simulate_arfima(n, gen, InnovationDist(opts.innovation), derive_seed(seed, r));
}

McResult mc_null_distribution(const SpectralModel& model, const Vector& theta0, std::size_t n,
                              std::size_t replicates, NullStatistic statistic, std::uint64_t seed,
                              const McOptions& opts) {
    model.validate(theta0);
    if (replicates == 0) throw Error(ErrorCode::ConfigError, "replicates must be positive");
    std::vector<double> stat(replicates, std::numeric_limits<double>::quiet_NaN());
    parallel_for(replicates, [&](std::size_t r) {
        const TimeSeriesData x = simulate_replicate(model, theta0, n, seed, r, opts);
        const WhittleProblem pr(compute_periodogram(x), model, opts.variant);
        const Vector init = model.default_init(x.variance());
        const WhittleFit fit = solve_whittle(pr, init, opts.solver);
        if (!fit.converged) return;
        try {
            switch (statistic) {
                case NullStatistic::Wald:
                    if (opts.tested.empty()) {
                        stat[r] = wald_statistic(fit, theta0, opts.scale);
                    } else {
                        Vector t1(static_cast<Eigen::Index>(opts.tested.size()));
                        for (std::size_t i = 0; i < opts.tested.size(); ++i) {
                            t1[static_cast<Eigen::Index>(i)] = theta0[opts.tested[i]];
                        }
                        stat[r] = wald_statistic(fit, opts.tested, t1, opts.scale);
                    }
                    break;
                case NullStatistic::Fdet: stat[r] = fdet_statistic(pr, fit, theta0, opts.scale); break;
                case NullStatistic::Owen: stat[r] = fdel_owen_statistic(pr, theta0); break;
                case NullStatistic::Saddlepoint: stat[r] = exp_sadd_test_simple(fit, theta0, pr); break;
            }
        } catch (const Error&) {
            stat[r] = std::numeric_limits<double>::quiet_NaN();
        }
    });
    McResult res;
    res.requested = replicates;
    res.n = n;
    res.seed = seed;
    res.model = model.describe();
    for (std::size_t r = 0; r < replicates; ++r) {
        if (std::isnan(stat[r])) {
            ++res.failures;
        } else {
            res.statistics.push_back(stat[r]);
            res.replicate_index.push_back(r);
        }
    }
    if (res.statistics.empty()) throw Error(ErrorCode::NonConvergence, "every Monte Carlo replicate failed");
    return res;
}

std::vector<PowerPoint> power_curve(const SpectralModel& model, double d0, const std::vector<double>& alternatives,
                                    const std::vector<std::size_t>& n_values, double level, std::size_t replicates,
                                    std::uint64_t seed) {
    if (model.family() != Family::Arfima || model.dim() != 1) {
        throw Error(ErrorCode::ConfigError, "power curve uses a unit-variance ARFIMA(0,d,0) model");
    }
    const double crit = chi2_quantile(1.0 - level, 1.0);
    Vector theta0(1);
    theta0[0] = d0;
    model.validate(theta0);
    std::vector<PowerPoint> out;
    std::size_t cell = 0;
    for (std::size_t n : n_values) {
        for (double d : alternatives) {
            Vector th(1);
            th[0] = d;
            const std::uint64_t cell_seed = derive_seed(seed, cell++);
            std::vector<signed char> rej(replicates, -1);
            parallel_for(replicates, [&](std::size_t r) {
                const TimeSeriesData x = simulate_replicate(model, th, n, cell_seed, r);
                const WhittleProblem pr(compute_periodogram(x), model, ScoreVariant::Plain);
                const WhittleFit fit = solve_whittle(pr, model.default_init(x.variance()));
                if (!fit.converged) return;
                try {
                    rej[r] = exp_sadd_test_simple(fit, theta0, pr) > crit ? 1 : 0;
                } catch (const Error&) {
                }
            });
            PowerPoint pt;
            pt.n = n;
            pt.d = d;
            std::size_t k = 0;
            for (auto v : rej) {
                if (v < 0) ++pt.failures;
                else {
                    ++pt.used;
                    k += static_cast<std::size_t>(v);
                }
            }
            pt.power = pt.used ? static_cast<double>(k) / static_cast<double>(pt.used) : 0.0;
            pt.se = pt.used ? std::sqrt(pt.power * (1.0 - pt.power) / static_cast<double>(pt.used)) : 0.0;
            out.push_back(pt);
        }
    }
    return out;
}

QuantileComparison fdes_quantile_study(const McResult& truth, const SpectralModel& model, const Vector& theta0,
                                       std::size_t series, const HypothesisSpec& hyp, const IsConfig& is,
                                       const std::vector<double>& probs, const McOptions& opts) {
    QuantileComparison out;
    out.probs = probs;
    out.truth = quantiles_type7(truth.statistics, probs);
    const double dof = static_cast<double>(hyp.dof(model.dim()));
    for (double pr : probs) out.chi2.push_back(chi2_quantile(pr, dof));

    const std::size_t k = std::min(series, truth.replicate_index.size());
    std::vector<std::vector<double>> q(k);
    for (std::size_t s = 0; s < k; ++s) {
        const std::size_t r = truth.replicate_index[s];
        try {
            const TimeSeriesData x = simulate_replicate(model, theta0, truth.n, truth.seed, r, opts);
            const WhittleProblem pr(compute_periodogram(x), model, opts.variant);
            const WhittleFit fit = solve_whittle(pr, model.default_init(x.variance()), opts.solver);
            if (!fit.converged) continue;
            IsConfig cfg = is;
            cfg.seed = derive_seed(is.seed, r);
            const FdesSample smp = fdes_sample(pr, fit, hyp, cfg);
            if (smp.unreliable(cfg.unreliable_fraction)) continue;
            std::vector<double> qs;
            for (double p : probs) qs.push_back(smp.quantile(p));
            q[s] = std::move(qs);
        } catch (const Error&) {
        }
    }
    std::vector<std::vector<double>> per_prob(probs.size());
    for (const auto& qs : q) {
        if (qs.empty()) {
            ++out.series_failed;
            continue;
        }
        ++out.series_used;
        for (std::size_t i = 0; i < probs.size(); ++i) per_prob[i].push_back(qs[i]);
    }
    if (out.series_used == 0) throw Error(ErrorCode::NonConvergence, "no series produced an FDES distribution");
    for (auto& v : per_prob) out.fdes.push_back(quantiles_type7(v, {0.5})[0]);
    return out;
}

std::string qq_table_csv(const QuantileComparison& q) {
    std::ostringstream os;
    os.precision(10);
    os << "p,quantile_true,quantile_fdes,quantile_chi2\n";
    for (std::size_t i = 0; i < q.probs.size(); ++i) {
        os << q.probs[i] << ',' << q.truth[i] << ',' << q.fdes[i] << ',' << q.chi2[i] << '\n';
    }
    return os.str();
}

}  // namespace fdsad
