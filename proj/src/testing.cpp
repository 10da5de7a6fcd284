#include "fdsad/testing.hpp"

#include "fdsad/error.hpp"
#include "fdsad/parallel.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace fdsad {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kChunk = 128;

Matrix proposal_factor(const Matrix& cov) {
    if (!cov.allFinite()) throw Error(ErrorCode::DegenerateProposal, "proposal covariance is not finite");
    const Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::DegenerateProposal, "proposal covariance is not PD");
    return llt.matrixL();
}

// Fills eps with standard normals and returns z = mean + L eps, logphi(z).
struct Draw {
    Vector z;
    double log_phi;
};

template <class Body>
void for_each_draw(std::size_t R, std::uint64_t seed, const Vector& mean, const Matrix& L, Body&& body) {
    const Eigen::Index p = mean.size();
    const double log_norm = -0.5 * static_cast<double>(p) * std::log(2.0 * std::numbers::pi) -
                            L.diagonal().array().log().sum();
    const std::size_t chunks = (R + kChunk - 1) / kChunk;
    parallel_for(chunks, [&](std::size_t c) {
        Rng rng = make_rng(seed, c);
        std::normal_distribution<double> nd;
        Vector eps(p);
        const std::size_t end = std::min(R, (c + 1) * kChunk);
        for (std::size_t r = c * kChunk; r < end; ++r) {
            for (Eigen::Index k = 0; k < p; ++k) eps[k] = nd(rng);
            Draw d{mean + L * eps, log_norm - 0.5 * eps.squaredNorm()};
            body(r, d);
        }
    });
}

Matrix invert_pd(const Matrix& V) {
    const Eigen::LDLT<Matrix> ldlt(V);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0) {
        throw Error(ErrorCode::SingularCovariance, "covariance is not positive definite");
    }
    return ldlt.solve(Matrix::Identity(V.rows(), V.cols()));
}

// w(theta) for the chosen statistic, with theta's nuisance slots already
// replaced by the fitted values.
class StatisticFn {
public:
    StatisticFn(const WhittleProblem& problem, const WhittleFit& fit, const HypothesisSpec& hyp, WaldScale scale)
        : problem_(problem), fit_(fit), hyp_(hyp) {
        const Eigen::Index p = fit.theta_hat.values.size();
        scale_ = static_cast<double>(scale == WaldScale::M ? fit.m : fit.n);
        if (hyp.composite()) {
            if (static_cast<Eigen::Index>(hyp.tested.size()) != hyp.theta0.size()) {
                throw Error(ErrorCode::InvalidParameter, "tested slots and null value differ in length");
            }
            std::vector<bool> seen(static_cast<std::size_t>(p), false);
            for (auto k : hyp.tested) {
                if (k < 0 || k >= p || seen[static_cast<std::size_t>(k)]) {
                    throw Error(ErrorCode::InvalidParameter, "bad tested slot");
                }
                seen[static_cast<std::size_t>(k)] = true;
            }
        } else if (hyp.theta0.size() != p) {
            throw Error(ErrorCode::InvalidParameter, "null value has the wrong length");
        }
        if (hyp.statistic == StatisticKind::Wald) {
            if (hyp.composite()) {
                const auto k = static_cast<Eigen::Index>(hyp.tested.size());
                Matrix V11(k, k);
                for (Eigen::Index a = 0; a < k; ++a)
                    for (Eigen::Index b = 0; b < k; ++b) V11(a, b) = fit.V_hat(hyp.tested[a], hyp.tested[b]);
                precision_ = invert_pd(V11);
            } else {
                precision_ = invert_pd(fit.V_hat);
            }
        }
    }

    [[nodiscard]] Vector null_point() const { return embed_tested(hyp_.theta0); }

    /// theta with nuisance slots set to theta_hat (identity for simple hypotheses).
    [[nodiscard]] Vector project(const Vector& theta) const {
        if (!hyp_.composite()) return theta;
        Vector out = fit_.theta_hat.values;
        for (auto k : hyp_.tested) out[k] = theta[k];
        return out;
    }

    /// `K_known` is K^(theta) when it is already available for this point.
    [[nodiscard]] double operator()(const Vector& theta, const double* K_known = nullptr) const {
        const Vector t = project(theta);
        switch (hyp_.statistic) {
            case StatisticKind::Wald: {
                if (hyp_.composite()) {
                    Vector a(static_cast<Eigen::Index>(hyp_.tested.size()));
                    Vector b(a.size());
                    for (std::size_t i = 0; i < hyp_.tested.size(); ++i) {
                        a[static_cast<Eigen::Index>(i)] = fit_.theta_hat.values[hyp_.tested[i]];
                        b[static_cast<Eigen::Index>(i)] = t[hyp_.tested[i]];
                    }
                    return quadratic_form(a, b, precision_, scale_);
                }
                return quadratic_form(fit_.theta_hat.values, t, precision_, scale_);
            }
            case StatisticKind::Fdet: {
                if (K_known && !hyp_.composite()) return std::max(0.0, -2.0 * scale_ * *K_known);
                if (!problem_.model().is_valid(t)) return kNaN;
                const auto ctx = EmpiricalCgfContext::at(problem_, t, false);
                return std::max(0.0, 2.0 * scale_ * solve_emp_saddlepoint(ctx, Vector::Zero(ctx.p())).K_dagger);
            }
            case StatisticKind::Owen: {
                if (!problem_.model().is_valid(t)) return kNaN;
                try {
                    return fdel_owen_statistic(problem_, t);
                } catch (const Error& e) {
                    if (e.code() == ErrorCode::InfeasibleTilt) return kInf;  // outside the hull
                    throw;
                }
            }
        }
        return kNaN;
    }

private:
    [[nodiscard]] Vector embed_tested(const Vector& theta1) const {
        if (!hyp_.composite()) return theta1;
        Vector out = fit_.theta_hat.values;
        for (std::size_t i = 0; i < hyp_.tested.size(); ++i) out[hyp_.tested[i]] = theta1[static_cast<Eigen::Index>(i)];
        return out;
    }

    const WhittleProblem& problem_;
    const WhittleFit& fit_;
    const HypothesisSpec& hyp_;
    double scale_ = 1.0;
    Matrix precision_;
};

std::string describe(const HypothesisSpec& hyp, const std::vector<std::string>& names) {
    std::ostringstream os;
    os.precision(10);
    os << "H0: ";
    auto name = [&](Eigen::Index k) {
        return k < static_cast<Eigen::Index>(names.size()) ? names[static_cast<std::size_t>(k)]
                                                          : "theta" + std::to_string(k);
    };
    for (Eigen::Index i = 0; i < hyp.theta0.size(); ++i) {
        const Eigen::Index slot = hyp.composite() ? hyp.tested[static_cast<std::size_t>(i)] : i;
        if (i) os << ", ";
        os << name(slot) << " = " << hyp.theta0[i];
    }
    return os.str();
}

}  // namespace

std::string_view to_string(StatisticKind s) noexcept {
    switch (s) {
        case StatisticKind::Wald: return "wald";
        case StatisticKind::Fdet: return "fdet";
        case StatisticKind::Owen: return "owen";
    }
    return "unknown";
}

StatisticKind statistic_from_string(std::string_view s) {
    if (s == "wald") return StatisticKind::Wald;
    if (s == "fdet") return StatisticKind::Fdet;
    if (s == "owen" || s == "fdel") return StatisticKind::Owen;
    throw Error(ErrorCode::ConfigError, "unknown statistic '" + std::string(s) + "'");
}

IsEstimate importance_sample(const std::function<double(const Vector&)>& integrand,
                             const std::function<bool(const Vector&)>& region, const Vector& mean, const Matrix& cov,
                             std::size_t R, std::uint64_t seed) {
    if (R < 1) throw Error(ErrorCode::ConfigError, "importance sample needs R >= 1");
    const Matrix L = proposal_factor(cov);
    std::vector<double> x(R, 0.0);
    for_each_draw(R, seed, mean, L, [&](std::size_t r, const Draw& d) {
        if (!region(d.z)) return;
        x[r] = integrand(d.z) / std::exp(d.log_phi);
    });
    double s = 0.0;
    for (double v : x) s += v;
    const double mu = s / static_cast<double>(R);
    double ss = 0.0;
    for (double v : x) ss += (v - mu) * (v - mu);
    IsEstimate out;
    out.estimate = mu;
    out.se = R > 1 ? std::sqrt(ss / static_cast<double>(R - 1) / static_cast<double>(R)) : 0.0;
    return out;
}

std::size_t FdesSample::n_effective() const {
    return static_cast<std::size_t>(
        std::count_if(log_weight.begin(), log_weight.end(), [](double v) { return std::isfinite(v); }));
}

bool FdesSample::unreliable(double fraction) const {
    return static_cast<double>(failures) > fraction * static_cast<double>(R);
}

IsEstimate FdesSample::tail(double x) const {
    double mx = -kInf;
    for (double v : log_weight) mx = std::max(mx, v);
    if (!std::isfinite(mx)) throw Error(ErrorCode::AllWeightsZero, "no proposal draw received positive weight");
    double den = 0.0;
    double num = 0.0;
    for (std::size_t r = 0; r < log_weight.size(); ++r) {
        if (!std::isfinite(log_weight[r])) continue;
        const double w = std::exp(log_weight[r] - mx);
        den += w;
        if (statistic[r] > x) num += w;
    }
    IsEstimate out;
    out.estimate = std::clamp(num / den, 0.0, 1.0);
    double ss = 0.0;
    for (std::size_t r = 0; r < log_weight.size(); ++r) {
        if (!std::isfinite(log_weight[r])) continue;
        const double w = std::exp(log_weight[r] - mx);
        const double a = (statistic[r] > x ? w : 0.0) - out.estimate * w;
        ss += a * a;
    }
    out.se = std::sqrt(ss) / den;
    return out;
}

double FdesSample::quantile(double prob) const {
    double hi = 0.0;
    for (std::size_t r = 0; r < statistic.size(); ++r) {
        if (std::isfinite(log_weight[r]) && std::isfinite(statistic[r])) hi = std::max(hi, statistic[r]);
    }
    return invert_cdf([this](double x) { return cdf(x); }, prob, 0.0, std::max(hi, 1e-12), 1e-10);
}

FdesSample fdes_sample(const WhittleProblem& problem, const WhittleFit& fit, const HypothesisSpec& hyp,
                       const IsConfig& cfg) {
    if (cfg.R < 1) throw Error(ErrorCode::ConfigError, "R must be positive");
    if (!(cfg.inflation > 0.0)) throw Error(ErrorCode::ConfigError, "proposal inflation must be positive");
    const StatisticFn stat(problem, fit, hyp, cfg.scale);
    const SpectralModel& model = problem.model();
    const Matrix cov = cfg.inflation * fit.V_hat / static_cast<double>(fit.m);
    const Matrix L = proposal_factor(cov);

    FdesSample s;
    s.R = cfg.R;
    s.seed = cfg.seed;
    s.log_weight.assign(cfg.R, -kInf);
    s.statistic.assign(cfg.R, kNaN);
    std::vector<unsigned char> status(cfg.R, 0);  // 0 ok, 1 outside, 2 failure
    const Vector null_pt = stat.null_point();
    s.observed = stat(null_pt);
    if (!std::isfinite(s.observed)) throw Error(ErrorCode::NonConvergence, "statistic undefined at the null value");

    for_each_draw(cfg.R, cfg.seed, fit.theta_hat.values, L, [&](std::size_t r, const Draw& d) {
        if (!model.is_valid(d.z)) {
            status[r] = 1;
            return;
        }
        try {
            double log_g = 0.0;
            double K = 0.0;
            const double* Kp = nullptr;
            if (cfg.density == IsDensity::Fdes) {
                const EmpDensityValue v = emp_log_density_at(problem, d.z);
                log_g = v.log_density;
                K = v.saddle.K_value;
                Kp = &K;
            } else {
                log_g = d.log_phi;
            }
            const double w = stat(d.z, Kp);
            if (std::isnan(w) || std::isnan(log_g)) {
                status[r] = 2;
                return;
            }
            s.statistic[r] = w;
            s.log_weight[r] = log_g - d.log_phi;
        } catch (const Error&) {
            status[r] = 2;
            s.log_weight[r] = -kInf;
        }
    });
    for (unsigned char c : status) {
        if (c == 1) ++s.outside;
        if (c == 2) ++s.failures;
    }
    return s;
}

TestReport report_from_sample(const FdesSample& s, const HypothesisSpec& hyp, Eigen::Index p, const IsConfig& cfg,
                              const std::vector<std::string>& names) {
    TestReport rep;
    rep.hypothesis = describe(hyp, names);
    rep.statistic = hyp.statistic;
    rep.statistic_value = s.observed;
    const IsEstimate t = s.tail(s.observed);
    rep.p_fdes = t.estimate;
    rep.mc_se = t.se;
    rep.dof = hyp.dof(p);
    rep.p_chi2 = p_value_chi2(s.observed, static_cast<double>(rep.dof));
    rep.R = s.R;
    rep.seed = s.seed;
    rep.n_effective = s.n_effective();
    rep.failures = s.failures;
    rep.outside = s.outside;
    rep.unreliable = s.unreliable(cfg.unreliable_fraction);
    return rep;
}

TestReport p_value_fdes(const WhittleProblem& problem, const WhittleFit& fit, const HypothesisSpec& hyp,
                        const IsConfig& cfg) {
    const FdesSample s = fdes_sample(problem, fit, hyp, cfg);
    return report_from_sample(s, hyp, fit.theta_hat.values.size(), cfg, problem.model().layout().names);
}

TestReport p_value_fdes_composite(const WhittleProblem& problem, const WhittleFit& fit, const HypothesisSpec& hyp,
                                  const IsConfig& cfg) {
    if (!hyp.composite()) throw Error(ErrorCode::ConfigError, "composite test needs tested slots");
    return p_value_fdes(problem, fit, hyp, cfg);
}

std::vector<double> cdf_approx(const WhittleProblem& problem, const WhittleFit& fit, const HypothesisSpec& hyp,
                               const IsConfig& cfg, const std::vector<double>& xs) {
    const FdesSample s = fdes_sample(problem, fit, hyp, cfg);
    std::vector<double> out;
    out.reserve(xs.size());
    for (double x : xs) out.push_back(s.cdf(x));
    return out;
}

double observed_statistic(const WhittleProblem& problem, const WhittleFit& fit, const HypothesisSpec& hyp,
                          WaldScale scale) {
    const StatisticFn stat(problem, fit, hyp, scale);
    return stat(stat.null_point());
}

double p_value_chi2(double x, double dof) {
    if (!(dof > 0.0)) throw Error(ErrorCode::InvalidParameter, "degrees of freedom must be positive");
    if (!(x > 0.0)) return 1.0;
    if (std::isinf(x)) return 0.0;
    return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

double chi2_quantile(double prob, double dof) {
    if (!(prob > 0.0 && prob < 1.0)) throw Error(ErrorCode::InvalidParameter, "probability must be in (0,1)");
    return boost::math::quantile(boost::math::chi_squared_distribution<double>(dof), prob);
}

double invert_cdf(const std::function<double(double)>& cdf, double prob, double lo, double hi, double tol) {
    for (int k = 0; k < 200 && cdf(hi) < prob; ++k) hi = hi * 2.0 + 1.0;
    for (int it = 0; it < 300 && hi - lo > tol * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (cdf(mid) >= prob) hi = mid;
        else lo = mid;
    }
    return hi;
}

std::vector<double> quantiles_type7(std::vector<double> samples, const std::vector<double>& probs) {
    if (samples.empty()) throw Error(ErrorCode::EmptySeries, "no samples for quantiles");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    std::vector<double> out;
    for (double p : probs) {
        const double h = (n - 1.0) * p;
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const auto hi = std::min(lo + 1, samples.size() - 1);
        out.push_back(samples[lo] + (h - std::floor(h)) * (samples[hi] - samples[lo]));
    }
    return out;
}

std::vector<double> quantiles_table(const std::function<double(double)>& cdf, const std::vector<double>& probs) {
    std::vector<double> out;
    for (double p : probs) out.push_back(invert_cdf(cdf, p));
    return out;
}

}  // namespace fdsad
