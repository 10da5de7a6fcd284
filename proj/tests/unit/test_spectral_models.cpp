#include "doctest.h"

#include "fdsad/error.hpp"
#include "fdsad/spectral_models.hpp"
#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace fdsad;

namespace {

constexpr double kPi = std::numbers::pi;

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-8, std::max(std::abs(a), std::abs(b))); }

}  // namespace

TEST_CASE("white noise is flat at 1/(2 pi)") {
    auto m = SpectralModel::arfima(0, 0, true);
    for (double l : {0.01, 0.5, kPi / 2, 3.0, kPi}) CHECK(m.density(l, vec({0.0})) == doctest::Approx(1.0 / (2 * kPi)).epsilon(1e-14));
    auto ms = SpectralModel::arfima(0, 0, false);
    CHECK(ms.density(kPi / 2, vec({0.0, 1.0})) == doctest::Approx(1.0 / (2 * kPi)).epsilon(1e-14));
}

TEST_CASE("pole exponent") {
    auto m = SpectralModel::arfima(0, 0, true);
    const double r = m.density(0.001, vec({0.25})) / m.density(0.002, vec({0.25}));
    CHECK(r == doctest::Approx(std::sqrt(2.0)).epsilon(0.01));
    // lambda^{2d} f stays bounded near the origin
    for (double l : {1e-2, 1e-4, 1e-6}) CHECK(std::pow(l, 0.5) * m.density(l, vec({0.25})) < 1.0);
}

TEST_CASE("arfima(1,0) density against complex arithmetic") {
    auto m = SpectralModel::arfima(1, 0, false);
    // reference value from an independent complex-arithmetic evaluation
    CHECK(m.density(1.0, vec({0.1, 0.5, 1.0})) == doctest::Approx(0.22614995484801378).epsilon(1e-12));
    ParamVector pv = m.params(vec({0.1, 0.5, 1.0}));
    CHECK(arfima_spectral_density(1.0, pv) == doctest::Approx(0.22614995484801378).epsilon(1e-12));
}

TEST_CASE("arfima(p,q) density matches the oracle on random parameters") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-0.4, 0.4);
    std::uniform_real_distribution<double> lam(1e-3, kPi);
    for (int p = 0; p <= 2; ++p)
        for (int q = 0; q <= 2; ++q) {
            auto m = SpectralModel::arfima(p, q, false);
            for (int rep = 0; rep < 10; ++rep) {
                Vector th(m.dim());
                th[0] = 0.45 * (u(rng) + 0.4) / 0.8;
                std::vector<double> phi, ma;
                for (int k = 0; k < p; ++k) phi.push_back(th[1 + k] = u(rng) / p);
                for (int k = 0; k < q; ++k) ma.push_back(th[1 + p + k] = u(rng) / q);
                th[m.dim() - 1] = 0.5 + (u(rng) + 0.4);
                const double l = lam(rng);
                CHECK(rel_err(m.density(l, th), oracle::arfima_density(l, th[0], phi, ma, th[m.dim() - 1])) < 1e-12);
            }
        }
}

TEST_CASE("d gradient at pi is -ln 4, sigma2 gradient is 1/sigma2") {
    auto m = SpectralModel::arfima(0, 0, false);
    Vector g = m.log_gradient(kPi, vec({0.2, 2.5}));
    CHECK(g[0] == doctest::Approx(-std::log(4.0)).epsilon(1e-13));
    CHECK(g[1] == doctest::Approx(1.0 / 2.5).epsilon(1e-14));
}

TEST_CASE("analytic gradients and hessians match finite differences") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-0.4, 0.4);
    std::uniform_real_distribution<double> lam(0.05, kPi);
    int checked = 0;
    for (int p = 0; p <= 2; ++p)
        for (int q = 0; q <= 1; ++q) {
            auto m = SpectralModel::arfima(p, q, false);
            for (int rep = 0; rep < 10; ++rep, ++checked) {
                Vector th(m.dim());
                th[0] = 0.05 + 0.4 * (u(rng) + 0.4);
                for (int k = 0; k < p + q; ++k) th[1 + k] = u(rng) / 2;
                th[m.dim() - 1] = 1.0 + u(rng);
                if (!m.is_valid(th)) continue;
                const double l = lam(rng);
                Vector g = m.log_gradient(l, th);
                Vector fd = oracle::fd_gradient([&](const Vector& t) { return std::log(oracle::arfima_density(
                                                    l, t[0], std::vector<double>(t.data() + 1, t.data() + 1 + p),
                                                    std::vector<double>(t.data() + 1 + p, t.data() + 1 + p + q),
                                                    t[m.dim() - 1])); },
                                                th);
                for (Eigen::Index k = 0; k < g.size(); ++k) CHECK(std::abs(g[k] - fd[k]) <= 1e-5 * std::max(1.0, std::abs(fd[k])));
                Matrix H = m.log_hessian(l, th);
                for (Eigen::Index k = 0; k < g.size(); ++k) {
                    Vector fdh = oracle::fd_gradient([&](const Vector& t) { return m.log_gradient(l, t)[k]; }, th);
                    for (Eigen::Index c = 0; c < g.size(); ++c)
                        CHECK(std::abs(H(k, c) - fdh[c]) <= 1e-5 * std::max(1.0, std::abs(fdh[c])));
                }
            }
        }
    CHECK(checked >= 50);
}

TEST_CASE("batch evaluation agrees with pointwise") {
    auto m = SpectralModel::arfima(1, 1, true);
    Vector th = vec({0.3, 0.4, -0.3});
    std::vector<double> l{0.1, 0.7, 1.9, 3.0};
    auto grid = m.make_grid(l);
    auto ev = m.evaluate(grid, th, true);
    for (Eigen::Index j = 0; j < 4; ++j) {
        CHECK(ev.log_f[j] == doctest::Approx(m.log_density(l[j], th)).epsilon(1e-13));
        Vector g = m.log_gradient(l[j], th);
        for (Eigen::Index k = 0; k < 3; ++k) CHECK(ev.z(j, k) == doctest::Approx(g[k]).epsilon(1e-12));
        Matrix H = m.log_hessian(l[j], th);
        CHECK((ev.hess(j, 3) - H).norm() < 1e-12);
    }
}

TEST_CASE("density positive and even on a fine grid") {
    auto m = SpectralModel::arfima(2, 1, false);
    Vector th = vec({0.4, 0.5, -0.3, 0.6, 1.3});
    for (int k = 1; k <= 1000; ++k) {
        const double l = kPi * k / 1000.0;
        CHECK(m.density(l, th) > 0.0);
        CHECK(oracle::arfima_density(-l, 0.4, {0.5, -0.3}, {0.6}, 1.3) ==
              doctest::Approx(oracle::arfima_density(l, 0.4, {0.5, -0.3}, {0.6}, 1.3)).epsilon(1e-13));
    }
}

TEST_CASE("invalid parameters are rejected") {
    auto m = SpectralModel::arfima(1, 1, false);
    CHECK_THROWS_AS(m.validate(vec({0.5, 0.1, 0.1, 1.0})), Error);
    CHECK_THROWS_AS(m.validate(vec({-0.1, 0.1, 0.1, 1.0})), Error);
    CHECK_THROWS_AS(m.validate(vec({0.1, 1.2, 0.1, 1.0})), Error);
    CHECK_THROWS_AS(m.validate(vec({0.1, 0.1, 1.5, 1.0})), Error);
    CHECK_THROWS_AS(m.validate(vec({0.1, 0.1, 0.1, 0.0})), Error);
    CHECK_NOTHROW(m.validate(vec({0.0, 0.1, 0.1, 1.0})));
    try {
        m.validate(vec({0.5, 0.1, 0.1, 1.0}));
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidParameter);
    }
    CHECK_FALSE(ar_is_causal(std::vector<double>{1.0}));
    CHECK(ar_is_causal(std::vector<double>{0.1, 0.2}));
    CHECK_FALSE(ma_is_invertible(std::vector<double>{-1.0}));
    m.set_memory_range({-0.49, 0.5});
    CHECK_NOTHROW(m.validate(vec({-0.3, 0.1, 0.1, 1.0})));
    CHECK_THROWS_AS(m.set_memory_range({0.2, 0.1}), Error);
}

TEST_CASE("fexp identities") {
    auto f = SpectralModel::fexp(2);
    CHECK(f.dim() == 4);
    for (double l : {0.3, 1.0, 2.5}) CHECK(f.density(l, vec({0.0, 0.0, 0.0, 0.0})) == doctest::Approx(1.0).epsilon(1e-15));
    // exp(eta0 + eta1 cos 0) with no pole
    CHECK(f.log_density(1e-300, vec({0.0, 1.0, 0.5, 0.0})) == doctest::Approx(1.5).epsilon(1e-12));
    // ARFIMA(0,d,0) embedding
    auto a = SpectralModel::arfima(0, 0, false);
    const double s2 = 1.7;
    for (double l : {0.05, 1.0, 3.1}) {
        const double fa = a.density(l, vec({0.3, s2}));
        const double ff = f.density(l, vec({0.3, std::log(s2 / (2 * kPi)), 0.0, 0.0}));
        CHECK(rel_err(fa, ff) < 1e-12);
    }
    Vector z = f.fexp_covariates(1.2);
    CHECK(z[1] == 1.0);
    CHECK(z[0] == doctest::Approx(std::log(std::abs(1.0 - std::polar(1.0, 1.2)))).epsilon(1e-13));
    auto fg1 = SpectralModel::fexp(1, [](double) { return 1.0; });
    CHECK(fg1.fexp_covariates(0.7)[0] == 0.0);
}

TEST_CASE("fexp gradient matches finite differences") {
    auto f = SpectralModel::fexp(3);
    Vector th = vec({0.2, -1.0, 0.3, -0.2, 0.1});
    for (double l : {0.1, 0.9, 2.2}) {
        Vector g = f.log_gradient(l, th);
        Vector fd = oracle::fd_gradient([&](const Vector& t) { return std::log(fexp_spectral_density(l, f.params(t))); }, th);
        for (Eigen::Index k = 0; k < g.size(); ++k) CHECK(std::abs(g[k] - fd[k]) <= 1e-5 * std::max(1.0, std::abs(fd[k])));
    }
}
