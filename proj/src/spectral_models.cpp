#include "fdsad/spectral_models.hpp"

#include "fdsad/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

namespace fdsad {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Largest eigenvalue modulus of the companion matrix whose first row is `row`.
double companion_spectral_radius(std::span<const double> row) {
    const auto p = static_cast<Eigen::Index>(row.size());
    if (p == 0) return 0.0;
    if (p == 1) return std::abs(row[0]);
    Matrix c = Matrix::Zero(p, p);
    for (Eigen::Index k = 0; k < p; ++k) c(0, k) = row[static_cast<std::size_t>(k)];
    for (Eigen::Index k = 1; k < p; ++k) c(k, k - 1) = 1.0;
    Eigen::EigenSolver<Matrix> es(c, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

double log_pole_of(double lambda) {
    const double s = std::sin(0.5 * lambda);
    return std::log(4.0 * s * s);
}

}  // namespace

std::optional<Eigen::Index> ParamLayout::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return static_cast<Eigen::Index>(i);
    }
    return std::nullopt;
}

void ParamVector::check(MemoryRange range) const {
    const Eigen::Index p = layout.size();
    if (values.size() != p) {
        throw Error(ErrorCode::InvalidParameter, "parameter vector has length " +
                                                     std::to_string(values.size()) + ", layout expects " +
                                                     std::to_string(p));
    }
    auto in_range = [p](Eigen::Index i) { return i >= 0 && i < p; };
    bool ok = std::all_of(layout.ar.begin(), layout.ar.end(), in_range) &&
              std::all_of(layout.ma.begin(), layout.ma.end(), in_range) &&
              std::all_of(layout.eta.begin(), layout.eta.end(), in_range);
    if (layout.d) ok = ok && in_range(*layout.d);
    if (layout.sigma2) ok = ok && in_range(*layout.sigma2);
    if (!ok) throw Error(ErrorCode::InvalidParameter, "slot index out of range");
    if (layout.d) {
        const double d = values[*layout.d];
        if (!(d >= range.lower && d < range.upper)) {
            throw Error(ErrorCode::InvalidParameter, "memory parameter d = " + std::to_string(d) +
                                                         " outside admissible range");
        }
    }
    if (layout.sigma2 && !(values[*layout.sigma2] > 0.0)) {
        throw Error(ErrorCode::InvalidParameter, "innovation variance must be positive");
    }
}

double ParamVector::at(std::string_view name) const {
    auto idx = layout.index_of(name);
    if (!idx) throw Error(ErrorCode::InvalidParameter, "unknown slot " + std::string(name));
    return values[*idx];
}

FrequencyGrid::FrequencyGrid(std::span<const double> lambdas, int max_order)
    : lambdas_(static_cast<Eigen::Index>(lambdas.size())),
      log_pole_(static_cast<Eigen::Index>(lambdas.size())),
      cos_(static_cast<Eigen::Index>(lambdas.size()), std::max(max_order, 0)),
      sin_(static_cast<Eigen::Index>(lambdas.size()), std::max(max_order, 0)) {
    for (Eigen::Index j = 0; j < lambdas_.size(); ++j) {
        const double lam = lambdas[static_cast<std::size_t>(j)];
        lambdas_[j] = lam;
        log_pole_[j] = log_pole_of(lam);
        for (int k = 1; k <= max_order; ++k) {
            cos_(j, k - 1) = std::cos(k * lam);
            sin_(j, k - 1) = std::sin(k * lam);
        }
    }
}

bool ar_is_causal(std::span<const double> phi, double tol) {
    // roots of 1 - sum phi_k z^k outside the unit circle <=> companion eigenvalues inside
    return companion_spectral_radius(phi) < 1.0 / (1.0 + tol);
}

bool ma_is_invertible(std::span<const double> ma, double tol) {
    if (ma.empty()) return true;
    if (ma.size() == 1) return std::abs(ma[0]) < 1.0 / (1.0 + tol);
    std::vector<double> row(ma.begin(), ma.end());
    for (double& c : row) c = -c;
    return companion_spectral_radius(row) < 1.0 / (1.0 + tol);
}

SpectralModel SpectralModel::arfima(int p_order, int q_order, bool fix_sigma2) {
    if (p_order < 0 || q_order < 0) throw Error(ErrorCode::ConfigError, "negative ARFIMA order");
    SpectralModel m;
    m.family_ = Family::Arfima;
    m.p_order_ = p_order;
    m.q_order_ = q_order;
    Eigen::Index idx = 0;
    m.layout_.d = idx++;
    m.layout_.names.emplace_back("d");
    for (int k = 1; k <= p_order; ++k) {
        m.layout_.ar.push_back(idx++);
        m.layout_.names.push_back("phi" + std::to_string(k));
    }
    for (int k = 1; k <= q_order; ++k) {
        m.layout_.ma.push_back(idx++);
        m.layout_.names.push_back("ma" + std::to_string(k));
    }
    if (!fix_sigma2) {
        m.layout_.sigma2 = idx++;
        m.layout_.names.emplace_back("sigma2");
    }
    return m;
}

SpectralModel SpectralModel::fexp(int p_order, ScalarFn g, std::vector<ScalarFn> basis) {
    if (p_order < 0) throw Error(ErrorCode::ConfigError, "negative FEXP order");
    if (!basis.empty() && static_cast<int>(basis.size()) != p_order) {
        throw Error(ErrorCode::ConfigError, "FEXP basis must have p_order functions");
    }
    SpectralModel m;
    m.family_ = Family::Fexp;
    m.p_order_ = p_order;
    m.default_fexp_basis_ = basis.empty();
    m.g_ = g ? std::move(g) : ScalarFn([](double lam) { return 2.0 * std::abs(std::sin(0.5 * lam)); });
    m.basis_ = std::move(basis);
    Eigen::Index idx = 0;
    m.layout_.d = idx++;
    m.layout_.names.emplace_back("d");
    for (int k = 0; k <= p_order; ++k) {
        m.layout_.eta.push_back(idx++);
        m.layout_.names.push_back("eta" + std::to_string(k));
    }
    return m;
}

int SpectralModel::max_trig_order() const noexcept {
    if (family_ == Family::Arfima) return std::max(p_order_, q_order_);
    return default_fexp_basis_ ? p_order_ : 0;
}

void SpectralModel::set_memory_range(MemoryRange range) {
    if (!(range.lower < range.upper) || range.lower <= -0.5 || range.upper > 0.5) {
        throw Error(ErrorCode::ConfigError, "memory range must satisfy -0.5 < lower < upper <= 0.5");
    }
    d_range_ = range;
}

const char* SpectralModel::invalid_reason(const Vector& theta) const noexcept {
    if (theta.size() != dim()) return "parameter vector length does not match the model";
    if (!theta.allFinite()) return "non-finite parameter";
    const double d = theta[*layout_.d];
    if (!(d >= d_range_.lower && d < d_range_.upper)) return "memory parameter d outside admissible range";
    if (layout_.sigma2 && !(theta[*layout_.sigma2] > 0.0)) return "innovation variance must be positive";
    if (family_ != Family::Arfima) return nullptr;
    std::array<double, 16> buf{};
    auto gather = [&](const std::vector<Eigen::Index>& idx, std::vector<double>& heap) -> std::span<const double> {
        if (idx.size() <= buf.size()) {
            for (std::size_t k = 0; k < idx.size(); ++k) buf[k] = theta[idx[k]];
            return {buf.data(), idx.size()};
        }
        heap.clear();
        for (auto i : idx) heap.push_back(theta[i]);
        return heap;
    };
    std::vector<double> heap;
    if (!ar_is_causal(gather(layout_.ar, heap))) return "AR polynomial is not causal";
    if (!ma_is_invertible(gather(layout_.ma, heap))) return "MA polynomial is not invertible";
    return nullptr;
}

void SpectralModel::validate(const Vector& theta) const {
    if (const char* why = invalid_reason(theta)) throw Error(ErrorCode::InvalidParameter, why);
}

bool SpectralModel::is_valid(const Vector& theta) const noexcept { return invalid_reason(theta) == nullptr; }

void SpectralModel::evaluate_point(const TrigPoint& pt, const Vector& theta, double& log_f, double* z,
                                   double* hess) const {
    const Eigen::Index p = dim();
    if (hess) std::fill(hess, hess + p * p, 0.0);
    const Eigen::Index id = *layout_.d;
    const double d = theta[id];

    if (family_ == Family::Fexp) {
        const double lng = default_fexp_basis_ ? 0.5 * pt.log_pole : std::log(g_(pt.lambda));
        double lf = d == 0.0 ? 0.0 : -2.0 * d * lng;  // g(0)^0 = 1
        z[id] = -2.0 * lng;
        for (int k = 0; k <= p_order_; ++k) {
            double qk = 1.0;
            if (k > 0) qk = default_fexp_basis_ ? pt.cosk[k - 1] : basis_[static_cast<std::size_t>(k - 1)](pt.lambda);
            const Eigen::Index ie = layout_.eta[static_cast<std::size_t>(k)];
            lf += theta[ie] * qk;
            z[ie] = qk;
        }
        log_f = lf;
        return;
    }

    double lf = -std::log(kTwoPi) - (d == 0.0 ? 0.0 : d * pt.log_pole);
    z[id] = -pt.log_pole;

    if (p_order_ > 0) {
        // phi(e^{-i lambda}) = A + iB
        double a = 1.0;
        double b = 0.0;
        for (int k = 1; k <= p_order_; ++k) {
            const double phik = theta[layout_.ar[static_cast<std::size_t>(k - 1)]];
            a -= phik * pt.cosk[k - 1];
            b += phik * pt.sink[k - 1];
        }
        const double g = a * a + b * b;
        lf -= std::log(g);
        for (int k = 1; k <= p_order_; ++k) {
            const double gk = -2.0 * a * pt.cosk[k - 1] + 2.0 * b * pt.sink[k - 1];
            const Eigen::Index ik = layout_.ar[static_cast<std::size_t>(k - 1)];
            z[ik] = -gk / g;
            if (hess) {
                for (int l = 1; l <= p_order_; ++l) {
                    const double gl = -2.0 * a * pt.cosk[l - 1] + 2.0 * b * pt.sink[l - 1];
                    const double gkl = 2.0 * (pt.cosk[k - 1] * pt.cosk[l - 1] + pt.sink[k - 1] * pt.sink[l - 1]);
                    const Eigen::Index il = layout_.ar[static_cast<std::size_t>(l - 1)];
                    hess[ik + il * p] = -(gkl / g - gk * gl / (g * g));
                }
            }
        }
    }
    if (q_order_ > 0) {
        // theta(e^{-i lambda}) = C + iD
        double c = 1.0;
        double dd = 0.0;
        for (int k = 1; k <= q_order_; ++k) {
            const double mk = theta[layout_.ma[static_cast<std::size_t>(k - 1)]];
            c += mk * pt.cosk[k - 1];
            dd -= mk * pt.sink[k - 1];
        }
        const double h = c * c + dd * dd;
        lf += std::log(h);
        for (int k = 1; k <= q_order_; ++k) {
            const double hk = 2.0 * c * pt.cosk[k - 1] - 2.0 * dd * pt.sink[k - 1];
            const Eigen::Index ik = layout_.ma[static_cast<std::size_t>(k - 1)];
            z[ik] = hk / h;
            if (hess) {
                for (int l = 1; l <= q_order_; ++l) {
                    const double hl = 2.0 * c * pt.cosk[l - 1] - 2.0 * dd * pt.sink[l - 1];
                    const double hkl = 2.0 * (pt.cosk[k - 1] * pt.cosk[l - 1] + pt.sink[k - 1] * pt.sink[l - 1]);
                    const Eigen::Index il = layout_.ma[static_cast<std::size_t>(l - 1)];
                    hess[ik + il * p] = hkl / h - hk * hl / (h * h);
                }
            }
        }
    }
    if (layout_.sigma2) {
        const Eigen::Index is = *layout_.sigma2;
        const double s2 = theta[is];
        lf += std::log(s2);
        z[is] = 1.0 / s2;
        if (hess) hess[is + is * p] = -1.0 / (s2 * s2);
    }
    log_f = lf;
}

void SpectralModel::evaluate_single(double lambda, const Vector& theta, double& log_f, double* z,
                                    double* hess) const {
    const int order = max_trig_order();
    std::vector<double> cosk(static_cast<std::size_t>(order));
    std::vector<double> sink(static_cast<std::size_t>(order));
    for (int k = 1; k <= order; ++k) {
        cosk[static_cast<std::size_t>(k - 1)] = std::cos(k * lambda);
        sink[static_cast<std::size_t>(k - 1)] = std::sin(k * lambda);
    }
    evaluate_point({lambda, log_pole_of(lambda), cosk.data(), sink.data()}, theta, log_f, z, hess);
}

double SpectralModel::log_density(double lambda, const Vector& theta) const {
    validate(theta);
    double lf = 0.0;
    Vector z(dim());
    evaluate_single(lambda, theta, lf, z.data(), nullptr);
    return lf;
}

double SpectralModel::density(double lambda, const Vector& theta) const {
    return std::exp(log_density(lambda, theta));
}

Vector SpectralModel::log_gradient(double lambda, const Vector& theta) const {
    validate(theta);
    double lf = 0.0;
    Vector z(dim());
    evaluate_single(lambda, theta, lf, z.data(), nullptr);
    return z;
}

Matrix SpectralModel::log_hessian(double lambda, const Vector& theta) const {
    validate(theta);
    double lf = 0.0;
    Vector z(dim());
    Matrix h(dim(), dim());
    evaluate_single(lambda, theta, lf, z.data(), h.data());
    return h;
}

FrequencyGrid SpectralModel::make_grid(std::span<const double> lambdas) const {
    return FrequencyGrid(lambdas, max_trig_order());
}

SpectralEval SpectralModel::evaluate(const FrequencyGrid& grid, const Vector& theta,
                                     bool with_hessian) const {
    const Eigen::Index m = grid.size();
    const Eigen::Index p = dim();
    SpectralEval out;
    out.log_f.resize(m);
    // row-major scratch so that each frequency writes contiguous memory
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> z(m, p);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> h;
    if (with_hessian) h.resize(m, p * p);
    for (Eigen::Index j = 0; j < m; ++j) {
        const TrigPoint pt{grid.lambda(j), grid.log_pole(j), grid.max_order() > 0 ? grid.cos_row(j) : nullptr,
                           grid.max_order() > 0 ? grid.sin_row(j) : nullptr};
        evaluate_point(pt, theta, out.log_f[j], z.row(j).data(), with_hessian ? h.row(j).data() : nullptr);
    }
    out.z = z;
    if (with_hessian) out.hessian = std::move(h);
    return out;
}

Vector SpectralModel::default_init(double sample_variance) const {
    Vector theta = Vector::Zero(dim());
    const double d0 = std::clamp(0.1, d_range_.lower, d_range_.upper - 1e-3);
    theta[*layout_.d] = d0;
    const double var = sample_variance > 0.0 ? sample_variance : 1.0;
    if (layout_.sigma2) theta[*layout_.sigma2] = var;
    if (!layout_.eta.empty()) theta[layout_.eta.front()] = std::log(var / kTwoPi);
    return theta;
}

Vector SpectralModel::fexp_covariates(double lambda) const {
    if (family_ != Family::Fexp) throw Error(ErrorCode::ConfigError, "covariates are defined for FEXP models");
    Vector zc(p_order_ + 2);
    zc[0] = std::log(g_(lambda));
    zc[1] = 1.0;
    for (int k = 1; k <= p_order_; ++k) {
        zc[k + 1] = default_fexp_basis_ ? std::cos(k * lambda) : basis_[static_cast<std::size_t>(k - 1)](lambda);
    }
    return zc;
}

std::string SpectralModel::describe() const {
    std::ostringstream os;
    if (family_ == Family::Arfima) {
        os << "ARFIMA(" << p_order_ << ",d," << q_order_ << ")" << (has_sigma2() ? "" : " unit-variance");
    } else {
        os << "FEXP(" << p_order_ << ")";
    }
    return os.str();
}

double arfima_spectral_density(double lambda, const ParamVector& theta) {
    const int p = static_cast<int>(theta.layout.ar.size());
    const int q = static_cast<int>(theta.layout.ma.size());
    const auto model = SpectralModel::arfima(p, q, !theta.layout.sigma2.has_value());
    return model.density(lambda, theta.values);
}

Vector arfima_log_gradient(double lambda, const ParamVector& theta) {
    const int p = static_cast<int>(theta.layout.ar.size());
    const int q = static_cast<int>(theta.layout.ma.size());
    const auto model = SpectralModel::arfima(p, q, !theta.layout.sigma2.has_value());
    return model.log_gradient(lambda, theta.values);
}

double fexp_spectral_density(double lambda, const ParamVector& theta, const SpectralModel::ScalarFn& g) {
    if (theta.layout.eta.empty()) throw Error(ErrorCode::InvalidParameter, "FEXP parameters need eta slots");
    const auto model = SpectralModel::fexp(static_cast<int>(theta.layout.eta.size()) - 1, g);
    return model.density(lambda, theta.values);
}

}  // namespace fdsad
