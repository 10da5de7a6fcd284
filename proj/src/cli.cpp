#include "fdsad/cli.hpp"

#include "fdsad/error.hpp"
#include "fdsad/io.hpp"
#include "fdsad/saddlepoint.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <iomanip>
#include <sstream>

namespace fdsad {
namespace {

using json = nlohmann::ordered_json;

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::size_t pos = 0;
    while (true) {
        const auto next = s.find(sep, pos);
        out.emplace_back(trim(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos)));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

double to_double(std::string_view s, std::string_view what) {
    s = trim(s);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        throw Error(ErrorCode::ConfigError, std::string(what) + ": '" + std::string(s) + "' is not a number");
    }
    return v;
}

template <class T>
T to_integer(std::string_view s, std::string_view what) {
    s = trim(s);
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        throw Error(ErrorCode::ConfigError, std::string(what) + ": '" + std::string(s) + "' is not an integer");
    }
    return v;
}

std::string fmt(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

bool to_bool(std::string_view s, std::string_view what) {
    s = trim(s);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw Error(ErrorCode::ConfigError, std::string(what) + ": expected true or false");
}

struct Field {
    const char* key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, std::string_view)> set;
};

#define FDSAD_STR(name) \
    Field{#name, [](const RunConfig& c) { return c.name; }, [](RunConfig& c, std::string_view v) { c.name = std::string(trim(v)); }}
#define FDSAD_DBL(name) \
    Field{#name, [](const RunConfig& c) { return fmt(c.name); }, [](RunConfig& c, std::string_view v) { c.name = to_double(v, #name); }}
#define FDSAD_INT(name)                                                              \
    Field{#name, [](const RunConfig& c) { return std::to_string(c.name); },          \
          [](RunConfig& c, std::string_view v) { c.name = to_integer<decltype(c.name)>(v, #name); }}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        Field{"command", [](const RunConfig& c) { return std::string(to_string(c.command)); },
              [](RunConfig& c, std::string_view v) { c.command = command_from_string(trim(v)); }},
        FDSAD_STR(model),
        FDSAD_STR(d_range),
        FDSAD_STR(variant),
        FDSAD_STR(input),
        FDSAD_INT(column),
        Field{"header", [](const RunConfig& c) { return std::string(c.header ? "true" : "false"); },
              [](RunConfig& c, std::string_view v) { c.header = to_bool(v, "header"); }},
        FDSAD_STR(taper),
        FDSAD_STR(detrend),
        Field{"null", [](const RunConfig& c) { return c.null_spec; },
              [](RunConfig& c, std::string_view v) { c.null_spec = std::string(trim(v)); }},
        FDSAD_STR(tested_slots),
        FDSAD_STR(statistic),
        FDSAD_INT(R),
        FDSAD_INT(seed),
        FDSAD_DBL(inflation),
        FDSAD_DBL(unreliable_fraction),
        FDSAD_STR(scale),
        FDSAD_INT(cdf_points),
        FDSAD_INT(grid_A),
        FDSAD_DBL(half_width),
        FDSAD_INT(n),
        FDSAD_STR(theta),
        FDSAD_STR(innovation),
        FDSAD_STR(d_values),
        FDSAD_STR(n_values),
        FDSAD_STR(innovations),
        FDSAD_INT(replicates),
        FDSAD_DBL(level),
        FDSAD_INT(fdes_series),
        FDSAD_STR(probs),
        FDSAD_INT(first_year),
        FDSAD_INT(last_year),
        FDSAD_STR(out),
    };
    return f;
}

#undef FDSAD_STR
#undef FDSAD_DBL
#undef FDSAD_INT

std::string normalize_key(std::string_view k) {
    std::string s(trim(k));
    while (s.starts_with("-")) s.erase(0, 1);
    std::replace(s.begin(), s.end(), '-', '_');
    return s;
}

ScoreVariant parse_variant(std::string_view s) {
    if (s == "plain") return ScoreVariant::Plain;
    if (s == "profiled") return ScoreVariant::Profiled;
    throw Error(ErrorCode::ConfigError, "variant must be plain or profiled");
}

WaldScale parse_scale(std::string_view s) {
    if (s == "m") return WaldScale::M;
    if (s == "n") return WaldScale::N;
    throw Error(ErrorCode::ConfigError, "scale must be m or n");
}

std::vector<std::size_t> parse_sizes(std::string_view list, std::string_view what) {
    std::vector<std::size_t> out;
    for (const auto& t : split(list, ',')) out.push_back(to_integer<std::size_t>(t, what));
    return out;
}

json meta(const RunConfig& cfg) {
    json j;
    j["version"] = kVersion;
    j["command"] = to_string(cfg.command);
    j["config_hash"] = config_hash(cfg);
    j["seed"] = cfg.seed;
    json c = json::object();
    for (const auto& [k, v] : to_kv(cfg)) c[k] = v;
    j["config"] = c;
    return j;
}

json named(const ParamLayout& lay, const Vector& v) {
    json j = json::object();
    for (Eigen::Index i = 0; i < v.size(); ++i) j[lay.names[static_cast<std::size_t>(i)]] = v[i];
    return j;
}

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) r.push_back(m(i, k));
        rows.push_back(r);
    }
    return rows;
}

/// Header line `# fdsad <version> config_hash=<hash> seed=<seed>` for CSV artifacts.
std::string csv_banner(const RunConfig& cfg) {
    return "# fdsad " + std::string(kVersion) + " config_hash=" + config_hash(cfg) + " seed=" +
           std::to_string(cfg.seed) + "\n";
}

class Runner {
public:
    explicit Runner(const RunConfig& cfg) : cfg_(cfg), out_(cfg.out) {}

    RunOutcome go() {
        json report = meta(cfg_);
        int code = 0;
        switch (cfg_.command) {
            case Command::Estimate: code = estimate(report); break;
            case Command::Test: code = test(report); break;
            case Command::Density: code = density(report); break;
            case Command::Simulate: code = simulate(report); break;
            case Command::StudySw: code = study_sw(report); break;
            case Command::StudyNull: code = study_null(report); break;
            case Command::Pdo: code = pdo(report); break;
        }
        report["exit_code"] = code;
        RunOutcome res;
        res.exit_code = code;
        res.report = report.dump(2) + "\n";
        write(std::string(to_string(cfg_.command)) + ".json", res.report);
        res.artifacts = artifacts_;
        return res;
    }

private:
    void write(const std::string& name, const std::string& text) {
        write_text_atomic(out_ / name, text);
        artifacts_.push_back((out_ / name).string());
    }

    SpectralModel model() const { return parse_model_spec(cfg_.model, cfg_.d_range); }

    TimeSeriesData preprocess(const TimeSeriesData& x) const {
        if (cfg_.detrend == "none") return x;
        std::vector<double> v(x.values().begin(), x.values().end());
        if (cfg_.detrend == "mean") {
            const double mu = x.mean();
            for (double& e : v) e -= mu;
            return TimeSeriesData(std::move(v));
        }
        if (cfg_.detrend == "linear") {
            std::vector<double> t(v.size());
            for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i + 1);
            double a = 0.0;
            double b = 0.0;
            return TimeSeriesData(detrend_linear(t, v, a, b));
        }
        throw Error(ErrorCode::ConfigError, "detrend must be none, mean or linear");
    }

    TimeSeriesData load() const {
        if (cfg_.input.empty()) throw Error(ErrorCode::ConfigError, "no input file given");
        if (!std::filesystem::exists(cfg_.input)) {
            throw Error(ErrorCode::ConfigError, "input file '" + cfg_.input + "' does not exist");
        }
        return preprocess(ingest_csv(cfg_.input, cfg_.column, cfg_.header));
    }

    struct Fitted {
        WhittleProblem problem;
        WhittleFit fit;
    };

    Fitted fit(const TimeSeriesData& x, const SpectralModel& mdl) const {
        WhittleProblem pr(compute_periodogram(x, parse_taper(cfg_.taper)), mdl, parse_variant(cfg_.variant));
        WhittleFit f = solve_whittle(pr, mdl.default_init(x.variance()));
        return {std::move(pr), std::move(f)};
    }

    static json fit_json(const WhittleProblem& pr, const WhittleFit& f) {
        json j;
        j["model"] = pr.model().describe();
        j["variant"] = to_string(f.variant);
        j["n"] = f.n;
        j["m"] = f.m;
        j["theta_hat"] = named(f.theta_hat.layout, f.theta_hat.values);
        if (f.sigma2_hat) j["sigma2_hat"] = *f.sigma2_hat;
        j["converged"] = f.converged;
        j["status"] = to_string(f.status);
        j["iterations"] = f.iterations;
        j["score_norm"] = f.score_norm;
        j["V_hat"] = matrix_json(f.V_hat);
        Vector se(f.V_hat.rows());
        for (Eigen::Index i = 0; i < se.size(); ++i) se[i] = std::sqrt(f.V_hat(i, i) / static_cast<double>(f.m));
        j["std_error"] = named(f.theta_hat.layout, se);
        return j;
    }

    IsConfig is_config() const {
        IsConfig c;
        c.R = cfg_.R;
        c.seed = cfg_.seed;
        c.inflation = cfg_.inflation;
        c.unreliable_fraction = cfg_.unreliable_fraction;
        c.scale = parse_scale(cfg_.scale);
        return c;
    }

    int estimate(json& report) {
        const SpectralModel mdl = model();
        const TimeSeriesData x = load();
        const Fitted ft = fit(x, mdl);
        write("periodogram.csv", periodogram_csv(ft.problem.periodogram()));
        report["fit"] = fit_json(ft.problem, ft.fit);
        return ft.fit.converged ? 0 : 4;
    }

    std::string periodogram_csv(const Periodogram& pg) const {
        std::ostringstream os;
        os.precision(17);
        os << csv_banner(cfg_) << "j,lambda,I\n";
        for (std::size_t j = 0; j < pg.m(); ++j) os << (j + 1) << ',' << pg.frequencies[j] << ',' << pg.ordinates[j] << '\n';
        return os.str();
    }

    /// Runs one test on a converged fit; returns the report entry and fills the CDF CSV.
    json one_test(const Fitted& ft, HypothesisSpec hyp, std::string* cdf_csv, bool& unreliable) const {
        const IsConfig is = is_config();
        const FdesSample s = fdes_sample(ft.problem, ft.fit, hyp, is);
        const TestReport r = report_from_sample(s, hyp, ft.problem.dim(), is, ft.fit.theta_hat.layout.names);
        json j;
        j["hypothesis"] = r.hypothesis;
        j["statistic"] = to_string(r.statistic);
        j["value"] = r.statistic_value;
        j["p_fdes"] = r.p_fdes;
        j["p_chi2"] = r.p_chi2;
        j["mc_se"] = r.mc_se;
        j["dof"] = r.dof;
        j["R"] = r.R;
        j["seed"] = r.seed;
        j["failures"] = r.failures;
        j["outside"] = r.outside;
        j["n_effective"] = r.n_effective;
        j["unreliable"] = r.unreliable;
        const std::vector<double> pr = parse_doubles(cfg_.probs);
        json q = json::object();
        json qc = json::object();
        for (double p : pr) {
            q[fmt(p)] = s.quantile(p);
            qc[fmt(p)] = chi2_quantile(p, static_cast<double>(r.dof));
        }
        j["quantiles_fdes"] = q;
        j["quantiles_chi2"] = qc;
        if (cdf_csv) {
            const double dof = static_cast<double>(r.dof);
            const double top = std::max(chi2_quantile(0.999, dof), 1.5 * (std::isfinite(r.statistic_value) ? r.statistic_value : 0.0));
            std::ostringstream os;
            os.precision(10);
            os << csv_banner(cfg_) << "x,cdf_fdes,cdf_chi2\n";
            const std::size_t k = std::max<std::size_t>(cfg_.cdf_points, 2);
            for (std::size_t i = 0; i < k; ++i) {
                const double xv = top * static_cast<double>(i) / static_cast<double>(k - 1);
                os << xv << ',' << s.cdf(xv) << ',' << 1.0 - p_value_chi2(xv, dof) << '\n';
            }
            *cdf_csv = os.str();
        }
        unreliable = unreliable || r.unreliable;
        return j;
    }

    int test(json& report) {
        const SpectralModel mdl = model();
        const TimeSeriesData x = load();
        const Fitted ft = fit(x, mdl);
        report["fit"] = fit_json(ft.problem, ft.fit);
        if (!ft.fit.converged) {
            report["error"] = {{"category", "NonConvergence"}, {"message", "Whittle fit did not converge"}};
            return 4;
        }
        const HypothesisSpec hyp = parse_hypothesis(mdl, cfg_.null_spec, cfg_.tested_slots, cfg_.statistic);
        std::string cdf;
        bool unreliable = false;
        const json t = one_test(ft, hyp, &cdf, unreliable);
        for (const auto& [k, v] : t.items()) report[k] = v;
        write("cdf.csv", cdf);
        return unreliable ? 5 : 0;
    }

    int density(json& report) {
        const SpectralModel mdl = model();
        if (mdl.dim() != 1) throw Error(ErrorCode::ConfigError, "density grids need a one-parameter model");
        const TimeSeriesData x = load();
        const Fitted ft = fit(x, mdl);
        report["fit"] = fit_json(ft.problem, ft.fit);
        if (!ft.fit.converged) return 4;
        double hw = cfg_.half_width;
        if (!(hw > 0.0)) hw = 6.0 * std::sqrt(ft.fit.V_hat(0, 0) / static_cast<double>(ft.fit.m));
        const DensityGrid g = emp_density_grid_1d(ft.problem, ft.fit, hw, cfg_.grid_A);
        write("density.csv", csv_banner(cfg_) + density_grid_csv(g));
        report["grid"] = {{"A", cfg_.grid_A}, {"half_width", hw}, {"points", g.points.size()},
                          {"failures", g.failures}, {"normalizer", g.normalizer}};
        return 0;
    }

    int simulate(json& report) {
        const SpectralModel mdl = model();
        const std::vector<double> th = parse_doubles(cfg_.theta);
        if (static_cast<Eigen::Index>(th.size()) != mdl.dim()) {
            throw Error(ErrorCode::ConfigError, "theta needs " + std::to_string(mdl.dim()) + " values");
        }
        const Vector theta = Eigen::Map<const Vector>(th.data(), mdl.dim());
        const ArfimaGenerator gen = ArfimaGenerator::from_model(mdl, theta);
        const TimeSeriesData x = simulate_arfima(cfg_.n, gen, InnovationDist(innovation_from_string(cfg_.innovation)),
                                                 cfg_.seed);
        write_series_csv(x, out_ / "series.csv", csv_banner(cfg_));
        artifacts_.push_back((out_ / "series.csv").string());
        report["model"] = mdl.describe();
        report["theta"] = named(mdl.layout(), theta);
        report["n"] = cfg_.n;
        report["sample_mean"] = x.mean();
        report["sample_variance"] = x.variance();
        return 0;
    }

    int study_sw(json& report) {
        std::vector<Innovation> inn;
        for (const auto& s : split(cfg_.innovations, ',')) inn.push_back(innovation_from_string(s));
        const auto cells = shapiro_wilk_study(parse_doubles(cfg_.d_values), parse_sizes(cfg_.n_values, "n_values"), inn,
                                              cfg_.replicates, cfg_.seed, cfg_.level);
        write("sw_table.csv", csv_banner(cfg_) + sw_table_csv(cells));
        json arr = json::array();
        for (const auto& c : cells) {
            arr.push_back({{"innovation", to_string(c.innovation)}, {"d", c.d}, {"n", c.n},
                           {"replicates", c.replicates}, {"rejection_rate", c.rejection_rate}});
        }
        report["cells"] = arr;
        return 0;
    }

    int study_null(json& report) {
        const SpectralModel mdl = model();
        const std::vector<double> th = parse_doubles(cfg_.theta);
        if (static_cast<Eigen::Index>(th.size()) != mdl.dim()) {
            throw Error(ErrorCode::ConfigError, "theta needs " + std::to_string(mdl.dim()) + " values");
        }
        const Vector theta0 = Eigen::Map<const Vector>(th.data(), mdl.dim());
        McOptions opts;
        opts.variant = parse_variant(cfg_.variant);
        opts.innovation = innovation_from_string(cfg_.innovation);
        opts.scale = parse_scale(cfg_.scale);
        for (const auto& s : split(cfg_.tested_slots, ',')) {
            const auto idx = mdl.layout().index_of(s);
            opts.tested.push_back(idx ? *idx : to_integer<Eigen::Index>(s, "tested_slots"));
        }
        const NullStatistic stat = null_statistic_from_string(cfg_.statistic);
        const McResult mc = mc_null_distribution(mdl, theta0, cfg_.n, cfg_.replicates, stat, cfg_.seed, opts);

        std::ostringstream os;
        os.precision(17);
        os << csv_banner(cfg_) << "replicate,statistic\n";
        for (std::size_t i = 0; i < mc.statistics.size(); ++i) os << mc.replicate_index[i] << ',' << mc.statistics[i] << '\n';
        write("null_statistics.csv", os.str());

        const std::vector<double> probs = parse_doubles(cfg_.probs);
        const Eigen::Index dof = opts.tested.empty() ? mdl.dim() : static_cast<Eigen::Index>(opts.tested.size());
        report["model"] = mdl.describe();
        report["theta0"] = named(mdl.layout(), theta0);
        report["statistic"] = to_string(stat);
        report["n"] = cfg_.n;
        report["requested"] = mc.requested;
        report["failures"] = mc.failures;
        report["convergence_fraction"] = mc.convergence_fraction();
        report["mean"] = [&] {
            double s = 0.0;
            for (double v : mc.statistics) s += v;
            return s / static_cast<double>(mc.statistics.size());
        }();
        const auto qt = quantiles_type7(mc.statistics, probs);
        json q = json::array();
        for (std::size_t i = 0; i < probs.size(); ++i) {
            q.push_back({{"p", probs[i]}, {"empirical", qt[i]}, {"chi2", chi2_quantile(probs[i], static_cast<double>(dof))}});
        }
        report["quantiles"] = q;

        if (cfg_.fdes_series > 0 && stat != NullStatistic::Saddlepoint) {
            HypothesisSpec hyp;
            hyp.statistic = statistic_from_string(to_string(stat));
            hyp.tested = opts.tested;
            if (hyp.composite()) {
                hyp.theta0.resize(static_cast<Eigen::Index>(hyp.tested.size()));
                for (std::size_t i = 0; i < hyp.tested.size(); ++i) hyp.theta0[static_cast<Eigen::Index>(i)] = theta0[hyp.tested[i]];
            } else {
                hyp.theta0 = theta0;
            }
            const auto qc = fdes_quantile_study(mc, mdl, theta0, cfg_.fdes_series, hyp, is_config(), probs, opts);
            write("qq.csv", csv_banner(cfg_) + qq_table_csv(qc));
            report["fdes_series_used"] = qc.series_used;
            report["fdes_series_failed"] = qc.series_failed;
            for (std::size_t i = 0; i < probs.size(); ++i) report["quantiles"][i]["fdes"] = qc.fdes[i];
        }
        return 0;
    }

    int pdo(json& report) {
        PdoPipelineSpec spec;
        if (cfg_.input.empty()) throw Error(ErrorCode::ConfigError, "no PDO input file given");
        spec.source = cfg_.input;
        spec.first_year = cfg_.first_year;
        spec.last_year = cfg_.last_year;
        const PdoSeries ps = pdo_pipeline(spec);
        {
            std::ostringstream os;
            os.precision(17);
            os << csv_banner(cfg_) << "year,annual_mean,detrended\n";
            for (std::size_t i = 0; i < ps.years.size(); ++i) {
                os << ps.years[i] << ',' << ps.annual_means[i] << ',' << ps.detrended[i] << '\n';
            }
            write("pdo_series.csv", os.str());
        }
        report["series"] = {{"length", ps.years.size()}, {"slope", ps.slope}, {"intercept", ps.intercept}};
        const SpectralModel mdl = model();
        const Fitted ft = fit(ps.detrended, mdl);
        write("periodogram.csv", periodogram_csv(ft.problem.periodogram()));
        report["fit"] = fit_json(ft.problem, ft.fit);
        if (!ft.fit.converged) return 4;
        json tests = json::array();
        bool unreliable = false;
        for (const auto& s : split(cfg_.statistic, ',')) {
            const HypothesisSpec hyp = parse_hypothesis(mdl, cfg_.null_spec, cfg_.tested_slots, s);
            std::string cdf;
            tests.push_back(one_test(ft, hyp, &cdf, unreliable));
            write("cdf_" + s + ".csv", cdf);
        }
        report["tests"] = tests;
        return unreliable ? 5 : 0;
    }

    const RunConfig& cfg_;
    std::filesystem::path out_;
    std::vector<std::string> artifacts_;
};

}  // namespace

std::string_view to_string(Command c) noexcept {
    switch (c) {
        case Command::Estimate: return "estimate";
        case Command::Test: return "test";
        case Command::Density: return "density";
        case Command::Simulate: return "simulate";
        case Command::StudySw: return "study-sw";
        case Command::StudyNull: return "study-null";
        case Command::Pdo: return "pdo";
    }
    return "unknown";
}

Command command_from_string(std::string_view s) {
    for (Command c : {Command::Estimate, Command::Test, Command::Density, Command::Simulate, Command::StudySw,
                      Command::StudyNull, Command::Pdo}) {
        if (s == to_string(c)) return c;
    }
    throw Error(ErrorCode::ConfigError, "unknown command '" + std::string(s) + "'");
}

RunConfig defaults_for(Command c) {
    RunConfig cfg;
    cfg.command = c;
    if (c == Command::Pdo) {
        cfg.model = "arfima(1,0)";
        cfg.variant = "profiled";
        cfg.null_spec = "d=0.446,phi1=0";
        cfg.statistic = "wald,fdet";
        cfg.detrend = "none";
    }
    if (c == Command::StudyNull) {
        cfg.d_range = "-0.49,0.5";
        cfg.theta = "0";
        cfg.replicates = 10000;
        cfg.n = 250;
        cfg.R = 1000;
    }
    return cfg;
}

std::map<std::string, std::string> to_kv(const RunConfig& cfg) {
    std::map<std::string, std::string> kv;
    for (const auto& f : fields()) kv[f.key] = f.get(cfg);
    return kv;
}

void apply_kv(RunConfig& cfg, const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv) {
        const std::string key = normalize_key(k);
        const auto it = std::find_if(fields().begin(), fields().end(), [&](const Field& f) { return key == f.key; });
        if (it == fields().end()) throw Error(ErrorCode::ConfigError, "unknown config key '" + k + "'");
        it->set(cfg, v);
    }
}

std::map<std::string, std::string> parse_config_text(std::string_view text) {
    std::map<std::string, std::string> kv;
    std::size_t line_no = 0;
    for (const auto& raw : split(text, '\n')) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorCode::ConfigError, "config line " + std::to_string(line_no) + ": expected key=value");
        }
        kv[normalize_key(line.substr(0, eq))] = std::string(trim(line.substr(eq + 1)));
    }
    return kv;
}

std::string config_hash(const RunConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [k, v] : to_kv(cfg)) {
        for (char ch : k + "=" + v + "\n") {
            h ^= static_cast<unsigned char>(ch);
            h *= 0x100000001b3ULL;
        }
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

std::vector<double> parse_doubles(std::string_view list) {
    std::vector<double> out;
    for (const auto& t : split(list, ',')) out.push_back(to_double(t, "list"));
    return out;
}

SpectralModel parse_model_spec(std::string_view spec, std::string_view d_range) {
    spec = trim(spec);
    const auto open = spec.find('(');
    if (open == std::string_view::npos || spec.back() != ')') {
        throw Error(ErrorCode::ConfigError, "model must look like arfima(p,q), arfima(p,q,sigma2) or fexp(p)");
    }
    std::string family(trim(spec.substr(0, open)));
    std::transform(family.begin(), family.end(), family.begin(), [](unsigned char c) { return std::tolower(c); });
    const auto args = split(spec.substr(open + 1, spec.size() - open - 2), ',');
    auto order = [](const std::string& s) {
        const int v = to_integer<int>(s, "model order");
        if (v < 0 || v > 20) throw Error(ErrorCode::ConfigError, "model orders must lie in [0, 20]");
        return v;
    };
    std::optional<SpectralModel> m;
    if (family == "arfima" && (args.size() == 2 || args.size() == 3)) {
        bool free_var = false;
        if (args.size() == 3) {
            if (args[2] != "sigma2") throw Error(ErrorCode::ConfigError, "third arfima argument must be sigma2");
            free_var = true;
        }
        m = SpectralModel::arfima(order(args[0]), order(args[1]), !free_var);
    } else if (family == "fexp" && args.size() == 1) {
        m = SpectralModel::fexp(order(args[0]));
    } else {
        throw Error(ErrorCode::ConfigError, "unrecognised model '" + std::string(spec) + "'");
    }
    if (!trim(d_range).empty()) {
        const auto r = parse_doubles(d_range);
        if (r.size() != 2) throw Error(ErrorCode::ConfigError, "d_range needs two values lo,hi");
        m->set_memory_range({r[0], r[1]});
    }
    return *m;
}

Taper parse_taper(std::string_view spec) {
    spec = trim(spec);
    if (spec.empty() || spec == "none") return Taper::none();
    if (spec.starts_with("cosine")) {
        const auto colon = spec.find(':');
        return Taper::cosine(colon == std::string_view::npos ? 0.1 : to_double(spec.substr(colon + 1), "taper"));
    }
    throw Error(ErrorCode::ConfigError, "taper must be none or cosine[:proportion]");
}

HypothesisSpec parse_hypothesis(const SpectralModel& model, std::string_view null_spec, std::string_view tested_slots,
                                std::string_view statistic) {
    HypothesisSpec hyp;
    hyp.statistic = statistic_from_string(trim(statistic));
    const auto& lay = model.layout();
    auto slot = [&](const std::string& s) -> Eigen::Index {
        if (const auto idx = lay.index_of(s)) return *idx;
        const auto i = to_integer<Eigen::Index>(s, "tested slot");
        if (i < 0 || i >= model.dim()) throw Error(ErrorCode::ConfigError, "tested slot " + s + " out of range");
        return i;
    };

    const auto items = split(null_spec, ',');
    if (items.empty()) throw Error(ErrorCode::ConfigError, "no null hypothesis given");
    std::vector<Eigen::Index> slots;
    std::vector<double> values;
    const bool keyed = items.front().find('=') != std::string::npos;
    for (const auto& it : items) {
        const auto eq = it.find('=');
        if ((eq != std::string::npos) != keyed) {
            throw Error(ErrorCode::ConfigError, "null: mix of name=value and bare values");
        }
        if (keyed) {
            slots.push_back(slot(std::string(trim(std::string_view(it).substr(0, eq)))));
            values.push_back(to_double(std::string_view(it).substr(eq + 1), "null"));
        } else {
            values.push_back(to_double(it, "null"));
        }
    }
    if (!keyed) {
        for (const auto& s : split(tested_slots, ',')) slots.push_back(slot(s));
        if (slots.empty()) {
            for (Eigen::Index i = 0; i < model.dim(); ++i) slots.push_back(i);
        }
    }
    if (slots.size() != values.size()) {
        throw Error(ErrorCode::ConfigError, "null has " + std::to_string(values.size()) + " values for " +
                                                std::to_string(slots.size()) + " slots");
    }
    std::vector<Eigen::Index> sorted = slots;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw Error(ErrorCode::ConfigError, "null names a slot twice");
    }
    if (static_cast<Eigen::Index>(slots.size()) == model.dim()) {
        hyp.theta0 = Vector::Zero(model.dim());
        for (std::size_t i = 0; i < slots.size(); ++i) hyp.theta0[slots[i]] = values[i];
        model.validate(hyp.theta0);
    } else {
        hyp.tested = slots;
        hyp.theta0 = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
    }
    return hyp;
}

RunOutcome run(const RunConfig& cfg) {
    try {
        return Runner(cfg).go();
    } catch (const Error& e) {
        json j = meta(cfg);
        j["error"] = {{"category", to_string(e.code())}, {"message", e.what()}};
        const int code = exit_code_for(e.code());
        j["exit_code"] = code;
        RunOutcome res;
        res.exit_code = code;
        res.report = j.dump(2) + "\n";
        try {
            write_text_atomic(std::filesystem::path(cfg.out) / "error.json", res.report);
            res.artifacts.push_back((std::filesystem::path(cfg.out) / "error.json").string());
        } catch (const std::exception&) {
        }
        return res;
    }
}

}  // namespace fdsad
