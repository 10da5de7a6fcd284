#pragma once

#include "fdsad/simulation.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace fdsad {

inline constexpr std::string_view kVersion = "1.0.0";

enum class Command { Estimate, Test, Density, Simulate, StudySw, StudyNull, Pdo };

[[nodiscard]] std::string_view to_string(Command c) noexcept;
[[nodiscard]] Command command_from_string(std::string_view s);

/// Everything a run needs. Lists are comma separated strings so that the
/// config file, the command line and the echoed metadata share one form.
struct RunConfig {
    Command command = Command::Estimate;

    // model
    std::string model = "arfima(0,0)";  ///< arfima(p,q), arfima(p,q,sigma2) or fexp(p)
    std::string d_range;                ///< "lo,hi"; empty keeps the model default [0, 0.5)
    std::string variant = "plain";      ///< plain | profiled

    // data
    std::string input;
    std::size_t column = 0;
    bool header = false;
    std::string taper = "none";  ///< none | cosine[:proportion]
    std::string detrend = "mean";  ///< none | mean | linear, applied before the periodogram

    // hypothesis and importance sampling
    std::string null_spec;     ///< values, or name=value pairs
    std::string tested_slots;  ///< names or zero-based indices; empty = simple
    std::string statistic = "wald";
    std::size_t R = 10000;
    std::uint64_t seed = 1;
    double inflation = 1.0;
    double unreliable_fraction = 0.2;  ///< failed-draw share above which the report is flagged (exit 5)
    std::string scale = "m";
    std::size_t cdf_points = 200;

    // density
    int grid_A = 100;
    double half_width = 0.0;  ///< 0 = 6 standard errors

    // simulate / studies
    std::size_t n = 500;
    std::string theta;
    std::string innovation = "gaussian";
    std::string d_values = "0,0.1,0.2,0.25,0.45";
    std::string n_values = "30,90,120";
    std::string innovations = "gaussian,uniform,student_t6,chisq5";
    std::size_t replicates = 5000;
    double level = 0.05;
    std::size_t fdes_series = 0;
    std::string probs = "0.9,0.95,0.99";

    // pdo
    int first_year = 1920;
    int last_year = 2022;

    std::string out = "out";
};

/// Defaults with the command's own overrides (the pdo command fits a
/// profiled ARFIMA(1,d,0) and tests d = 0.446, phi = 0 with Wald and FDET).
[[nodiscard]] RunConfig defaults_for(Command c);

/// Flat key=value serialisation (every field, sorted by key).
[[nodiscard]] std::map<std::string, std::string> to_kv(const RunConfig& cfg);
/// Applies key=value pairs; '-' and '_' are interchangeable in keys. Unknown
/// keys and malformed values are ConfigError.
void apply_kv(RunConfig& cfg, const std::map<std::string, std::string>& kv);
/// Parses a config document: one key=value per line, '#' starts a comment.
[[nodiscard]] std::map<std::string, std::string> parse_config_text(std::string_view text);

/// FNV-1a (64 bit) over the canonical key=value form, as 16 hex digits.
[[nodiscard]] std::string config_hash(const RunConfig& cfg);

[[nodiscard]] SpectralModel parse_model_spec(std::string_view spec, std::string_view d_range = {});
[[nodiscard]] std::vector<double> parse_doubles(std::string_view list);
[[nodiscard]] Taper parse_taper(std::string_view spec);

/// Null values and tested slots against `model`.
[[nodiscard]] HypothesisSpec parse_hypothesis(const SpectralModel& model, std::string_view null_spec,
                                              std::string_view tested_slots, std::string_view statistic);

struct RunOutcome {
    int exit_code = 0;
    std::string report;  ///< JSON as written to <out>/<command>.json
    std::vector<std::string> artifacts;
};

/// Executes the command, writing every artifact atomically under cfg.out.
/// Library errors are caught and reported as a JSON error document with the
/// category's exit code.
[[nodiscard]] RunOutcome run(const RunConfig& cfg);

}  // namespace fdsad
