#include "fdsad/cli.hpp"
#include "fdsad/error.hpp"
#include "fdsad/io.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <map>

int main(int argc, char** argv) {
    CLI::App app{"Frequency-domain saddlepoint inference for stationary time series"};
    app.set_version_flag("--version", std::string(fdsad::kVersion));

    std::string command;
    std::string config_file;
    std::map<std::string, std::string> flags;
    std::vector<std::string> sets;

    app.add_option("command", command, "estimate | test | density | simulate | study-sw | study-null | pdo")
        ->required();
    app.add_option("--config", config_file, "flat key=value config file");
    app.add_option("--set", sets, "extra key=value override (repeatable)");

    // Flags mirror config keys; only those given on the command line are applied.
    const std::pair<const char*, const char*> named[] = {
        {"--model", "arfima(p,q), arfima(p,q,sigma2) or fexp(p)"},
        {"--d-range", "admissible memory range lo,hi"},
        {"--variant", "plain | profiled"},
        {"--input", "input file (CSV, or NOAA table for pdo)"},
        {"--column", "zero-based CSV column"},
        {"--header", "CSV has a header row (true/false)"},
        {"--taper", "none | cosine[:proportion]"},
        {"--detrend", "none | mean | linear"},
        {"--null", "null values, or name=value pairs"},
        {"--tested-slots", "tested slot names or indices"},
        {"--statistic", "wald | fdet | owen (pdo: comma list)"},
        {"--R", "importance sampling draws"},
        {"--seed", "master seed"},
        {"--inflation", "proposal covariance inflation"},
        {"--unreliable-fraction", "failed-draw share that flags the report as unreliable"},
        {"--scale", "m | n"},
        {"--cdf-points", "points in the CDF curve"},
        {"--grid-A", "density grid size A"},
        {"--half-width", "density grid half width (0 = 6 standard errors)"},
        {"--n", "series length"},
        {"--theta", "parameter values"},
        {"--innovation", "gaussian | uniform | student_t6 | chisq5"},
        {"--d-values", "study d values"},
        {"--n-values", "study sample sizes"},
        {"--innovations", "study innovation laws"},
        {"--replicates", "Monte Carlo replicates"},
        {"--level", "test level"},
        {"--fdes-series", "series used for the FDES quantile comparison"},
        {"--probs", "quantile probabilities"},
        {"--first-year", "first PDO year"},
        {"--last-year", "last PDO year"},
        {"--out", "output directory"},
    };
    std::map<std::string, std::string> values;
    for (const auto& [flag, help] : named) {
        app.add_option(flag, values[flag], help);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        fdsad::RunConfig cfg = fdsad::defaults_for(fdsad::command_from_string(command));
        if (!config_file.empty()) {
            if (!std::filesystem::exists(config_file)) {
                throw fdsad::Error(fdsad::ErrorCode::ConfigError, "config file '" + config_file + "' does not exist");
            }
            auto kv = fdsad::parse_config_text(fdsad::read_text(config_file));
            kv.erase("command");
            fdsad::apply_kv(cfg, kv);
        }
        std::map<std::string, std::string> cli_kv;
        for (const auto& [flag, help] : named) {
            if (app.get_option(flag)->count() > 0) cli_kv[flag] = values[flag];
        }
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw fdsad::Error(fdsad::ErrorCode::ConfigError, "--set expects key=value");
            cli_kv[s.substr(0, eq)] = s.substr(eq + 1);
        }
        fdsad::apply_kv(cfg, cli_kv);
        const fdsad::RunOutcome res = fdsad::run(cfg);
        (res.exit_code == 0 ? std::cout : std::cerr) << res.report;
        return res.exit_code;
    } catch (const fdsad::Error& e) {
        std::cerr << "{\"error\": {\"category\": \"" << fdsad::to_string(e.code()) << "\", \"message\": \"" << e.what()
                  << "\"}}\n";
        return fdsad::exit_code_for(e.code());
    }
}
