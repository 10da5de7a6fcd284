#pragma once

#include "fdsad/periodogram.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fdsad {

/// Writes to `path.tmp.<pid>` and renames over `path`, so readers never see a
/// partial file. Parent directories are created.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);

[[nodiscard]] std::string read_text(const std::filesystem::path& path);

/// One numeric column from a comma separated file. `column` is zero-based.
/// Blank lines and lines starting with '#' are skipped; anything else that fails to parse is a
/// ParseError naming the 1-based row.
[[nodiscard]] TimeSeriesData ingest_csv(const std::filesystem::path& path, std::size_t column = 0,
                                        bool header = false);

/// Single column, no header, full precision. Inverse of ingest_csv.
void write_series_csv(const TimeSeriesData& x, const std::filesystem::path& path, std::string_view banner = {});

struct PdoPipelineSpec {
    std::filesystem::path source;
    int first_year = 1920;
    int last_year = 2022;
};

struct PdoSeries {
    TimeSeriesData detrended;
    std::vector<int> years;
    std::vector<double> annual_means;
    double slope = 0.0;
    double intercept = 0.0;
};

/// Monthly table parsed out of a NOAA style flat file: one row per year,
/// 12 monthly values. Values with |v| >= 99.9 are sentinels for missing.
struct MonthlyTable {
    std::vector<int> years;
    std::vector<std::vector<double>> months;  ///< NaN marks a missing month
};

[[nodiscard]] MonthlyTable parse_monthly_table(std::string_view text);

/// Annual calendar-year means over [first_year, last_year], then OLS residuals
/// on (year, mean). Throws MissingYears listing absent or incomplete years.
[[nodiscard]] PdoSeries pdo_pipeline(const PdoPipelineSpec& spec);
[[nodiscard]] PdoSeries pdo_from_table(const MonthlyTable& table, int first_year, int last_year);

/// OLS fit y = a + b t; returns residuals and writes (a, b).
[[nodiscard]] std::vector<double> detrend_linear(const std::vector<double>& t, const std::vector<double>& y,
                                                 double& intercept, double& slope);

}  // namespace fdsad
