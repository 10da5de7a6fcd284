#include "fdsad/io.hpp"

#include "fdsad/error.hpp"

#include <unistd.h>

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace fdsad {
namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t b = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > b) out.push_back(line.substr(b, i - b));
    }
    return out;
}

}  // namespace

void write_text_atomic(const std::filesystem::path& path, std::string_view content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw Error(ErrorCode::ConfigError, "cannot open " + tmp.string() + " for writing");
        os.write(content.data(), static_cast<std::streamsize>(content.size()));
        os.flush();
        if (!os) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw Error(ErrorCode::ConfigError, "write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(ErrorCode::ConfigError, "cannot rename onto " + path.string());
    }
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorCode::ConfigError, "cannot read " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

TimeSeriesData ingest_csv(const std::filesystem::path& path, std::size_t column, bool header) {
    const std::string text = read_text(path);
    std::vector<double> values;
    std::istringstream is(text);
    std::string line;
    std::size_t row = 0;
    bool header_pending = header;
    while (std::getline(is, line)) {
        ++row;
        if (trim(line).empty() || trim(line).front() == '#') continue;
        if (header_pending) {
            header_pending = false;
            continue;
        }
        std::string_view rest = line;
        std::size_t col = 0;
        std::string_view field;
        bool found = false;
        while (true) {
            const auto comma = rest.find(',');
            field = rest.substr(0, comma);
            if (col == column) {
                found = true;
                break;
            }
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
            ++col;
        }
        if (!found) {
            throw Error(ErrorCode::ParseError, "row " + std::to_string(row) + ": no column " + std::to_string(column));
        }
        double v = 0.0;
        if (!parse_double(field, v) || !std::isfinite(v)) {
            throw Error(ErrorCode::ParseError, "row " + std::to_string(row) + ", column " + std::to_string(column) +
                                                   ": cannot parse '" + std::string(trim(field)) + "'");
        }
        values.push_back(v);
    }
    if (values.empty()) throw Error(ErrorCode::EmptySeries, "no observations in " + path.string());
    return TimeSeriesData(std::move(values));
}

void write_series_csv(const TimeSeriesData& x, const std::filesystem::path& path, std::string_view banner) {
    std::string out(banner);
    char buf[64];
    for (double v : x.values()) {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
        out.append(buf, ptr);
        out.push_back('\n');
    }
    write_text_atomic(path, out);
}

MonthlyTable parse_monthly_table(std::string_view text) {
    MonthlyTable table;
    std::size_t pos = 0;
    std::size_t row = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++row;
        const auto tok = split_ws(line);
        if (tok.empty()) continue;
        int year = 0;
        auto [ptr, ec] = std::from_chars(tok[0].data(), tok[0].data() + tok[0].size(), year);
        if (ec != std::errc{} || ptr != tok[0].data() + tok[0].size()) continue;  // header or note line
        if (tok.size() > 13) {
            throw Error(ErrorCode::FormatError, "line " + std::to_string(row) + ": more than 12 monthly values");
        }
        std::vector<double> months(12, std::numeric_limits<double>::quiet_NaN());
        for (std::size_t k = 1; k < tok.size(); ++k) {
            double v = 0.0;
            if (!parse_double(tok[k], v)) {
                throw Error(ErrorCode::FormatError,
                            "line " + std::to_string(row) + ": bad value '" + std::string(tok[k]) + "'");
            }
            if (std::abs(v) < 99.9) months[k - 1] = v;
        }
        table.years.push_back(year);
        table.months.push_back(std::move(months));
    }
    if (table.years.empty()) throw Error(ErrorCode::FormatError, "no year rows found");
    return table;
}

std::vector<double> detrend_linear(const std::vector<double>& t, const std::vector<double>& y, double& intercept,
                                   double& slope) {
    const std::size_t n = y.size();
    if (n < 2 || t.size() != n) throw Error(ErrorCode::InvalidParameter, "detrend needs two or more points");
    double tm = 0.0, ym = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        tm += t[i];
        ym += y[i];
    }
    tm /= static_cast<double>(n);
    ym /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (t[i] - tm) * (y[i] - ym);
        sxx += (t[i] - tm) * (t[i] - tm);
    }
    slope = sxy / sxx;
    intercept = ym - slope * tm;
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - (intercept + slope * t[i]);
    return r;
}

PdoSeries pdo_from_table(const MonthlyTable& table, int first_year, int last_year) {
    if (last_year < first_year) throw Error(ErrorCode::ConfigError, "year range is empty");
    PdoSeries out;
    std::string missing;
    for (int y = first_year; y <= last_year; ++y) {
        std::size_t idx = table.years.size();
        for (std::size_t i = 0; i < table.years.size(); ++i) {
            if (table.years[i] == y) {
                idx = i;
                break;
            }
        }
        bool complete = idx < table.years.size();
        double sum = 0.0;
        if (complete) {
            for (double v : table.months[idx]) {
                if (std::isnan(v)) {
                    complete = false;
                    break;
                }
                sum += v;
            }
        }
        if (!complete) {
            if (!missing.empty()) missing += ',';
            missing += std::to_string(y);
            continue;
        }
        out.years.push_back(y);
        out.annual_means.push_back(sum / 12.0);
    }
    if (!missing.empty()) throw Error(ErrorCode::MissingYears, "missing or incomplete years: " + missing);
    std::vector<double> t(out.years.begin(), out.years.end());
    out.detrended = TimeSeriesData(detrend_linear(t, out.annual_means, out.intercept, out.slope));
    return out;
}

PdoSeries pdo_pipeline(const PdoPipelineSpec& spec) {
    if (!std::filesystem::exists(spec.source)) {
        throw Error(ErrorCode::ConfigError, "PDO file not found: " + spec.source.string());
    }
    return pdo_from_table(parse_monthly_table(read_text(spec.source)), spec.first_year, spec.last_year);
}

}  // namespace fdsad
