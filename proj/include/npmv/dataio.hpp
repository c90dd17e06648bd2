/**
 * @file dataio.hpp
 * @brief CSV ingestion for prices and geopolitical-risk indices, log returns,
 *        and same-day alignment into a Dataset.
 *
 * Files are comma-delimited UTF-8 with ISO-8601 dates (YYYY-MM-DD) and `.`
 * decimals. Price files have a header naming `date` and `close`; risk files
 * name `date`, `gprd`, `gprd_a`, `gprd_t`. Column order is free.
 */
#pragma once

#include "npmv/dataset.hpp"
#include "npmv/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace npmv {

struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    friend auto operator<=>(const Date&, const Date&) = default;

    std::string iso() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
        return buf;
    }

    /// Days since 1970-01-01 (proleptic Gregorian).
    long days_since_epoch() const {
        const int y = year - (month <= 2 ? 1 : 0);
        const long era = (y >= 0 ? y : y - 399) / 400;
        const long yoe = y - era * 400;
        const long doy = (153 * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1;
        const long doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        return era * 146097 + doe - 719468;
    }

    /// 0 = Monday ... 6 = Sunday.
    int weekday() const {
        const long d = days_since_epoch();
        return static_cast<int>(((d % 7) + 7 + 3) % 7);  // 1970-01-01 was a Thursday
    }

    /// Days-since-epoch of the Monday starting this date's week.
    long week_key() const { return days_since_epoch() - weekday(); }
};

inline bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

inline std::optional<Date> parse_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    Date d;
    auto num = [&](std::size_t pos, std::size_t len, int& out) {
        const auto* first = s.data() + pos;
        const auto res = std::from_chars(first, first + len, out);
        return res.ec == std::errc{} && res.ptr == first + len;
    };
    if (!num(0, 4, d.year) || !num(5, 2, d.month) || !num(8, 2, d.day)) return std::nullopt;
    if (d.month < 1 || d.month > 12 || d.day < 1) return std::nullopt;
    static constexpr std::array<int, 12> days{31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    const int limit = days[d.month - 1] + (d.month == 2 && is_leap(d.year) ? 1 : 0);
    if (d.day > limit) return std::nullopt;
    return d;
}

struct PriceSeries {
    std::vector<Date> dates;
    std::vector<double> close;

    std::size_t size() const noexcept { return dates.size(); }
};

struct RiskIndexSeries {
    std::vector<Date> dates;
    std::vector<double> gprd;
    std::vector<double> gprd_a;
    std::vector<double> gprd_t;

    std::size_t size() const noexcept { return dates.size(); }
};

struct ReturnSeries {
    std::vector<Date> dates;  // date of the later close in each pair
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '\n')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::optional<double> parse_number(std::string_view s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

/// Header plus data rows; rows keep their 1-based line numbers for diagnostics.
struct CsvTable {
    std::map<std::string, std::size_t> columns;
    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
};

inline CsvTable read_csv(const std::string& path, const std::vector<std::string>& required) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::string line;
    std::size_t line_no = 0;
    CsvTable table;
    bool header_seen = false;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (trim(line).empty()) continue;
        const auto fields = split_commas(line);
        if (!header_seen) {
            for (std::size_t i = 0; i < fields.size(); ++i) {
                std::string name(fields[i]);
                std::transform(name.begin(), name.end(), name.begin(),
                               [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
                table.columns[name] = i;
            }
            for (const auto& r : required) {
                if (!table.columns.contains(r)) throw ParseError(path + ": header lacks column '" + r + "'");
            }
            width = fields.size();
            header_seen = true;
            continue;
        }
        if (fields.size() != width) {
            throw ParseError(path + ": row " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                             " fields, header has " + std::to_string(width));
        }
        std::vector<std::string> owned(fields.begin(), fields.end());
        table.rows.emplace_back(line_no, std::move(owned));
    }
    if (!header_seen) throw ParseError(path + ": file is empty");
    if (table.rows.empty()) throw ParseError(path + ": file has a header but no data rows");
    return table;
}

inline void check_unique_dates(const std::vector<Date>& sorted, const std::string& path) {
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i] == sorted[i - 1]) throw ParseError(path + ": duplicate date " + sorted[i].iso());
    }
}

inline Date require_date(const std::string& text, std::size_t line_no, const std::string& path) {
    const auto d = parse_date(trim(text));
    if (!d) throw ParseError(path + ": row " + std::to_string(line_no) + ": malformed date '" + text + "'");
    return *d;
}

}  // namespace detail

/// Reads `date,close`; output is sorted by date. Non-positive or missing closes are rejected.
inline PriceSeries load_price_csv(const std::string& path) {
    const auto table = detail::read_csv(path, {"date", "close"});
    const std::size_t dc = table.columns.at("date");
    const std::size_t cc = table.columns.at("close");
    std::vector<std::pair<Date, double>> rows;
    for (const auto& [line_no, fields] : table.rows) {
        const Date d = detail::require_date(fields[dc], line_no, path);
        const auto v = detail::parse_number(fields[cc]);
        if (!v) throw ParseError(path + ": row " + std::to_string(line_no) + ": missing or malformed close '" +
                                 fields[cc] + "'");
        if (!(*v > 0.0)) {
            throw ParseError(path + ": row " + std::to_string(line_no) + ": close must be positive, got " +
                             fields[cc]);
        }
        rows.emplace_back(d, *v);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    PriceSeries s;
    for (const auto& [d, v] : rows) {
        s.dates.push_back(d);
        s.close.push_back(v);
    }
    detail::check_unique_dates(s.dates, path);
    return s;
}

/// Reads `date,gprd,gprd_a,gprd_t`; output is sorted by date. Values must be non-negative.
inline RiskIndexSeries load_risk_csv(const std::string& path) {
    const auto table = detail::read_csv(path, {"date", "gprd", "gprd_a", "gprd_t"});
    const std::size_t dc = table.columns.at("date");
    const std::array<std::size_t, 3> vc{table.columns.at("gprd"), table.columns.at("gprd_a"),
                                        table.columns.at("gprd_t")};
    std::vector<std::pair<Date, std::array<double, 3>>> rows;
    for (const auto& [line_no, fields] : table.rows) {
        const Date d = detail::require_date(fields[dc], line_no, path);
        std::array<double, 3> vals{};
        for (std::size_t j = 0; j < 3; ++j) {
            const auto v = detail::parse_number(fields[vc[j]]);
            if (!v || *v < 0.0) {
                throw ParseError(path + ": row " + std::to_string(line_no) + ": risk index values must be " +
                                 "non-negative numbers, got '" + fields[vc[j]] + "'");
            }
            vals[j] = *v;
        }
        rows.emplace_back(d, vals);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    RiskIndexSeries s;
    for (const auto& [d, v] : rows) {
        s.dates.push_back(d);
        s.gprd.push_back(v[0]);
        s.gprd_a.push_back(v[1]);
        s.gprd_t.push_back(v[2]);
    }
    detail::check_unique_dates(s.dates, path);
    return s;
}

/// Shortest round-trip decimal representation.
inline std::string format_double(double v) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline void write_price_csv(const PriceSeries& s, std::ostream& out) {
    out << "date,close\n";
    for (std::size_t i = 0; i < s.size(); ++i) out << s.dates[i].iso() << ',' << format_double(s.close[i]) << '\n';
}

inline void write_risk_csv(const RiskIndexSeries& s, std::ostream& out) {
    out << "date,gprd,gprd_a,gprd_t\n";
    for (std::size_t i = 0; i < s.size(); ++i) {
        out << s.dates[i].iso() << ',' << format_double(s.gprd[i]) << ',' << format_double(s.gprd_a[i]) << ','
            << format_double(s.gprd_t[i]) << '\n';
    }
}

/// r_t = ln(close_{t+1} / close_t), dated at the later close.
inline ReturnSeries log_returns(const PriceSeries& prices) {
    if (prices.size() < 2) throw std::invalid_argument("log returns need at least two prices");
    ReturnSeries r;
    for (std::size_t i = 1; i < prices.size(); ++i) {
        r.dates.push_back(prices.dates[i]);
        r.values.push_back(std::log(prices.close[i] / prices.close[i - 1]));
    }
    return r;
}

struct AlignReport {
    std::vector<Date> dropped;  // dates present in some input but not all
};

struct AlignedData {
    Dataset data;
    AlignReport report;
};

/**
 * Inner join on date: responses (r_a, r_b), covariates (gprd, gprd_a, gprd_t).
 *
 * With lag d > 0 the return dated t is paired with the risk row d rows earlier
 * in the risk series; rows without such a predecessor are dropped.
 */
inline AlignedData align(const ReturnSeries& a, const ReturnSeries& b, const RiskIndexSeries& risk, int lag = 0) {
    if (lag < 0) throw std::invalid_argument("lag must be non-negative");
    std::map<Date, std::size_t> ia, ib, ir;
    for (std::size_t i = 0; i < a.size(); ++i) ia[a.dates[i]] = i;
    for (std::size_t i = 0; i < b.size(); ++i) ib[b.dates[i]] = i;
    for (std::size_t i = 0; i < risk.size(); ++i) ir[risk.dates[i]] = i;

    std::map<Date, bool> all;
    for (const auto& [d, _] : ia) all[d] = true;
    for (const auto& [d, _] : ib) all[d] = true;
    for (const auto& [d, _] : ir) all[d] = true;

    std::vector<std::array<std::size_t, 3>> keep;
    std::vector<std::string> times;
    AlignReport rep;
    for (const auto& [d, _] : all) {
        const auto fa = ia.find(d), fb = ib.find(d), fr = ir.find(d);
        const bool joined = fa != ia.end() && fb != ib.end() && fr != ir.end() &&
                            fr->second >= static_cast<std::size_t>(lag);
        if (!joined) {
            rep.dropped.push_back(d);
            continue;
        }
        keep.push_back({fa->second, fb->second, fr->second - static_cast<std::size_t>(lag)});
        times.push_back(d.iso());
    }
    if (keep.empty()) throw AlignmentError("return and risk-index series share no dates");

    const auto n = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd y(n, 2), x(n, 3);
    for (Eigen::Index t = 0; t < n; ++t) {
        const auto& [i, j, r] = keep[t];
        y(t, 0) = a.values[i];
        y(t, 1) = b.values[j];
        x(t, 0) = risk.gprd[r];
        x(t, 1) = risk.gprd_a[r];
        x(t, 2) = risk.gprd_t[r];
    }
    return {Dataset(std::move(y), std::move(x), std::move(times)), std::move(rep)};
}

/// `date,y1..yp,x1..xk` with raw covariates.
inline void write_dataset_csv(const Dataset& data, std::ostream& out) {
    out << "date";
    for (Eigen::Index j = 0; j < data.p(); ++j) out << ",y" << j + 1;
    for (Eigen::Index j = 0; j < data.k(); ++j) out << ",x" << j + 1;
    out << '\n';
    for (Eigen::Index t = 0; t < data.n(); ++t) {
        out << (data.times().empty() ? std::to_string(t) : data.times()[t]);
        for (Eigen::Index j = 0; j < data.p(); ++j) out << ',' << format_double(data.responses()(t, j));
        for (Eigen::Index j = 0; j < data.k(); ++j) out << ',' << format_double(data.covariates()(t, j));
        out << '\n';
    }
}

inline Dataset load_dataset_csv(const std::string& path) {
    const auto table = detail::read_csv(path, {"date"});
    std::vector<std::size_t> ycols, xcols;
    for (int j = 1;; ++j) {
        const auto it = table.columns.find("y" + std::to_string(j));
        if (it == table.columns.end()) break;
        ycols.push_back(it->second);
    }
    for (int j = 1;; ++j) {
        const auto it = table.columns.find("x" + std::to_string(j));
        if (it == table.columns.end()) break;
        xcols.push_back(it->second);
    }
    if (ycols.empty() || xcols.empty()) throw ParseError(path + ": header needs columns y1.. and x1..");
    const std::size_t dc = table.columns.at("date");
    const auto n = static_cast<Eigen::Index>(table.rows.size());
    Eigen::MatrixXd y(n, static_cast<Eigen::Index>(ycols.size()));
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(xcols.size()));
    std::vector<std::string> times;
    for (Eigen::Index t = 0; t < n; ++t) {
        const auto& [line_no, fields] = table.rows[t];
        times.push_back(fields[dc]);
        auto cell = [&](std::size_t col) {
            const auto v = detail::parse_number(fields[col]);
            if (!v) throw ParseError(path + ": row " + std::to_string(line_no) + ": malformed number '" +
                                     fields[col] + "'");
            return *v;
        };
        for (std::size_t j = 0; j < ycols.size(); ++j) y(t, static_cast<Eigen::Index>(j)) = cell(ycols[j]);
        for (std::size_t j = 0; j < xcols.size(); ++j) x(t, static_cast<Eigen::Index>(j)) = cell(xcols[j]);
    }
    return Dataset(std::move(y), std::move(x), std::move(times));
}

}  // namespace npmv
