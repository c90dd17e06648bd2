#include "npmv/dataio.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace npmv;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        path_ = fs::temp_directory_path() / (std::string("npmv_dataio_") + info->name());
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }

    std::string write(const std::string& name, const std::string& content) const {
        const fs::path p = path_ / name;
        std::ofstream(p) << content;
        return p.string();
    }

private:
    fs::path path_;
};

Date day(int y, int m, int d) { return Date{y, m, d}; }

ReturnSeries returns(std::vector<Date> dates, std::vector<double> values) {
    return ReturnSeries{std::move(dates), std::move(values)};
}

RiskIndexSeries risk_rows(const std::vector<Date>& dates) {
    RiskIndexSeries r;
    r.dates = dates;
    for (std::size_t i = 0; i < dates.size(); ++i) {
        r.gprd.push_back(100.0 + static_cast<double>(i));
        r.gprd_a.push_back(50.0 + 2.0 * static_cast<double>(i));
        r.gprd_t.push_back(80.0 - static_cast<double>(i * i));
    }
    return r;
}

}  // namespace

TEST(Dates, ParseAndWeekday) {
    const auto d = parse_date("2021-04-01");
    ASSERT_TRUE(d);
    EXPECT_EQ(*d, day(2021, 4, 1));
    EXPECT_EQ(d->weekday(), 3);  // Thursday
    EXPECT_EQ(day(2024, 2, 29).iso(), "2024-02-29");
    EXPECT_FALSE(parse_date("2023-02-29"));
    EXPECT_FALSE(parse_date("2021-13-01"));
    EXPECT_FALSE(parse_date("2021/04/01"));
    EXPECT_EQ(day(2021, 4, 5).week_key(), day(2021, 4, 11).week_key());
    EXPECT_NE(day(2021, 4, 4).week_key(), day(2021, 4, 5).week_key());
}

TEST(LoadPrices, TwoRows) {
    TempDir dir;
    const auto s = load_price_csv(dir.write("p.csv", "date,close\n2021-04-01,100.0\n2021-04-02,105.0\n"));
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s.dates[1], day(2021, 4, 2));
    EXPECT_EQ(s.close[1], 105.0);
}

TEST(LoadPrices, SortsAndAcceptsReorderedColumns) {
    TempDir dir;
    const auto s =
        load_price_csv(dir.write("p.csv", "Close,Date\n101,2021-04-03\n100,2021-04-01\n\n102,2021-04-02\n"));
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s.dates[0], day(2021, 4, 1));
    EXPECT_EQ(s.close, (std::vector<double>{100, 102, 101}));
}

TEST(LoadPrices, NegativeCloseNamesTheRow) {
    TempDir dir;
    const auto path = dir.write("p.csv", "date,close\n2021-04-01,100\n2021-04-02,-1\n");
    try {
        load_price_csv(path);
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
        EXPECT_EQ(e.category(), "parse");
    }
}

TEST(LoadPrices, MalformedInputs) {
    TempDir dir;
    EXPECT_THROW(load_price_csv(dir.write("a.csv", "")), ParseError);
    EXPECT_THROW(load_price_csv(dir.write("b.csv", "date,close\n")), ParseError);
    EXPECT_THROW(load_price_csv(dir.write("c.csv", "date,price\n2021-04-01,1\n")), ParseError);
    EXPECT_THROW(load_price_csv(dir.write("d.csv", "date,close\n2021-04-01\n")), ParseError);
    EXPECT_THROW(load_price_csv(dir.write("e.csv", "date,close\n2021-04-01,abc\n")), ParseError);
    EXPECT_THROW(load_price_csv(dir.write("f.csv", "date,close\n2021-04-01,\n")), ParseError);
    EXPECT_THROW(load_price_csv(dir.write("g.csv", "date,close\n01/04/2021,5\n")), ParseError);
    EXPECT_THROW(load_price_csv(dir.write("h.csv", "date,close\n2021-04-01,5\n2021-04-01,6\n")), ParseError);
    EXPECT_THROW(load_price_csv((fs::temp_directory_path() / "npmv_missing_file.csv").string()), ParseError);
}

TEST(LoadRisk, ParsesAndRejectsNegatives) {
    TempDir dir;
    const auto r = load_risk_csv(
        dir.write("r.csv", "date,gprd,gprd_a,gprd_t\n2021-04-02,1,2,3\n2021-04-01,4,5,6\n"));
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r.gprd, (std::vector<double>{4, 1}));
    EXPECT_EQ(r.gprd_t, (std::vector<double>{6, 3}));
    EXPECT_THROW(load_risk_csv(dir.write("n.csv", "date,gprd,gprd_a,gprd_t\n2021-04-01,1,-2,3\n")), ParseError);
}

TEST(LogReturns, Examples) {
    PriceSeries p{{day(2021, 4, 1), day(2021, 4, 2)}, {100.0, 105.0}};
    const auto r = log_returns(p);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_NEAR(r.values[0], 0.048790, 1e-6);
    EXPECT_EQ(r.dates[0], day(2021, 4, 2));

    p.close = {100.0, 50.0};
    EXPECT_NEAR(log_returns(p).values[0], -0.693147, 1e-6);

    PriceSeries flat{{day(2021, 4, 1), day(2021, 4, 2), day(2021, 4, 5)}, {7.0, 7.0, 7.0}};
    for (const double v : log_returns(flat).values) EXPECT_EQ(v, 0.0);

    PriceSeries one{{day(2021, 4, 1)}, {1.0}};
    EXPECT_THROW(log_returns(one), std::invalid_argument);
}

TEST(LogReturns, GeometricRampIsConstant) {
    PriceSeries p;
    const double g = 1.003;
    for (int t = 0; t < 200; ++t) {
        p.dates.push_back(Date{2020, 1 + t / 28, 1 + t % 28});
        p.close.push_back(42.0 * std::pow(g, t));
    }
    for (const double v : log_returns(p).values) EXPECT_NEAR(v, std::log(g), 1e-12);
}

TEST(Align, IdenticalDates) {
    const std::vector<Date> d{day(2021, 4, 1), day(2021, 4, 2), day(2021, 4, 5)};
    const auto out = align(returns(d, {0.1, 0.2, 0.3}), returns(d, {-0.1, -0.2, -0.3}), risk_rows(d));
    EXPECT_EQ(out.data.n(), 3);
    EXPECT_EQ(out.data.p(), 2);
    EXPECT_EQ(out.data.k(), 3);
    EXPECT_TRUE(out.report.dropped.empty());
    EXPECT_EQ(out.data.responses()(2, 1), -0.3);
    EXPECT_EQ(out.data.covariates()(1, 0), 101.0);
    EXPECT_EQ(out.data.times()[2], "2021-04-05");
    // Dataset invariants: standardized covariates have mean 0
    EXPECT_NEAR(out.data.standardized().col(0).mean(), 0.0, 1e-12);
}

TEST(Align, WeekendRowIsDroppedAndReported) {
    const std::vector<Date> trading{day(2021, 4, 1), day(2021, 4, 2), day(2021, 4, 5)};
    const std::vector<Date> calendar{day(2021, 4, 1), day(2021, 4, 2), day(2021, 4, 3), day(2021, 4, 5)};
    const auto out = align(returns(trading, {1, 2, 3}), returns(trading, {4, 5, 6}), risk_rows(calendar));
    EXPECT_EQ(out.data.n(), 3);
    ASSERT_EQ(out.report.dropped.size(), 1u);
    EXPECT_EQ(out.report.dropped[0], day(2021, 4, 3));
    EXPECT_EQ(out.data.covariates()(2, 0), 103.0);
}

TEST(Align, DisjointRangesFail) {
    const std::vector<Date> a{day(2021, 4, 1), day(2021, 4, 2)};
    const std::vector<Date> b{day(2022, 4, 1), day(2022, 4, 2)};
    try {
        align(returns(a, {1, 2}), returns(a, {1, 2}), risk_rows(b));
        FAIL() << "expected an alignment error";
    } catch (const AlignmentError& e) {
        EXPECT_EQ(e.category(), "alignment");
    }
}

TEST(Align, LagPairsWithEarlierRiskRow) {
    const std::vector<Date> d{day(2021, 4, 1), day(2021, 4, 2), day(2021, 4, 5), day(2021, 4, 6)};
    const auto out = align(returns(d, {1, 2, 3, 4}), returns(d, {5, 6, 7, 8}), risk_rows(d), 1);
    EXPECT_EQ(out.data.n(), 3);
    ASSERT_EQ(out.report.dropped.size(), 1u);
    EXPECT_EQ(out.report.dropped[0], day(2021, 4, 1));
    EXPECT_EQ(out.data.responses()(0, 0), 2.0);
    EXPECT_EQ(out.data.covariates()(0, 0), 100.0);
    EXPECT_THROW(align(returns(d, {1, 2, 3, 4}), returns(d, {5, 6, 7, 8}), risk_rows(d), -1),
                 std::invalid_argument);
}

TEST(RoundTrip, PriceSeries) {
    TempDir dir;
    PriceSeries p{{day(2021, 4, 1), day(2021, 4, 2), day(2021, 4, 6)}, {100.1, 0.1 + 0.2, 1e-300}};
    std::ostringstream os;
    write_price_csv(p, os);
    const auto back = load_price_csv(dir.write("p.csv", os.str()));
    EXPECT_EQ(back.dates, p.dates);
    EXPECT_EQ(back.close, p.close);
}

TEST(RoundTrip, RiskSeries) {
    TempDir dir;
    const auto r = risk_rows({day(2021, 4, 1), day(2021, 4, 2)});
    std::ostringstream os;
    write_risk_csv(r, os);
    const auto back = load_risk_csv(dir.write("r.csv", os.str()));
    EXPECT_EQ(back.dates, r.dates);
    EXPECT_EQ(back.gprd, r.gprd);
    EXPECT_EQ(back.gprd_a, r.gprd_a);
    EXPECT_EQ(back.gprd_t, r.gprd_t);
}

TEST(RoundTrip, Dataset) {
    TempDir dir;
    const std::vector<Date> d{day(2021, 4, 1), day(2021, 4, 2), day(2021, 4, 5)};
    const auto aligned = align(returns(d, {0.01, -0.02, 0.003}), returns(d, {0.5, 0.25, 1.0 / 3}), risk_rows(d));
    std::ostringstream os;
    write_dataset_csv(aligned.data, os);
    const Dataset back = load_dataset_csv(dir.write("d.csv", os.str()));
    EXPECT_EQ(back.responses(), aligned.data.responses());
    EXPECT_EQ(back.covariates(), aligned.data.covariates());
    EXPECT_EQ(back.times(), aligned.data.times());
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "date,y1,y2,x1,x2,x3");
}

TEST(LoadDataset, RequiresResponseAndCovariateColumns) {
    TempDir dir;
    EXPECT_THROW(load_dataset_csv(dir.write("d.csv", "date,y1\n1,2\n")), ParseError);
    EXPECT_THROW(load_dataset_csv(dir.write("e.csv", "date,y1,x1\n1,2,z\n")), ParseError);
}

TEST(Inputs, LoadingDoesNotModifyFiles) {
    TempDir dir;
    const std::string content = "date,close\n2021-04-02,2\n2021-04-01,1\n";
    const auto path = dir.write("p.csv", content);
    load_price_csv(path);
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_EQ(ss.str(), content);
}
