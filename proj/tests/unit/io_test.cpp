#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "hjb/config.hpp"
#include "hjb/csv.hpp"
#include "hjb/errors.hpp"

using namespace hjb;

TEST(FlatConfig, ParsesScalars) {
    const FlatConfig c = FlatConfig::parse("p: 0.0005\nseed: 42\nmodel: heston\neps: 1e-8\n");
    EXPECT_EQ(c.get_double("p"), 0.0005);
    EXPECT_EQ(c.get_int("seed"), 42);
    EXPECT_EQ(c.get_string("model", "x"), "heston");
    EXPECT_EQ(c.get_double("eps"), 1e-8);
    EXPECT_EQ(c.get_double("absent", 2.5), 2.5);
    EXPECT_EQ(c.get_int("absent", 7), 7);
}

TEST(FlatConfig, Errors) {
    EXPECT_THROW(FlatConfig::parse("a: [1, 2]\n"), ConfigError);
    EXPECT_THROW(FlatConfig::parse("- 1\n- 2\n"), ConfigError);
    EXPECT_THROW(FlatConfig::parse("a: {b: 1}\n"), ConfigError);
    EXPECT_THROW(FlatConfig::parse("a: [1,\n"), ConfigError);
    const FlatConfig c = FlatConfig::parse("a: abc\nb: 1.5\n");
    EXPECT_THROW(c.get_double("a"), ConfigError);
    EXPECT_THROW(c.get_int("b"), ConfigError);
    EXPECT_THROW(c.get_double("missing"), ConfigError);
    EXPECT_THROW(c.require_known({"a"}), ConfigError);
    EXPECT_NO_THROW(c.require_known({"a", "b"}));
    EXPECT_THROW(FlatConfig::load("/nonexistent/config.yaml"), ConfigError);
}

TEST(FlatConfig, EmptyDocument) { EXPECT_TRUE(FlatConfig::parse("").entries().empty()); }

TEST(FlatConfig, BundledFilesLoad) {
    for (const char* f : {"heston_p0005.yaml", "heston_p05.yaml", "constant.yaml"}) {
        const FlatConfig c = FlatConfig::load(std::filesystem::path(HJB_CONFIG_DIR) / f);
        EXPECT_TRUE(c.has("p")) << f;
        EXPECT_TRUE(c.has("max_outer_steps")) << f;
    }
}

TEST(Csv, SeventeenDigitsRoundTrip) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int k = 0; k < 1000; ++k) {
        const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
        EXPECT_EQ(parse_double(format_double(v)), v);
    }
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
    EXPECT_EQ(format_double(1.0), "1");
    EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
    EXPECT_TRUE(std::isnan(parse_double(format_double(std::nan("")))));
    EXPECT_THROW(parse_double("1,5"), Error);
    EXPECT_THROW(parse_double(""), Error);
}

TEST(Csv, WriteReadTable) {
    const auto path = std::filesystem::temp_directory_path() / "hjb_csv_test.csv";
    CsvTable t;
    t.header = {"y1", "y2", "u"};
    t.add_row({0.0, 0.25, 1.0000000000000002});
    t.add_row({0.5, 0.5, -3e-300});
    t.write(path);
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    EXPECT_EQ(first, "y1,y2,u");
    const CsvTable back = CsvTable::read(path);
    ASSERT_EQ(back.rows.size(), 2u);
    EXPECT_EQ(back.value(0, back.column("u")), 1.0000000000000002);
    EXPECT_EQ(back.value(1, 2), -3e-300);
    EXPECT_THROW(back.column("pi"), Error);
    std::filesystem::remove(path);
}

TEST(Csv, RejectsRaggedRows) {
    const auto path = std::filesystem::temp_directory_path() / "hjb_csv_ragged.csv";
    {
        std::ofstream out(path);
        out << "a,b\n1,2\n3\n";
    }
    EXPECT_THROW(CsvTable::read(path), Error);
    std::filesystem::remove(path);
}
