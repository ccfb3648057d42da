#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include <illiquid_eq/io.hpp>
#include <illiquid_eq/svg.hpp>

using namespace illiquid_eq;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "illiquid_eq_io";
  std::filesystem::create_directories(dir);
  return dir / name;
}

EquilibriumSolution small_solution() {
  const auto beliefs = BeliefSet::constant_coefficients({0.1, -0.1}, {0.2, 0.3});
  const MarketSpec spec{CostKernel(0.5, 0.5, 1.0), 1.0, {0.6, 0.4}, [](double x) { return x; }};
  return solve_equilibrium(spec, beliefs, Grid1D{-1.0, 3.0, 9, 5});
}

}  // namespace

TEST(Io, NumberFormatting) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1.0), "1");
  EXPECT_EQ(format_number(-2.5e-8), "-2.5e-08");
  EXPECT_EQ(format_fixed(1.23456, 3), "1.235");
  EXPECT_EQ(std::stod(format_number(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Io, CsvQuotingAndLineEnds) {
  const auto p = scratch("quote.csv");
  {
    CsvWriter w(p);
    w.row(std::vector<std::string>{"a", "b,c", "say \"hi\""});
    w.row(std::vector<double>{1.5, -2.0});
  }
  EXPECT_EQ(slurp(p), "a,\"b,c\",\"say \"\"hi\"\"\"\r\n1.5,-2\r\n");
  EXPECT_THROW(CsvWriter("/nonexistent/dir/x.csv"), InputError);
}

TEST(Io, SolutionCsvLayout) {
  const auto sol = small_solution();
  const auto p = scratch("solution.csv");
  write_solution_csv(p, sol);
  std::istringstream in(slurp(p));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,x,v,v1,v2,dv_dx\r");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 9u * 5u);
}

TEST(Io, CacheRoundTrip) {
  auto sol = small_solution();
  sol.spec_hash = 0xabcdefULL;
  const auto p = scratch("solution.cache");
  write_cache(p, sol);
  const auto back = read_cache(p, 0xabcdefULL);
  EXPECT_EQ(back.grid.nx, sol.grid.nx);
  EXPECT_EQ(back.v.data(), sol.v.data());
  EXPECT_EQ(back.vi.size(), 2u);
  EXPECT_EQ(back.vi[1].data(), sol.vi[1].data());
  EXPECT_EQ(back.dv_dx.data(), sol.dv_dx.data());
  EXPECT_EQ(back.gamma, 0.5);
  EXPECT_EQ(back.supply, 1.0);
  EXPECT_THROW(read_cache(p, 1), InputError);
  {
    std::ofstream f(p, std::ios::binary);
    f << "garbage";
  }
  EXPECT_THROW(read_cache(p, 0xabcdefULL), InputError);
  EXPECT_THROW(read_cache(scratch("missing.cache"), 0), InputError);
}

TEST(Svg, RendersSeriesAndLegend) {
  Plot p;
  p.title = "Prices & <volatility>";
  p.x_label = "t";
  p.y_label = "v";
  p.series.push_back({"first", {0.0, 1.0, 2.0}, {1.0, 1.1, 1.2}, "", "#000000"});
  p.series.push_back({"second", {0.0, 2.0}, {1.0, 1.3}, "4 2", "#ff0000"});
  const std::string svg = render_svg(p);
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("version=\"1.1\""), std::string::npos);
  EXPECT_NE(svg.find("Prices &amp; &lt;volatility&gt;"), std::string::npos);
  EXPECT_NE(svg.find("stroke-dasharray=\"4 2\""), std::string::npos);
  EXPECT_NE(svg.find(">first<"), std::string::npos);
  EXPECT_NE(svg.find(">second<"), std::string::npos);
  EXPECT_NE(svg.find("1.00"), std::string::npos);
  EXPECT_EQ(render_svg(p), svg);
}

TEST(Svg, SmallRangesAreScaled) {
  Plot p;
  p.series.push_back({"err", {0.0, 1.0}, {0.0, 3e-5}, "", "#000000"});
  EXPECT_NE(render_svg(p).find("1e-5"), std::string::npos);
}
