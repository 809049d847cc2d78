#include "moranfilt/errors.hpp"
#include "moranfilt/io.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <sstream>

using namespace moranfilt;

TEST_CASE("plain table") {
  std::istringstream in("x_coord,y_coord,y\n0.5,1,2.25\n-3e-2,4,5\n");
  const io::CsvTable t = io::read_csv(in);
  CHECK(t.header == std::vector<std::string>{"x_coord", "y_coord", "y"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.column("y") == 2);
  const VectorXd x = t.numeric_column("x_coord");
  CHECK(x[0] == 0.5);
  CHECK(x[1] == -0.03);
  CHECK(t.numeric_column("y")[0] == 2.25);
}

TEST_CASE("byte order mark, CRLF, blank lines and padding") {
  std::istringstream in("\xEF\xBB\xBF" "a, \"b\"\r\n1 ,2\r\n\r\n  \n3,4\r\n");
  const io::CsvTable t = io::read_csv(in);
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.numeric_column("a")[0] == 1.0);
  CHECK(t.numeric_column("b")[1] == 4.0);
}

TEST_CASE("malformed input") {
  std::istringstream empty("");
  CHECK_THROWS_AS(io::read_csv(empty), InvalidArgument);
  std::istringstream ragged("a,b\n1,2\n3\n");
  CHECK_THROWS_AS(io::read_csv(ragged), InvalidArgument);
  std::istringstream trailing("a,b\n1,2,\n");
  CHECK_THROWS_AS(io::read_csv(trailing), InvalidArgument);
  std::istringstream text("a\n1\nabc\n");
  const io::CsvTable t = io::read_csv(text);
  CHECK_THROWS_AS(t.numeric_column("a"), InvalidArgument);
  CHECK_THROWS_AS(t.numeric_column("missing"), InvalidArgument);
  for (const char* cell : {"nan", "inf", "1.5x", "", "1,5"}) {
    io::CsvTable one;
    one.header = {"v"};
    one.rows = {{cell}};
    CHECK_THROWS_AS(one.numeric_column("v"), InvalidArgument);
  }
  CHECK_THROWS_AS(io::read_csv_file("/nonexistent/path/file.csv"), InvalidArgument);
}

TEST_CASE("format_double round trips exactly") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double v = u(rng) * std::pow(10.0, (i % 41) - 20);
    const std::string s = io::format_double(v);
    CHECK(std::stod(s) == v);
  }
  CHECK(io::format_double(0.1) == "0.10000000000000001");
  CHECK(io::format_double(1.0) == "1");
  CHECK(io::format_double(-2.5) == "-2.5");
  const std::string tiny = io::format_double(std::numeric_limits<double>::denorm_min());
  CHECK(std::strtod(tiny.c_str(), nullptr) == std::numeric_limits<double>::denorm_min());
}

TEST_CASE("matrix writer output reads back") {
  MatrixXd m(2, 3);
  m << 1.0, 0.1, -3.0, 1e-300, 2.0, 1e300;
  std::ostringstream out;
  io::write_matrix_csv(out, {"a", "b", "c"}, m);
  CHECK(out.str().substr(0, 6) == "a,b,c\n");
  std::istringstream in(out.str());
  const io::CsvTable t = io::read_csv(in);
  REQUIRE(t.rows.size() == 2);
  for (Index j = 0; j < 3; ++j) {
    const VectorXd col = t.numeric_column(t.header[static_cast<std::size_t>(j)]);
    CHECK(col == m.col(j));
  }
}
