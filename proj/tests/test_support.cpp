#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "mmaccel/csv.hpp"
#include "mmaccel/parallel.hpp"
#include "mmaccel/random.hpp"

using namespace mmaccel;

TEST_CASE("random stream is reproducible and children are independent of parent position") {
  RandomStream a(42), b(42);
  for (int i = 0; i < 10; ++i) CHECK(a() == b());
  RandomStream c(42);
  const auto child_before = c.child(3);
  c();
  const auto child_after = c.child(3);
  CHECK(child_before.key() != child_after.key());
  CHECK(RandomStream(42).child(3).key() == RandomStream(42).child(3).key());
  CHECK(RandomStream(42).child(3).key() != RandomStream(42).child(4).key());
}

TEST_CASE("uniform and normal draws have the right moments") {
  RandomStream rng(7);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    su += u;
  }
  std::vector<double> z(n);
  rng.normals(z);
  for (double v : z) {
    sn += v;
    sn2 += v * v;
  }
  CHECK(std::abs(su / n - 0.5) < 5 * std::sqrt(1.0 / 12 / n));
  CHECK(std::abs(sn / n) < 5 / std::sqrt(double(n)));
  CHECK(std::abs(sn2 / n - 1.0) < 5 * std::sqrt(2.0 / n));
}

TEST_CASE("csv formatting round-trips doubles and quotes fields") {
  const double v = 0.1 + 0.2;
  CHECK(std::stod(csv::format(v)) == v);
  CHECK(csv::escape("plain") == "plain");
  CHECK(csv::escape("a,b") == "\"a,b\"");
  CHECK(csv::escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  const auto fields = csv::split_row("1,\"a,b\",\"x\"\"y\"");
  REQUIRE(fields.size() == 3);
  CHECK(fields[1] == "a,b");
  CHECK(fields[2] == "x\"y");

  std::stringstream ss;
  csv::write_row(ss, std::vector<std::string>{"t", "v"});
  csv::write_row(ss, std::vector<double>{1.0 / 3.0, -2.5e-300});
  const auto table = csv::read_numeric(ss);
  CHECK(table.header == std::vector<std::string>{"t", "v"});
  REQUIRE(table.rows.size() == 1);
  CHECK(table.rows[0][0] == 1.0 / 3.0);
  CHECK(table.rows[0][1] == -2.5e-300);
}

TEST_CASE("csv reader reports malformed rows") {
  std::stringstream ss("a,b\n1,2\n3\n");
  CHECK_THROWS_AS(csv::read_numeric(ss), std::runtime_error);
}

TEST_CASE("parallel_for covers every index once and propagates exceptions") {
  const std::size_t saved = thread_count();
  for (std::size_t threads : {1u, 3u}) {
    set_thread_count(threads);
    std::vector<int> hits(10007, 0);
    parallel_for(hits.size(), 97, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) ++hits[i];
    });
    CHECK(std::set<int>(hits.begin(), hits.end()) == std::set<int>{1});
    CHECK_THROWS_AS(parallel_for(100, 10,
                                 [](std::size_t b, std::size_t) {
                                   if (b == 50) throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
  }
  set_thread_count(saved);
}

TEST_CASE("chunked_sum does not depend on the thread count") {
  const std::size_t saved = thread_count();
  auto run = [] {
    return chunked_sum(50000, 2, [](std::size_t b, std::size_t e, double* acc) {
      for (std::size_t i = b; i < e; ++i) {
        acc[0] += 1.0 / (1.0 + double(i));
        acc[1] += std::sin(double(i));
      }
    });
  };
  set_thread_count(1);
  const auto one = run();
  set_thread_count(4);
  const auto four = run();
  set_thread_count(saved);
  CHECK(one == four);
}
