#include <cmath>

#include "doctest.h"
#include "opcert/core/error.hpp"
#include "opcert/core/grid.hpp"
#include "opcert/core/parallel.hpp"
#include "opcert/core/rng.hpp"
#include "opcert/core/tensor.hpp"

using namespace opcert;

TEST_CASE("tensor keeps data length equal to shape product") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.at({1, 2}) == 1.5);
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), Error);
  CHECK_THROWS_AS(Tensor(Shape{2, 0}), Error);
  CHECK_THROWS_AS(t.reshaped({4}), Error);
  CHECK(t.reshaped({3, 2}).shape() == Shape{3, 2});
}

TEST_CASE("elementwise ops require identical shapes") {
  Tensor a({2, 2}, 1.0), b({4}, 1.0);
  CHECK_THROWS_AS(a + b, Error);
  CHECK_THROWS_AS(a * b, Error);
  try {
    a += b;
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::shape_mismatch);
  }
}

TEST_CASE("add and mul are commutative and associative on random tensors") {
  SeededRng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.index(40);
    Tensor a = gaussian_draws(rng, n), b = gaussian_draws(rng, n), c = gaussian_draws(rng, n);
    CHECK(max_abs_diff(a + b, b + a) <= 1e-12);
    CHECK(max_abs_diff(a * b, b * a) <= 1e-12);
    CHECK(max_abs_diff((a + b) + c, a + (b + c)) <= 1e-12);
    CHECK(max_abs_diff((a * b) * c, a * (b * c)) <= 1e-12);
  }
}

TEST_CASE("normalized coordinates") {
  SUBCASE("1D resolution 3") {
    Tensor c = normalized_coordinates(GridSpec::line(3));
    CHECK(c.shape() == Shape{3, 1});
    CHECK(c[0] == 0.0);
    CHECK(c[1] == 0.5);
    CHECK(c[2] == 1.0);
  }
  SUBCASE("2D corners") {
    Tensor c = normalized_coordinates(GridSpec::square(2));
    const std::vector<double> expected = {0, 0, 0, 1, 1, 0, 1, 1};
    CHECK(c.values() == expected);
  }
  SUBCASE("1D resolution 1024 matches linspace") {
    Tensor c = normalized_coordinates(GridSpec::line(1024));
    CHECK(c.dim(0) == 1024);
    for (std::size_t i = 0; i < 1024; ++i) CHECK(c[i] == doctest::Approx(i / 1023.0).epsilon(1e-15));
    for (std::size_t i = 1; i < 1024; ++i) CHECK(c[i] > c[i - 1]);
  }
  SUBCASE("periodic grids exclude the right end") {
    Tensor c = normalized_coordinates(GridSpec::line(4, true));
    CHECK(c.values() == std::vector<double>{0.0, 0.25, 0.5, 0.75});
  }
  SUBCASE("reproducible bit-exactly") {
    CHECK(normalized_coordinates(GridSpec::square(17)) == normalized_coordinates(GridSpec::square(17)));
  }
  SUBCASE("resolution below 2 is rejected") {
    try {
      normalized_coordinates(GridSpec::line(1));
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::invalid_grid);
    }
  }
}

TEST_CASE("gaussian draws") {
  SUBCASE("moments at seed 7") {
    SeededRng rng(7);
    Tensor d = gaussian_draws(rng, 100000);
    double mean = sum(d) / d.size();
    double var = 0.0;
    for (double v : d.data()) var += (v - mean) * (v - mean);
    var /= d.size();
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.02);
  }
  SUBCASE("same seed and stream reproduce") {
    SeededRng a(42, 3), b(42, 3);
    CHECK(gaussian_draws(a, 1000) == gaussian_draws(b, 1000));
  }
  SUBCASE("different streams differ in the first 16 draws") {
    SeededRng a(42, 0), b(42, 1);
    Tensor x = gaussian_draws(a, 16), y = gaussian_draws(b, 16);
    for (std::size_t i = 0; i < 16; ++i) CHECK(x[i] != y[i]);
  }
  SUBCASE("derived streams are distinct from their parent") {
    SeededRng parent(5, 9);
    SeededRng c0 = parent.derive(0), c1 = parent.derive(1);
    CHECK(c0.next_u64() != c1.next_u64());
    CHECK(SeededRng(5, 9).next_u64() != parent.derive(0).next_u64());
  }
}

TEST_CASE("parallel_for result does not depend on worker count") {
  std::vector<double> serial(64), threaded(64);
  auto job = [](std::vector<double>& out) {
    return [&out](std::size_t i) {
      SeededRng rng(99, i);
      out[i] = rng.normal();
    };
  };
  parallel_for(64, 1, job(serial));
  parallel_for(64, 4, job(threaded));
  CHECK(serial == threaded);
  CHECK_THROWS_AS(parallel_for(8, 2, [](std::size_t i) {
                    if (i == 3) fail(ErrorCode::numerical, "boom");
                  }),
                  Error);
}
