#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "acl/error.hpp"
#include "acl/numerics.hpp"
#include "acl/rng.hpp"

using namespace acl;

TEST_CASE("l2_normalize produces unit vectors and rejects zero") {
  Vector v{3.0, 4.0};
  Vector u = num::l2_normalize(v);
  CHECK(u[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(u[1] == doctest::Approx(0.8).epsilon(1e-15));

  Vector z{0.0, 0.0, 0.0};
  CHECK_THROWS_AS(num::l2_normalize(z), AclError);
  try {
    num::l2_normalize(z);
  } catch (const AclError& e) {
    CHECK(e.kind() == Err::ZeroVector);
  }
}

TEST_CASE("cosine_sim is clamped and symmetric") {
  Rng rng(11);
  for (int c = 0; c < 200; ++c) {
    Vector a(5), b(5);
    for (double& x : a) x = rng.next_range(-2.0, 2.0);
    for (double& x : b) x = rng.next_range(-2.0, 2.0);
    if (num::l2_norm(a) < 1e-6 || num::l2_norm(b) < 1e-6) continue;
    double s = num::cosine_sim(a, b);
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
    CHECK(num::cosine_sim(b, a) == doctest::Approx(s).epsilon(1e-15));
  }
  Vector a{1.0, 0.0};
  CHECK(num::cosine_sim(a, a) == 1.0);
  Vector na{-2.0, 0.0};
  CHECK(num::cosine_sim(a, na) == -1.0);
}

TEST_CASE("stable_arccos matches std::acos inside the domain") {
  Rng rng(7);
  for (int c = 0; c < 500; ++c) {
    double u = rng.next_range(-0.999, 0.999);
    CHECK(num::stable_arccos(u) == doctest::Approx(std::acos(u)).epsilon(1e-14));
  }
  CHECK(num::stable_arccos(1.0) == 0.0);
  CHECK(num::stable_arccos(-1.0) == doctest::Approx(num::kPi).epsilon(1e-15));
  CHECK(num::stable_arccos(1.0 + 1e-9) == 0.0);
  CHECK(num::stable_arccos(-1.0 - 1e-9) == doctest::Approx(num::kPi).epsilon(1e-15));
}

TEST_CASE("log_sum_exp is shift invariant and handles extremes") {
  Vector v{1.0, 2.0, 3.0};
  double base = num::log_sum_exp(v);
  CHECK(base == doctest::Approx(std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)))
                    .epsilon(1e-15));
  Vector shifted{1001.0, 1002.0, 1003.0};
  CHECK(num::log_sum_exp(shifted) == doctest::Approx(base + 1000.0).epsilon(1e-12));
  Vector single{-745.0};
  CHECK(num::log_sum_exp(single) == doctest::Approx(-745.0).epsilon(1e-12));
  Vector empty;
  CHECK_THROWS_AS(num::log_sum_exp(empty), AclError);
}

TEST_CASE("matmul agrees with manual triple loop") {
  Rng rng(3);
  Matrix a(3, 4), b(4, 2);
  for (double& x : a.data) x = rng.next_range(-1.0, 1.0);
  for (double& x : b.data) x = rng.next_range(-1.0, 1.0);
  Matrix c = num::matmul(a, b);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += a.at(i, k) * b.at(k, j);
      CHECK(c.at(i, j) == doctest::Approx(s).epsilon(1e-14));
    }
  }

  Matrix atb = num::matmul_at_b(a, a);   // 4x4 gram
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += a.at(k, i) * a.at(k, j);
      CHECK(atb.at(i, j) == doctest::Approx(s).epsilon(1e-14));
    }
  }

  Matrix abt = num::matmul_a_bt(a, a);   // 3x3 gram
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += a.at(i, k) * a.at(j, k);
      CHECK(abt.at(i, j) == doctest::Approx(s).epsilon(1e-14));
    }
  }

  Matrix bad(5, 5);
  CHECK_THROWS_AS(num::matmul(a, bad), AclError);
}

TEST_CASE("col_sums and add_row_inplace") {
  Matrix m(2, 3);
  m.data = {1, 2, 3, 4, 5, 6};
  Vector cs = num::col_sums(m);
  CHECK(cs == Vector{5, 7, 9});
  Vector row{10, 20, 30};
  num::add_row_inplace(m, row);
  CHECK(m.at(0, 0) == 11.0);
  CHECK(m.at(1, 2) == 36.0);
}

TEST_CASE("all_finite flags nan and inf") {
  Vector good{1.0, -2.0, 0.0};
  CHECK(num::all_finite(good));
  Vector bad{1.0, std::nan(""), 0.0};
  CHECK_FALSE(num::all_finite(bad));
  CHECK_THROWS_AS(num::require_finite(bad, "ctx"), AclError);
}

TEST_CASE("rng streams are deterministic and split-independent") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  // A split stream does not disturb or depend on the parent's position.
  Rng parent(7);
  Rng s1 = parent.split(1);
  (void)parent.next_u64();
  Rng s1_again = Rng(7).split(1);
  for (int i = 0; i < 50; ++i) CHECK(s1.next_u64() == s1_again.next_u64());

  // Distinct tags give distinct streams.
  Rng x = Rng(9).split(1);
  Rng y = Rng(9).split(2);
  bool differ = false;
  for (int i = 0; i < 10; ++i) differ |= (x.next_u64() != y.next_u64());
  CHECK(differ);
}

TEST_CASE("rng next_below is in range and next_unit in [0,1)") {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    CHECK(rng.next_below(7) < 7);
    double u = rng.next_unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CHECK(rng.next_below(1) == 0);
}

TEST_CASE("rng gaussian has sane moments") {
  Rng rng(123);
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double g = rng.next_gaussian();
    sum += g;
    sq += g * g;
  }
  double mean = sum / n;
  double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(var - 1.0) < 0.05);
}
