#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "deann/kernels.hpp"

using namespace deann;
using Catch::Matchers::WithinRel;

TEST_CASE("kernel_from_distance examples") {
  CHECK(kernel_from_distance(KernelSpec(KernelFamily::Gaussian, 1.0), 0.0) == 1.0);
  CHECK_THAT(kernel_from_distance(KernelSpec(KernelFamily::Exponential, 2.0), 2.0),
             WithinRel(0.367879441171442, 1e-12));
  // exp(-6) from a 50-digit evaluation.
  CHECK_THAT(kernel_from_distance(KernelSpec(KernelFamily::Gaussian, 0.5), 3.0),
             WithinRel(0.0024787521766663584, 1e-12));
}

TEST_CASE("kernel_pair examples") {
  const std::vector<float> a{0, 0}, b{3, 4}, c{1, 1}, e{2, 3};
  CHECK(kernel_pair(KernelSpec(KernelFamily::Gaussian, 1.0), a, a) == 1.0);
  CHECK_THAT(kernel_pair(KernelSpec(KernelFamily::Exponential, 1.0), a, b),
             WithinRel(std::exp(-5.0), 1e-12));
  CHECK_THAT(kernel_pair(KernelSpec(KernelFamily::Laplacian, 2.0), c, e),
             WithinRel(std::exp(-1.5), 1e-12));
  CHECK_THAT(kernel_pair(KernelSpec(KernelFamily::Gaussian, 1.0), a, b),
             WithinRel(std::exp(-12.5), 1e-12));
}

TEST_CASE("kernel argument validation") {
  CHECK_THROWS_AS(KernelSpec(KernelFamily::Gaussian, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(KernelSpec(KernelFamily::Gaussian, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(KernelSpec(KernelFamily::Gaussian, std::numeric_limits<double>::infinity()),
                  std::invalid_argument);
  CHECK_THROWS_AS(KernelSpec(KernelFamily::Gaussian, std::nan("")), std::invalid_argument);
  const KernelSpec k(KernelFamily::Exponential, 1.0);
  CHECK_THROWS_AS(kernel_from_distance(k, std::nan("")), std::invalid_argument);
  CHECK_THROWS_AS(kernel_from_distance(k, std::numeric_limits<double>::infinity()),
                  std::invalid_argument);
  CHECK_THROWS_AS(kernel_from_distance(k, -1.0), std::invalid_argument);
  const std::vector<float> x{1, 2}, y{1, 2, 3};
  CHECK_THROWS_AS(kernel_pair(k, x, y), std::invalid_argument);
}

TEST_CASE("kernel family names") {
  for (auto f : {KernelFamily::Exponential, KernelFamily::Gaussian, KernelFamily::Laplacian})
    CHECK(parse_kernel_family(to_string(f)) == f);
  CHECK(to_string(KernelFamily::Laplacian) == "laplacian");
  CHECK_THROWS_AS(parse_kernel_family("Gaussian"), std::invalid_argument);
  CHECK_THROWS_AS(parse_kernel_family("epanechnikov"), std::invalid_argument);
}

TEST_CASE("kernel values stay in [0, 1] and equal 1 only at zero distance") {
  for (auto f : {KernelFamily::Exponential, KernelFamily::Gaussian, KernelFamily::Laplacian}) {
    for (double h : {1e-3, 0.1, 1.0, 7.5, 1e3}) {
      const KernelSpec k(f, h);
      CHECK(kernel_from_distance(k, 0.0) == 1.0);
      for (double rel : {1e-6, 1e-3, 0.5, 1.0, 10.0, 1e3, 1e6}) {
        const double v = kernel_from_distance(k, rel * h);
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
      }
    }
  }
}

TEST_CASE("underflow gives exactly zero") {
  CHECK(kernel_from_distance(KernelSpec(KernelFamily::Gaussian, 1.0), 1e6) == 0.0);
  CHECK(kernel_from_distance(KernelSpec(KernelFamily::Exponential, 1.0), 1e6) == 0.0);
}

TEST_CASE("monotone in distance and in bandwidth") {
  for (auto f : {KernelFamily::Exponential, KernelFamily::Gaussian, KernelFamily::Laplacian}) {
    const KernelSpec k(f, 1.3);
    double prev = 1.0;
    for (int i = 1; i <= 200; ++i) {
      const double v = kernel_from_distance(k, 0.05 * i);
      CHECK(v < prev);
      prev = v;
    }
    for (double dist : {0.1, 1.0, 5.0}) {
      double prev_h = 0.0;
      for (double h = 0.05; h < 50; h *= 1.5) {
        const double v = kernel_from_distance(KernelSpec(f, h), dist);
        CHECK(v >= prev_h);
        prev_h = v;
      }
    }
  }
}

TEST_CASE("exponential bandwidth scaling is exact") {
  const KernelSpec one(KernelFamily::Exponential, 1.0);
  for (double h : {0.1, 0.3, 1.7, 3.0, 123.456})
    for (double dist : {0.0, 0.01, 0.77, 2.5, 40.0}) {
      const KernelSpec k(KernelFamily::Exponential, h);
      CHECK(kernel_from_distance(k, dist) == kernel_from_distance(one, dist / h));
    }
}

TEST_CASE("from_sqdist agrees with the family metric") {
  const std::vector<float> x{0.5f, -1.0f, 2.0f}, y{1.5f, 1.0f, -0.25f};
  for (auto f : {KernelFamily::Exponential, KernelFamily::Gaussian}) {
    const KernelSpec k(f, 0.8);
    double sq = 0;
    for (int i = 0; i < 3; ++i) sq += (double(x[i]) - y[i]) * (double(x[i]) - y[i]);
    CHECK_THAT(k.from_sqdist(sq), WithinRel(kernel_pair(k, x, y), 1e-14));
  }
  CHECK(kernel_distance(KernelSpec(KernelFamily::Laplacian, 1.0), x, y) == 1.0 + 2.0 + 2.25);
}
