#include "doctest.h"

#include <algorithm>
#include <numeric>

#include "colonnet/tensor.hpp"

using namespace colonnet;

TEST_CASE("tensor shape and indexing") {
  Tensorf t({2, 3, 4});
  CHECK(t.rank() == 3);
  CHECK(t.size() == 24);
  CHECK(t.dim(0) == 2);
  CHECK(t.dim(2) == 4);
  t.set_zero();
  t(1, 2, 3) = 5.0f;
  // Row-major layout: last axis fastest.
  CHECK(t[1 * 12 + 2 * 4 + 3] == 5.0f);
  CHECK(shape_string(t.shape()) == "(2, 3, 4)");
}

TEST_CASE("tensor reshape preserves data") {
  Tensorf t({2, 6});
  std::iota(t.data(), t.data() + t.size(), 0.0f);
  Tensorf r = t.reshaped({3, 4});
  CHECK(r.rank() == 2);
  CHECK(r.dim(0) == 3);
  for (Eigen::Index i = 0; i < r.size(); ++i) CHECK(r[i] == static_cast<float>(i));
  CHECK_THROWS(t.reshaped({5, 2}));
}

TEST_CASE("matrix view maps the buffer") {
  Tensorf t({2, 3});
  std::iota(t.data(), t.data() + t.size(), 1.0f);
  auto m = t.matrix(2, 3);
  CHECK(m(0, 0) == 1.0f);
  CHECK(m(1, 2) == 6.0f);
  m(1, 2) = -1.0f;
  CHECK(t(1, 2) == -1.0f);
}

TEST_CASE("rng determinism and derivation") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng base(7);
  Rng s1 = base.derive(1);
  Rng s2 = base.derive(2);
  // Derived streams differ from each other and from the base.
  CHECK(s1.next_u64() != s2.next_u64());

  Rng c1(7), c2(7);
  CHECK(c1.derive(1).next_u64() == c2.derive(1).next_u64());
}

TEST_CASE("rng uniform in range") {
  Rng rng(3);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);

  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(2.0, 5.0);
    CHECK(v >= 2.0);
    CHECK(v < 5.0);
    const auto k = rng.uniform_index(7);
    CHECK(k < 7);
  }
}

TEST_CASE("rng gaussian moments") {
  Rng rng(11);
  const int n = 50000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    sum += g;
    sq += g * g;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::fabs(mean) < 0.02);
  CHECK(std::fabs(var - 1.0) < 0.03);
}

TEST_CASE("shuffle is a permutation and is deterministic") {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  std::vector<int> w = v;
  Rng r1(9), r2(9);
  shuffle(v, r1);
  shuffle(w, r2);
  CHECK(v == w);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("checksum changes with content") {
  Tensorf a({4});
  a.set_zero();
  Tensorf b = a;
  const auto ha = tensor_checksum(a);
  CHECK(ha == tensor_checksum(b));
  b[2] = 1.0f;
  CHECK(ha != tensor_checksum(b));
}

TEST_CASE("check macro throws with message") {
  CHECK_THROWS_WITH_AS(COLONNET_CHECK(false, "bad thing: ", 42),
                       doctest::Contains("bad thing: 42"), std::runtime_error);
}
