#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "ssmpc/io.hpp"
#include "ssmpc/rng.hpp"

using namespace ssmpc;

TEST_CASE("fnv1a64 matches the published test vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("to_hex renders 16 zero-padded digits") {
  CHECK(to_hex(0) == "0000000000000000");
  CHECK(to_hex(0xcbf29ce484222325ULL) == "cbf29ce484222325");
  CHECK(to_hex(1) == "0000000000000001");
}

TEST_CASE("atomic_write then read_file round-trips bytes, including overwrite") {
  const std::string path = (std::filesystem::temp_directory_path() / "ssmpc_io_test.txt").string();
  atomic_write(path, "first\nsecond\n");
  CHECK(read_file(path) == "first\nsecond\n");
  atomic_write(path, "replaced");
  CHECK(read_file(path) == "replaced");
  const auto lines = read_lines(path);
  REQUIRE(lines.size() == 1);
  CHECK(lines[0] == "replaced");
  std::filesystem::remove(path);
}

TEST_CASE("read_lines splits on newlines without inventing a trailing entry") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "ssmpc_io_lines.txt").string();
  atomic_write(path, "a\nb\nc\n");
  const auto lines = read_lines(path);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "a");
  CHECK(lines[2] == "c");
  std::filesystem::remove(path);
}

TEST_CASE("read_file on a missing path throws") {
  CHECK_THROWS(read_file("/nonexistent/definitely/missing.txt"));
}

TEST_CASE("identical seeds give identical streams; different seeds diverge") {
  Rng a(42), b(42), c(43);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const uint64_t x = a.next_u64();
    if (x != b.next_u64()) all_equal = false;
    if (x != c.next_u64()) any_diff = true;
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("derive_seed separates streams and is order-sensitive") {
  const uint64_t base = 7;
  CHECK(derive_seed(base, {1, 2}) != derive_seed(base, {2, 1}));
  CHECK(derive_seed(base, {1}) != derive_seed(base, {2}));
  CHECK(derive_seed(base, {1}) != base);
  CHECK(derive_seed(base, {1, 2}) == derive_seed(base, {1, 2}));
}

TEST_CASE("u01 stays in [0,1) and is not constant") {
  Rng rng(5);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double x = rng.u01();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  CHECK(lo < 0.1);
  CHECK(hi > 0.9);
}

TEST_CASE("uniform_int covers both endpoints inclusively") {
  Rng rng(11);
  std::set<int> seen;
  for (int i = 0; i < 1000; ++i) {
    const int x = rng.uniform_int(3, 6);
    CHECK(x >= 3);
    CHECK(x <= 6);
    seen.insert(x);
  }
  CHECK(seen.size() == 4);
}

TEST_CASE("bernoulli honors the degenerate probabilities") {
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    CHECK_FALSE(rng.bernoulli(0.0));
    CHECK(rng.bernoulli(1.0));
  }
}

TEST_CASE("shuffle produces a permutation") {
  Rng rng(17);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  rng.shuffle(v);
  std::set<int> elems(v.begin(), v.end());
  CHECK(elems.size() == 50);
  CHECK(*elems.begin() == 0);
  CHECK(*elems.rbegin() == 49);
}

TEST_CASE("weighted_index with a single live weight always picks it") {
  Rng rng(19);
  for (int i = 0; i < 100; ++i) CHECK(rng.weighted_index({0.0, 1.0, 0.0}) == 1);
}

TEST_CASE("normal draws have roughly standard moments") {
  Rng rng(23);
  double sum = 0.0, sumsq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.1);
}
