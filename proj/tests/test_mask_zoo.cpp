#include "doctest.h"

#include <filesystem>
#include <numeric>
#include <set>

#include "mcsample/error.hpp"
#include "mcsample/io_util.hpp"
#include "mcsample/mask_zoo.hpp"
#include "mcsample/rng.hpp"
#include "oracles.hpp"

using namespace mcs;

namespace {

std::vector<int> range(int lo, int hi) {
  std::vector<int> v(static_cast<std::size_t>(hi - lo + 1));
  std::iota(v.begin(), v.end(), lo);
  return v;
}

void check_well_formed(const LineMask& m, int n, int budget) {
  REQUIRE(m.n_lines == n);
  REQUIRE(m.budget() == budget);
  std::set<int> unique(m.indices.begin(), m.indices.end());
  REQUIRE(unique.size() == m.indices.size());
  REQUIRE(std::is_sorted(m.indices.begin(), m.indices.end()));
  REQUIRE(m.indices.front() >= 0);
  REQUIRE(m.indices.back() < n);
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::InvalidInput;
}

}  // namespace

TEST_CASE("lowres mask") {
  CHECK(lowres_mask(240, 22).indices == range(109, 130));
  CHECK(lowres_mask(8, 8).indices == range(0, 7));
  CHECK(lowres_mask(9, 1).indices == std::vector<int>{4});
  CHECK(lowres_mask(64, 6).indices == range(29, 34));
  CHECK(kind_of([] { lowres_mask(10, 0); }) == ErrorKind::InvalidBudget);
  CHECK(kind_of([] { lowres_mask(10, 11); }) == ErrorKind::InvalidBudget);
}

TEST_CASE("equidistant mask") {
  SUBCASE("22 of 240") {
    const auto m = equidistant_mask(240, 22);
    check_well_formed(m, 240, 22);
    std::vector<int> expected{0, 37, 75, 112};
    const auto block = range(113, 127);
    expected.insert(expected.end(), block.begin(), block.end());
    for (int v : {164, 202, 239}) expected.push_back(v);
    CHECK(m.indices == expected);
  }
  SUBCASE("fraction 1 is the low-resolution mask") {
    for (int n : {9, 64, 240})
      for (int b : {1, 2, 5, 9}) CHECK(equidistant_mask(n, b, 1.0) == lowres_mask(n, b));
  }
  SUBCASE("12 lines, budget 3, one third centred") {
    CHECK(equidistant_mask(12, 3, 1.0 / 3.0).indices == std::vector<int>{0, 6, 11});
  }
  SUBCASE("single peripheral line sits mid-complement") {
    // c = round(0.5 * 3) = 2 → {4, 5}; complement has 8 lines, pick position 3.
    CHECK(equidistant_mask(10, 3, 0.5).indices == std::vector<int>{3, 4, 5});
  }
  CHECK(kind_of([] { equidistant_mask(10, 3, 0.0); }) == ErrorKind::InvalidInput);
  CHECK(kind_of([] { equidistant_mask(10, 3, 1.5); }) == ErrorKind::InvalidInput);
  CHECK(kind_of([] { equidistant_mask(10, 12); }) == ErrorKind::InvalidBudget);
}

TEST_CASE("gaussian mask") {
  SUBCASE("exhaustion") {
    for (std::uint64_t seed : {0u, 1u, 99u}) CHECK(gaussian_mask(32, 32, std::nullopt, seed) == lowres_mask(32, 32));
  }
  SUBCASE("deterministic and seed-dependent") {
    CHECK(gaussian_mask(240, 22, 40.0, 7) == gaussian_mask(240, 22, 40.0, 7));
    CHECK(gaussian_mask(240, 22, 40.0, 7) != gaussian_mask(240, 22, 40.0, 8));
  }
  SUBCASE("22 of 240, sigma 40, seed 0") {
    const auto m = gaussian_mask(240, 22, 40.0, 0);
    check_well_formed(m, 240, 22);
    CHECK(m.contains(120));
    const auto inside = std::count_if(m.indices.begin(), m.indices.end(), [](int i) { return i >= 80 && i <= 160; });
    CHECK(inside >= 14);  // ≥ 60% of 22
  }
  SUBCASE("concentration over 1000 seeds") {
    double inside = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      const auto m = gaussian_mask(240, 22, 40.0, seed);
      inside += static_cast<double>(
          std::count_if(m.indices.begin(), m.indices.end(), [](int i) { return i >= 80 && i <= 160; }));
    }
    CHECK(inside / (1000.0 * 22.0) >= 0.6);
  }
  SUBCASE("tiny sigma falls back to lines nearest DC") {
    CHECK(gaussian_mask(64, 5, 1e-3, 0) == lowres_mask(64, 5));
  }
  CHECK(kind_of([] { gaussian_mask(10, 3, 0.0, 0); }) == ErrorKind::InvalidSigma);
  CHECK(kind_of([] { gaussian_mask(10, 3, -1.0, 0); }) == ErrorKind::InvalidSigma);
  CHECK(kind_of([] { gaussian_mask(10, 0, 2.0, 0); }) == ErrorKind::InvalidBudget);
}

TEST_CASE("mask from probabilities") {
  const std::vector<double> p{0.1, 0.9, 0.5, 0.5};
  CHECK(mask_from_probabilities(p, 2).indices == std::vector<int>{1, 2});
  CHECK(mask_from_probabilities(std::vector<double>(7, 0.3), 7) == lowres_mask(7, 7));
  CHECK(kind_of([&] { mask_from_probabilities(p, 5); }) == ErrorKind::InvalidBudget);
  CHECK(kind_of([] { mask_from_probabilities(std::vector<double>{0.2, 1.2}, 1); }) == ErrorKind::InvalidInput);

  SUBCASE("ties resolve toward DC, then the lower index") {
    CHECK(mask_from_probabilities(std::vector<double>(8, 0.5), 3).indices == std::vector<int>{3, 4, 5});
    CHECK(mask_from_probabilities(std::vector<double>(8, 0.5), 2).indices == std::vector<int>{3, 4});
  }

  SUBCASE("matches the exhaustive best support") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
      const int n = 1 + static_cast<int>(rng.below(12));
      const int budget = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      std::vector<double> probs(static_cast<std::size_t>(n));
      for (auto& v : probs) v = rng.uniform();
      CHECK(mask_from_probabilities(probs, budget).indices == oracle::best_support(probs, budget));
    }
  }

  SUBCASE("invariant under strictly monotone transforms") {
    Rng rng(23);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> probs(20), squashed(20), cubed(20);
      for (int i = 0; i < 20; ++i) {
        probs[i] = rng.uniform();
        squashed[i] = std::sqrt(probs[i]);
        cubed[i] = probs[i] * probs[i] * probs[i];
      }
      const auto base = mask_from_probabilities(probs, 7);
      CHECK(mask_from_probabilities(squashed, 7) == base);
      CHECK(mask_from_probabilities(cubed, 7) == base);
    }
  }
}

TEST_CASE("acceleration") {
  CHECK(acceleration(240, 22) == doctest::Approx(240.0 / 22.0).epsilon(1e-15));
  CHECK(std::abs(acceleration(240, 22) - 10.909090909090908) < 1e-9);
  CHECK(acceleration(240, 240) == 1.0);
  CHECK(acceleration(240, 24) == 10.0);
  CHECK(kind_of([] { acceleration(240, 0); }) == ErrorKind::InvalidBudget);
}

TEST_CASE("every generator returns exactly budget distinct in-range lines") {
  Rng rng(31);
  for (int trial = 0; trial < 400; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(512));
    const int budget = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    check_well_formed(lowres_mask(n, budget), n, budget);
    const double frac = rng.uniform(0.01, 1.0);
    const auto eq = equidistant_mask(n, budget, frac);
    check_well_formed(eq, n, budget);
    const int c = static_cast<int>(std::lround(frac * budget));
    if (c > 0)
      for (int line : lowres_mask(n, c).indices) CHECK(eq.contains(line));
    check_well_formed(gaussian_mask(n, budget, rng.uniform(0.5, n), rng.next()), n, budget);
    std::vector<double> p(static_cast<std::size_t>(n));
    for (auto& v : p) v = rng.uniform();
    check_well_formed(mask_from_probabilities(p, budget), n, budget);

    const auto lr = lowres_mask(n, budget);
    CHECK(lr.indices.back() - lr.indices.front() + 1 == budget);
  }
}

TEST_CASE("mask file format") {
  const auto m = lowres_mask(240, 22);
  CHECK(mask_to_json(m).substr(0, 30) == R"({"n_lines":240,"budget":22,"in)");
  CHECK(mask_from_json(mask_to_json(m)) == m);

  const auto path = std::filesystem::temp_directory_path() / "mcsample_mask_test.json";
  write_mask(path, m);
  CHECK(read_mask(path) == m);
  std::filesystem::remove(path);

  CHECK(kind_of([] { mask_from_json(R"({"n_lines":8,"budget":2,"indices":[3,3]})"); }) == ErrorKind::InvalidMask);
  CHECK(kind_of([] { mask_from_json(R"({"n_lines":8,"budget":2,"indices":[3,8]})"); }) == ErrorKind::InvalidMask);
  CHECK(kind_of([] { mask_from_json(R"({"n_lines":8,"budget":3,"indices":[3,4]})"); }) == ErrorKind::InvalidMask);
  CHECK(kind_of([] { mask_from_json(R"({"n_lines":8,"budget":2,"indices":[-1,4]})"); }) == ErrorKind::InvalidMask);
  CHECK(kind_of([] { mask_from_json(R"({"n_lines":8,"indices":[3,4]})"); }) == ErrorKind::InvalidMask);
  CHECK(kind_of([] { mask_from_json("not json"); }) == ErrorKind::CorruptFile);
}
