#include <doctest.h>

#include <set>

#include "doelens/factor_space.hpp"
#include "doelens/synthgen.hpp"
#include "../common/oracles.hpp"

using namespace doelens;

namespace {
FactorSpace one_factor(int levels) { return FactorSpace({{"z", FactorRole::nuisance, levels, {}}}); }
}  // namespace

TEST_CASE("two-level projection uses quartiles") {
  const auto& s = dsprites_space();
  auto orient = two_level_projection(s, s.index_of("orientation"));
  CHECK(orient.low == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(orient.high == std::vector<int>{30, 31, 32, 33, 34, 35, 36, 37, 38, 39});

  auto bin = two_level_projection(one_factor(2), 0);
  CHECK(bin.low == std::vector<int>{0});
  CHECK(bin.high == std::vector<int>{1});

  auto six = two_level_projection(one_factor(6), 0);
  CHECK(six.low == std::vector<int>{0});
  CHECK(six.high == std::vector<int>{5});

  CHECK_THROWS_AS(two_level_projection(s, 5), std::out_of_range);
}

TEST_CASE("projection sets are disjoint and fit in the range") {
  for (int levels = 2; levels <= 64; ++levels) {
    auto p = two_level_projection(one_factor(levels), 0);
    std::set<int> all(p.low.begin(), p.low.end());
    for (int h : p.high) CHECK(all.insert(h).second);
    CHECK(static_cast<int>(all.size()) <= levels);
    CHECK(static_cast<int>(p.low.size()) == std::max(1, levels / 4));
    CHECK(*all.rbegin() < levels);
  }
}

TEST_CASE("space validation") {
  CHECK_THROWS_AS(FactorSpace(std::vector<FactorSpec>{}), std::invalid_argument);
  CHECK_THROWS_AS(FactorSpace({{"a", FactorRole::nuisance, 1, {}}}), std::invalid_argument);
  CHECK_THROWS_AS(FactorSpace({{"", FactorRole::nuisance, 2, {}}}), std::invalid_argument);
  CHECK_THROWS_AS(FactorSpace({{"a", FactorRole::nuisance, 2, {}}, {"a", FactorRole::semantic, 3, {}}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(FactorSpace({{"a", FactorRole::nuisance, 2, {"x"}}}), std::invalid_argument);
  CHECK(dsprites_space().setting_count() == 3ull * 6 * 40 * 32 * 32);
  CHECK(dsprites_space().semantic_index() == 0u);
}

TEST_CASE("sample_setting keeps fixed values and stays in range") {
  Rng rng(7);
  auto s3 = one_factor(3);
  for (int i = 0; i < 100; ++i) {
    auto v = sample_setting(s3, {}, rng);
    CHECK(v[0] >= 0);
    CHECK(v[0] < 3);
  }
  const auto& ds = dsprites_space();
  const auto posx = ds.index_of("posX");
  for (int i = 0; i < 50; ++i) CHECK(sample_setting(ds, {{posx, 7}}, rng)[posx] == 7);

  PartialSetting all{{0, 2}, {1, 5}, {2, 39}, {3, 0}, {4, 31}};
  auto fixed = sample_setting(ds, all, rng);
  CHECK(fixed.values == std::vector<int>{2, 5, 39, 0, 31});

  CHECK_THROWS_AS(sample_setting(ds, {{posx, 32}}, rng), std::invalid_argument);
}

TEST_CASE("sample_setting marginals are uniform") {
  const auto& ds = dsprites_space();
  Rng rng(11);
  LevelHistogram hist(ds.size());
  for (std::size_t f = 0; f < ds.size(); ++f) hist[f].assign(ds[f].level_count, 0);
  for (int i = 0; i < 10000; ++i) {
    auto s = sample_setting(ds, {}, rng);
    for (std::size_t f = 0; f < ds.size(); ++f) ++hist[f][s[f]];
  }
  for (std::size_t f = 0; f < ds.size(); ++f) CHECK_MESSAGE(oracle::chi_square_uniform(hist[f], 0.01 / ds.size()), ds[f].name);  // family-wise 0.01
}

TEST_CASE("setting keys are unique and validation rejects foreign settings") {
  auto space = FactorSpace({{"a", FactorRole::semantic, 3, {}}, {"b", FactorRole::nuisance, 4, {}}});
  std::set<std::uint64_t> keys;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 4; ++b) keys.insert(setting_key(space, FactorSetting{{a, b}}));
  CHECK(keys.size() == 12);
  CHECK_THROWS_AS(validate_setting(space, FactorSetting{{0}}), std::invalid_argument);
  CHECK_THROWS_AS(validate_setting(space, FactorSetting{{0, 4}}), std::invalid_argument);
}

TEST_CASE("factor space JSON round trip") {
  for (const auto* s : {&dsprites_space(), &colored_shapes_space()}) {
    auto text = to_json(*s).dump();
    CHECK(factor_space_from_json(nlohmann::json::parse(text)) == *s);
  }
  FactorSpace labelled({{"light", FactorRole::nuisance, 2, {"dim", "bright"}}, {"obj", FactorRole::semantic, 2, {}}});
  CHECK(factor_space_from_json(to_json(labelled)) == labelled);
  CHECK_THROWS_AS(factor_space_from_json(nlohmann::json::object()), std::invalid_argument);
  CHECK(parse_factor_role("semantic") == FactorRole::semantic);
  CHECK_THROWS(parse_factor_role("other"));
}
