#include <doctest.h>

#include <set>

#include "doelens/design.hpp"
#include "doelens/synthgen.hpp"

using namespace doelens;

namespace {

std::vector<int> product_column(const DesignPlan& plan, EffectWord w) {
  std::vector<int> col(plan.run_count(), 1);
  for (std::size_t r = 0; r < plan.run_count(); ++r)
    for (std::size_t f = 0; f < plan.k; ++f)
      if (w >> f & 1) col[r] *= plan.runs[r][f];
  return col;
}

// Words whose product column is constant over all runs, found by exhaustive search.
std::set<std::string> constant_words(const DesignPlan& plan) {
  std::set<std::string> out;
  for (EffectWord w = 1; w < (EffectWord{1} << plan.k); ++w) {
    auto col = product_column(plan, w);
    if (std::all_of(col.begin(), col.end(), [&](int v) { return v == col[0]; })) out.insert(word_to_string(w));
  }
  return out;
}

void check_balanced(const DesignPlan& plan) {
  for (std::size_t f = 0; f < plan.k; ++f) {
    auto col = plan.column(f);
    int sum = 0;
    for (int v : col) sum += v;
    CHECK(sum == 0);
  }
}

}  // namespace

TEST_CASE("full factorial enumerates sign combinations") {
  auto k1 = full_factorial(1);
  CHECK(k1.runs == std::vector<std::vector<int>>{{-1}, {1}});

  auto k3 = full_factorial(3);
  CHECK(k3.run_count() == 8);
  check_balanced(k3);

  auto k5 = full_factorial(5);
  std::set<std::vector<int>> distinct(k5.runs.begin(), k5.runs.end());
  CHECK(distinct.size() == 32);
  CHECK(k5.p == 0);

  CHECK_THROWS_AS(full_factorial(0), std::invalid_argument);
  CHECK_THROWS_AS(full_factorial(21), std::invalid_argument);
}

TEST_CASE("2^(5-2) with D=AB, E=AC") {
  auto plan = fractional_factorial(5, parse_generators("D=AB,E=AC"));
  CHECK(plan.run_count() == 8);
  std::set<std::vector<int>> distinct(plan.runs.begin(), plan.runs.end());
  CHECK(distinct.size() == 8);
  check_balanced(plan);
  for (const auto& row : plan.runs) {
    CHECK(row[3] == row[0] * row[1]);
    CHECK(row[4] == row[0] * row[2]);
  }
  CHECK(plan.runs.front() == std::vector<int>{-1, -1, -1, 1, 1});

  auto alias = alias_structure(plan);
  std::set<std::string> words;
  for (auto w : alias.defining_relation) words.insert(word_to_string(w));
  CHECK(words == std::set<std::string>{"ABD", "ACE", "BCDE"});
  CHECK(words == constant_words(plan));
  CHECK(alias.resolution == 3);
  CHECK(plan.resolution == 3);
  CHECK(alias.mains_unaliased);

  // Resolution III: some main effect shares a column with a two-factor interaction.
  bool main_with_2fi = false;
  for (const auto& g : alias.groups) {
    bool has_main = false, has_2fi = false;
    for (auto e : g) (word_length(e) == 1 ? has_main : has_2fi) = true;
    main_with_2fi |= has_main && has_2fi;
  }
  CHECK(main_with_2fi);
}

TEST_CASE("no generators equals the full factorial") {
  auto a = fractional_factorial(2, {});
  auto b = full_factorial(2);
  CHECK(a.runs == b.runs);
  CHECK(a.p == 0);
  CHECK_FALSE(a.resolution.has_value());
}

TEST_CASE("full factorial has only singleton alias groups") {
  for (std::size_t k = 1; k <= 6; ++k) {
    auto plan = full_factorial(k);
    auto alias = alias_structure(plan);
    CHECK(alias.defining_relation.empty());
    for (const auto& g : alias.groups) CHECK(g.size() == 1);
  }
}

TEST_CASE("main-effect columns are orthogonal for length >= 3 generators") {
  for (const char* gens : {"D=ABC", "E=ABCD", "D=AB,E=AC", "E=ABC,F=BCD", "F=ABC,G=ABD,H=BCDE"}) {
    auto g = parse_generators(gens);
    const std::size_t k = g.back().target + 1;
    auto plan = fractional_factorial(k, g);
    CHECK(plan.run_count() == (std::size_t{1} << (k - g.size())));
    check_balanced(plan);
    std::set<std::vector<int>> distinct(plan.runs.begin(), plan.runs.end());
    CHECK(distinct.size() == plan.run_count());
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a + 1; b < k; ++b) {
        auto ca = plan.column(a), cb = plan.column(b);
        int dot = 0;
        for (std::size_t r = 0; r < ca.size(); ++r) dot += ca[r] * cb[r];
        CHECK_MESSAGE(dot == 0, gens);
      }
    auto alias = alias_structure(plan);
    std::set<std::string> words;
    for (auto w : alias.defining_relation) words.insert(word_to_string(w));
    CHECK(words == constant_words(plan));
  }
}

TEST_CASE("malformed generators are rejected") {
  CHECK_THROWS_AS(fractional_factorial(5, {{3, {3}}, {4, {0, 2}}}), std::invalid_argument);
  CHECK_THROWS_AS(fractional_factorial(5, {{3, {}}, {4, {0, 2}}}), std::invalid_argument);
  CHECK_THROWS_AS(fractional_factorial(5, {{3, {0, 4}}, {4, {0, 2}}}), std::invalid_argument);
  CHECK_THROWS_AS(fractional_factorial(5, {{2, {0, 1}}, {4, {0, 1}}}), std::invalid_argument);
  CHECK_THROWS(parse_generators("D=AX"));
  CHECK_THROWS(parse_generators("DAB"));
  CHECK(factor_letter(8) == 'J');
  CHECK(factor_from_letter('J') == 8);
}

TEST_CASE("realize maps signs onto quartile sets") {
  auto plan = fractional_factorial(5, parse_generators("D=AB,E=AC"));
  const auto& space = dsprites_space();
  Rng rng(3);
  auto settings = realize(plan, space, 3, rng);
  CHECK(settings.size() == 24);
  for (std::size_t i = 0; i < settings.size(); ++i) {
    const auto& row = plan.runs[i / 3];
    for (std::size_t f = 0; f < space.size(); ++f) {
      auto proj = two_level_projection(space, f);
      const auto& set = row[f] < 0 ? proj.low : proj.high;
      CHECK(std::find(set.begin(), set.end(), settings[i][f]) != set.end());
    }
    if (row[2] < 0) CHECK(settings[i][2] <= 9);
  }

  FactorSpace binary({{"a", FactorRole::semantic, 2, {}}, {"b", FactorRole::nuisance, 2, {}},
                      {"c", FactorRole::nuisance, 2, {}}});
  auto full = full_factorial(3);
  auto bin = realize(full, binary, 1, rng);
  for (std::size_t r = 0; r < bin.size(); ++r)
    for (std::size_t f = 0; f < 3; ++f) CHECK(bin[r][f] == (full.runs[r][f] > 0 ? 1 : 0));

  CHECK_THROWS_AS(realize(full, space, 1, rng), std::invalid_argument);
  CHECK_THROWS_AS(realize(plan, space, 0, rng), std::invalid_argument);

  Rng r1(9), r2(9);
  CHECK(realize(plan, space, 4, r1) == realize(plan, space, 4, r2));
}

TEST_CASE("csv and sidecar") {
  auto plan = fractional_factorial(5, parse_generators("D=AB,E=AC"));
  auto csv = plan_to_csv(plan);
  CHECK(csv.substr(0, csv.find('\n')) == "A,B,C,D,E");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
  auto side = plan_sidecar_json(plan);
  CHECK(side["runs"] == 8);
  CHECK(side["resolution"] == 3);
  CHECK(side["generators"] == "D=AB,E=AC");
  CHECK(format_generators(parse_generators(side["generators"].get<std::string>())) == "D=AB,E=AC");
}
