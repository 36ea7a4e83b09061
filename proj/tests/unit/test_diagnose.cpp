#include <doctest.h>

#include <cmath>

#include "doelens/diagnose.hpp"

using namespace doelens;

namespace {

FactorSpace small_space() {
  return FactorSpace({{"obj", FactorRole::semantic, 3, {}},
                      {"angle", FactorRole::nuisance, 8, {}},
                      {"light", FactorRole::nuisance, 2, {}}});
}

SensitivityProfile profile_with(const FactorSpace& space, std::vector<bool> significant) {
  SensitivityProfile p;
  for (std::size_t f = 0; f < space.size(); ++f)
    p.factors.push_back({space[f].name, space[f].role, significant[f] ? 50.0 : 0.5, 1, 100,
                         significant[f] ? 1e-6 : 0.9, significant[f], false, true});
  return p;
}

CoverageEvidence coverage_with(const FactorSpace& space, std::vector<bool> positive) {
  CoverageEvidence ev;
  for (std::size_t f = 0; f < space.size(); ++f) {
    FactorCoverage c;
    c.factor = space[f].name;
    c.positive = positive[f];
    c.drop = positive[f] ? 0.4 : 0.0;
    if (positive[f]) c.underrepresented = {1};
    ev.factors.push_back(c);
  }
  return ev;
}

// Every setting of the space, each once.
std::vector<FactorSetting> grid(const FactorSpace& space) {
  std::vector<FactorSetting> out;
  for (std::uint64_t k = 0; k < space.setting_count(); ++k) {
    FactorSetting s;
    auto rest = k;
    for (std::size_t f = 0; f < space.size(); ++f) {
      s.values.push_back(static_cast<int>(rest % space[f].level_count));
      rest /= space[f].level_count;
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST_CASE("underrepresented levels use half the uniform share") {
  CHECK(underrepresented_levels(std::vector<std::size_t>{10, 10, 10, 10}).empty());
  CHECK(underrepresented_levels(std::vector<std::size_t>{100, 100, 0, 28}) == std::vector<int>{2, 3});
  CHECK(underrepresented_levels(std::vector<std::size_t>{100, 100, 0, 29}) == std::vector<int>{2});
  CHECK(underrepresented_levels(std::vector<std::size_t>{0, 0}) == std::vector<int>{0, 1});
}

TEST_CASE("coverage test on stratified scores") {
  const auto space = small_space();
  const auto settings = grid(space);
  LevelHistogram hist{{10, 10, 10}, {40, 40, 40, 40, 40, 0, 0, 0}, {100, 100}};

  // Correct at covered angles, wrong at unseen ones.
  std::vector<double> scores;
  for (const auto& s : settings) scores.push_back(s[1] < 5 ? 1.0 : 0.0);
  auto ev = coverage_from_scores(space, settings, scores, hist, 0.10);
  const auto& angle = ev.factors[1];
  CHECK(angle.underrepresented == std::vector<int>{5, 6, 7});
  CHECK(angle.covered_metric == 1.0);
  CHECK(angle.uncovered_metric == 0.0);
  CHECK(angle.drop == 1.0);
  CHECK(angle.positive);
  CHECK(angle.level_metric[4] == 1.0);
  CHECK(angle.level_metric[6] == 0.0);
  CHECK(angle.audit_counts[0] == 6);
  CHECK_FALSE(ev.factors[0].positive);
  CHECK_FALSE(ev.factors[2].positive);

  // A model that generalizes perfectly shows no drop despite unseen levels.
  std::vector<double> perfect(settings.size(), 1.0);
  auto ok = coverage_from_scores(space, settings, perfect, hist, 0.10);
  CHECK(ok.factors[1].drop == 0.0);
  CHECK_FALSE(ok.factors[1].positive);

  // Uniform training histogram: never positive.
  LevelHistogram uniform{{10, 10, 10}, std::vector<std::size_t>(8, 5), {3, 3}};
  auto none = coverage_from_scores(space, settings, scores, uniform, 0.0);
  for (const auto& f : none.factors) {
    CHECK(f.underrepresented.empty());
    CHECK_FALSE(f.positive);
  }

  // Loss metric: drop is uncovered minus covered loss.
  std::vector<double> losses;
  for (const auto& s : settings) losses.push_back(s[1] < 5 ? 0.1 : 0.9);
  auto lm = coverage_from_scores(space, settings, losses, hist, 0.10, StratifiedMetric::loss);
  CHECK(lm.factors[1].drop == doctest::Approx(0.8));
  CHECK(lm.factors[1].positive);

  CHECK_THROWS_AS(coverage_from_scores(space, {}, {}, hist, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(coverage_from_scores(space, settings, scores, LevelHistogram{{1, 1, 1}}, 0.1),
                  std::invalid_argument);
}

TEST_CASE("shortcut test gates on role and significance") {
  const auto space = small_space();
  auto flags = shortcut_test(profile_with(space, {true, true, false}), space);
  CHECK(flags == std::vector<bool>{false, true, false});
  CHECK_THROWS(shortcut_test(profile_with(space, {true, true, false}), colored_shapes_space()));
}

TEST_CASE("priority rule") {
  const auto space = small_space();
  struct Case {
    bool cov, sc;
    GapType nuisance;
  };
  for (auto c : {Case{true, true, GapType::type_i}, Case{true, false, GapType::type_i},
                 Case{false, true, GapType::type_ii}, Case{false, false, GapType::correct}}) {
    auto prof = profile_with(space, {c.sc, c.sc, c.sc});
    auto d = classify(space, coverage_with(space, {c.cov, c.cov, c.cov}), shortcut_test(prof, space), prof);
    CHECK(d.at("angle").classification == c.nuisance);
    CHECK(d.at("light").classification == c.nuisance);
    // Semantic factors are never Type II.
    CHECK(d.at("obj").classification == (c.cov ? GapType::type_i : GapType::semantic));
    CHECK(d.has_gaps() == (c.cov || c.sc));
  }
}

TEST_CASE("classification is total and order independent") {
  const auto space = small_space();
  for (int mask = 0; mask < 64; ++mask) {
    std::vector<bool> cov, sig;
    for (int f = 0; f < 3; ++f) cov.push_back(mask >> f & 1), sig.push_back(mask >> (f + 3) & 1);
    auto prof = profile_with(space, sig);
    auto d = classify(space, coverage_with(space, cov), shortcut_test(prof, space), prof);
    CHECK(d.factors.size() == 3);

    // Reverse factor order; each factor keeps its label.
    FactorSpace rev({space[2], space[1], space[0]});
    auto rprof = profile_with(rev, {sig[2], sig[1], sig[0]});
    auto rd = classify(rev, coverage_with(rev, {cov[2], cov[1], cov[0]}), shortcut_test(rprof, rev), rprof);
    for (std::size_t f = 0; f < 3; ++f) CHECK(rd.at(space[f].name).classification == d.factors[f].classification);
  }
}

TEST_CASE("diagnosis JSON round trip") {
  const auto space = small_space();
  auto prof = profile_with(space, {true, false, true});
  auto d = classify(space, coverage_with(space, {false, true, false}), shortcut_test(prof, space), prof);
  auto back = diagnosis_from_json(nlohmann::json::parse(to_json(d).dump()));
  CHECK(to_json(back) == to_json(d));
  CHECK(back.at("angle").classification == GapType::type_i);
  CHECK(back.at("light").classification == GapType::type_ii);
  CHECK(back.at("angle").deficient_levels == std::vector<int>{1});
  CHECK(parse_gap_type("TypeII") == GapType::type_ii);
  CHECK_THROWS(parse_gap_type("Type3"));
}
