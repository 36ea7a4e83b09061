#include "doelens/design.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace doelens {
namespace {

constexpr std::string_view letters = "ABCDEFGHJKLMNOPQRSTU";

std::vector<int> effect_column(const DesignPlan& plan, EffectWord word) {
  std::vector<int> col(plan.run_count(), 1);
  for (std::size_t f = 0; f < plan.k; ++f) {
    if (!(word & (EffectWord{1} << f))) continue;
    for (std::size_t r = 0; r < plan.run_count(); ++r) col[r] *= plan.runs[r][f];
  }
  return col;
}

std::vector<EffectWord> defining_relation(const std::vector<GeneratorWord>& generators) {
  std::set<EffectWord> words;
  const std::size_t p = generators.size();
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << p); ++mask) {
    EffectWord w = 0;
    for (std::size_t g = 0; g < p; ++g)
      if (mask & (std::uint64_t{1} << g)) w ^= generators[g].defining_word();
    if (w != 0) words.insert(w);
  }
  std::vector<EffectWord> out(words.begin(), words.end());
  std::sort(out.begin(), out.end(), [](EffectWord a, EffectWord b) {
    const int la = word_length(a), lb = word_length(b);
    return la != lb ? la < lb : a < b;
  });
  return out;
}

std::optional<int> resolution_of(const std::vector<EffectWord>& relation) {
  if (relation.empty()) return std::nullopt;
  int shortest = word_length(relation.front());
  for (auto w : relation) shortest = std::min(shortest, word_length(w));
  return shortest;
}

}  // namespace

char factor_letter(std::size_t index) {
  if (index >= letters.size()) throw std::out_of_range("design factor index out of range");
  return letters[index];
}

std::size_t factor_from_letter(char letter) {
  const auto pos = letters.find(letter);
  if (pos == std::string_view::npos)
    throw std::invalid_argument(std::string("unknown design factor letter '") + letter + "'");
  return pos;
}

std::string word_to_string(EffectWord word) {
  if (word == 0) return "I";
  std::string s;
  for (std::size_t f = 0; f < letters.size(); ++f)
    if (word & (EffectWord{1} << f)) s.push_back(letters[f]);
  return s;
}

int word_length(EffectWord word) { return std::popcount(word); }

EffectWord GeneratorWord::defining_word() const {
  EffectWord w = EffectWord{1} << target;
  for (auto f : product_of) w ^= EffectWord{1} << f;
  return w;
}

std::vector<GeneratorWord> parse_generators(std::string_view text) {
  std::vector<GeneratorWord> out;
  std::istringstream is{std::string(text)};
  std::string item;
  while (std::getline(is, item, ',')) {
    std::erase(item, ' ');
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq != 1 || eq + 1 >= item.size())
      throw std::invalid_argument("malformed generator '" + item + "' (expected e.g. D=AB)");
    GeneratorWord g;
    g.target = factor_from_letter(item[0]);
    for (std::size_t i = eq + 1; i < item.size(); ++i) g.product_of.push_back(factor_from_letter(item[i]));
    out.push_back(std::move(g));
  }
  return out;
}

std::string format_generators(const std::vector<GeneratorWord>& generators) {
  std::string s;
  for (std::size_t i = 0; i < generators.size(); ++i) {
    if (i) s += ',';
    s += factor_letter(generators[i].target);
    s += '=';
    for (auto f : generators[i].product_of) s += factor_letter(f);
  }
  return s;
}

std::vector<int> DesignPlan::column(std::size_t factor) const {
  if (factor >= k) throw std::out_of_range("design column out of range");
  std::vector<int> col;
  col.reserve(runs.size());
  for (const auto& r : runs) col.push_back(r[factor]);
  return col;
}

DesignPlan full_factorial(std::size_t k) {
  if (k < 1 || k > max_design_factors)
    throw std::invalid_argument("full factorial needs 1 <= k <= " + std::to_string(max_design_factors));
  DesignPlan plan;
  plan.k = k;
  const std::size_t m = std::size_t{1} << k;
  plan.runs.assign(m, std::vector<int>(k));
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t f = 0; f < k; ++f) plan.runs[r][f] = (r >> (k - 1 - f)) & 1 ? 1 : -1;
  return plan;
}

DesignPlan fractional_factorial(std::size_t k, std::vector<GeneratorWord> generators) {
  if (k < 1 || k > max_design_factors)
    throw std::invalid_argument("fractional factorial needs 1 <= k <= " + std::to_string(max_design_factors));
  const std::size_t p = generators.size();
  if (p >= k) throw std::invalid_argument("need at least one base factor (p < k)");
  const std::size_t base = k - p;
  std::sort(generators.begin(), generators.end(),
            [](const GeneratorWord& a, const GeneratorWord& b) { return a.target < b.target; });
  for (std::size_t g = 0; g < p; ++g) {
    const auto& gen = generators[g];
    if (gen.target != base + g)
      throw std::invalid_argument("generators must target the last p factors, got target " +
                                  std::string(1, factor_letter(gen.target)));
    if (gen.product_of.empty()) throw std::invalid_argument("generator product must be nonempty");
    std::set<std::size_t> seen;
    for (auto f : gen.product_of) {
      if (f == gen.target) throw std::invalid_argument("generator references its own target");
      if (f >= base) throw std::invalid_argument("generator references a non-base factor");
      if (!seen.insert(f).second) throw std::invalid_argument("generator repeats a factor");
    }
  }
  DesignPlan plan = full_factorial(base);
  plan.k = k;
  plan.p = p;
  for (auto& row : plan.runs) {
    for (const auto& gen : generators) {
      int v = 1;
      for (auto f : gen.product_of) v *= row[f];
      row.push_back(v);
    }
  }
  plan.generators = std::move(generators);
  plan.resolution = resolution_of(defining_relation(plan.generators));
  return plan;
}

AliasStructure alias_structure(DesignPlan& plan) {
  AliasStructure out;
  out.defining_relation = defining_relation(plan.generators);
  out.resolution = resolution_of(out.defining_relation);
  plan.resolution = out.resolution;

  std::vector<EffectWord> effects;
  for (std::size_t a = 0; a < plan.k; ++a) effects.push_back(EffectWord{1} << a);
  for (std::size_t a = 0; a < plan.k; ++a)
    for (std::size_t b = a + 1; b < plan.k; ++b) effects.push_back((EffectWord{1} << a) | (EffectWord{1} << b));

  // Key each column up to sign: flip so the first entry is +1.
  std::map<std::vector<int>, std::size_t> group_of;
  for (auto e : effects) {
    auto col = effect_column(plan, e);
    if (!col.empty() && col.front() < 0)
      for (auto& v : col) v = -v;
    auto [it, inserted] = group_of.try_emplace(std::move(col), out.groups.size());
    if (inserted) out.groups.emplace_back();
    out.groups[it->second].push_back(e);
  }
  for (const auto& g : out.groups) {
    int mains = 0;
    for (auto e : g) mains += word_length(e) == 1;
    if (mains > 1) out.mains_unaliased = false;
  }
  return out;
}

std::vector<FactorSetting> realize(const DesignPlan& plan, const FactorSpace& space, std::size_t replicates,
                                   Rng& rng) {
  if (plan.k != space.size())
    throw std::invalid_argument("design has " + std::to_string(plan.k) + " factors, space has " +
                                std::to_string(space.size()));
  if (replicates < 1) throw std::invalid_argument("replicates must be >= 1");
  std::vector<LevelProjection> proj;
  for (std::size_t f = 0; f < space.size(); ++f) proj.push_back(two_level_projection(space, f));
  std::vector<FactorSetting> out;
  out.reserve(plan.run_count() * replicates);
  for (const auto& row : plan.runs) {
    for (std::size_t r = 0; r < replicates; ++r) {
      FactorSetting s;
      s.values.resize(plan.k);
      for (std::size_t f = 0; f < plan.k; ++f) {
        const auto& set = row[f] < 0 ? proj[f].low : proj[f].high;
        std::uniform_int_distribution<std::size_t> pick(0, set.size() - 1);
        s[f] = set[pick(rng)];
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::string plan_to_csv(const DesignPlan& plan) {
  std::ostringstream os;
  for (std::size_t f = 0; f < plan.k; ++f) os << (f ? "," : "") << factor_letter(f);
  os << '\n';
  for (const auto& row : plan.runs) {
    for (std::size_t f = 0; f < plan.k; ++f) os << (f ? "," : "") << row[f];
    os << '\n';
  }
  return os.str();
}

nlohmann::json plan_sidecar_json(DesignPlan& plan) {
  const auto alias = alias_structure(plan);
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : alias.groups) {
    nlohmann::json words = nlohmann::json::array();
    for (auto w : g) words.push_back(word_to_string(w));
    groups.push_back(std::move(words));
  }
  nlohmann::json relation = nlohmann::json::array();
  for (auto w : alias.defining_relation) relation.push_back(word_to_string(w));
  return {{"k", plan.k},
          {"p", plan.p},
          {"runs", plan.run_count()},
          {"generators", format_generators(plan.generators)},
          {"defining_relation", relation},
          {"resolution", alias.resolution ? nlohmann::json(*alias.resolution) : nlohmann::json(nullptr)},
          {"mains_unaliased", alias.mains_unaliased},
          {"alias_groups", groups}};
}

}  // namespace doelens
