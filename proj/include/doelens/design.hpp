#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "doelens/factor_space.hpp"
#include "doelens/rng.hpp"

namespace doelens {

inline constexpr std::size_t max_design_factors = 20;

/// Letter for a design column. "I" is skipped because it denotes the identity
/// word in defining relations.
char factor_letter(std::size_t index);
std::size_t factor_from_letter(char letter);

/// An effect as a set of factor indices, stored as a bitmask.
using EffectWord = std::uint32_t;
std::string word_to_string(EffectWord word);
int word_length(EffectWord word);

/// Generated column `target` equals the elementwise product of `product_of`.
struct GeneratorWord {
  std::size_t target = 0;
  std::vector<std::size_t> product_of;

  EffectWord defining_word() const;
  bool operator==(const GeneratorWord&) const = default;
};

/// Parses "D=AB,E=AC" style generator lists.
std::vector<GeneratorWord> parse_generators(std::string_view text);
std::string format_generators(const std::vector<GeneratorWord>& generators);

/// Two-level run matrix in +-1 coding.
struct DesignPlan {
  std::size_t k = 0;
  std::size_t p = 0;
  std::vector<std::vector<int>> runs;  // M rows of k entries
  std::vector<GeneratorWord> generators;
  std::optional<int> resolution;  // nullopt for full factorials (no defining words)

  std::size_t run_count() const { return runs.size(); }
  std::vector<int> column(std::size_t factor) const;
};

/// All 2^k sign combinations; factor A alternates slowest.
DesignPlan full_factorial(std::size_t k);

/// 2^(k-p) design: full factorial over the first k-p base factors with one
/// appended column per generator. Generators must target the last p factors
/// and reference only base factors.
DesignPlan fractional_factorial(std::size_t k, std::vector<GeneratorWord> generators);

struct AliasStructure {
  std::vector<EffectWord> defining_relation;  // every nonidentity word, sorted
  std::optional<int> resolution;
  std::vector<std::vector<EffectWord>> groups;  // main effects and 2FIs grouped by column
  bool mains_unaliased = true;                  // no main effect shares a column with another main
};

/// Groups main effects and two-factor interactions whose sign columns are
/// identical or negated, and recomputes the resolution from the defining relation.
AliasStructure alias_structure(DesignPlan& plan);

/// Maps each run to `replicates` concrete settings by sampling a level
/// uniformly from the factor's low (-1) or high (+1) quartile set.
/// Settings are emitted row by row, replicates of a row adjacent.
std::vector<FactorSetting> realize(const DesignPlan& plan, const FactorSpace& space,
                                   std::size_t replicates, Rng& rng);

std::string plan_to_csv(const DesignPlan& plan);
nlohmann::json plan_sidecar_json(DesignPlan& plan);

}  // namespace doelens
