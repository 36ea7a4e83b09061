#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "doelens/rng.hpp"

namespace doelens {

enum class FactorRole { semantic, nuisance };

std::string_view to_string(FactorRole role);
FactorRole parse_factor_role(std::string_view text);

struct FactorSpec {
  std::string name;
  FactorRole role = FactorRole::nuisance;
  int level_count = 2;
  std::vector<std::string> level_labels;  // empty or exactly level_count entries

  bool operator==(const FactorSpec&) const = default;
};

/// Ordered, named discrete factors. Levels of factor i are 0..level_count-1.
class FactorSpace {
 public:
  FactorSpace() = default;
  explicit FactorSpace(std::vector<FactorSpec> factors);

  std::size_t size() const { return factors_.size(); }
  const FactorSpec& operator[](std::size_t i) const { return factors_.at(i); }
  const std::vector<FactorSpec>& factors() const { return factors_; }

  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  /// First factor with the semantic role, if any.
  std::optional<std::size_t> semantic_index() const;

  /// Number of distinct settings (product of level counts).
  std::uint64_t setting_count() const;

  bool operator==(const FactorSpace&) const = default;

 private:
  std::vector<FactorSpec> factors_;
};

struct FactorSetting {
  std::vector<int> values;

  std::size_t size() const { return values.size(); }
  int operator[](std::size_t i) const { return values[i]; }
  int& operator[](std::size_t i) { return values[i]; }

  auto operator<=>(const FactorSetting&) const = default;
  bool operator==(const FactorSetting&) const = default;
};

/// Throws std::invalid_argument when the setting does not belong to the space.
void validate_setting(const FactorSpace& space, const FactorSetting& setting);

/// Mixed-radix encoding of a setting, unique within its space.
std::uint64_t setting_key(const FactorSpace& space, const FactorSetting& setting);

struct LevelProjection {
  std::vector<int> low;
  std::vector<int> high;
};

/// Maps a factor onto two levels: the first and last quartile of its range,
/// each of size max(1, floor(level_count / 4)).
LevelProjection two_level_projection(const FactorSpace& space, std::size_t factor_index);

using PartialSetting = std::map<std::size_t, int>;

/// Draws every factor not in `fixed` uniformly over its levels.
FactorSetting sample_setting(const FactorSpace& space, const PartialSetting& fixed, Rng& rng);

nlohmann::json to_json(const FactorSpace& space);
FactorSpace factor_space_from_json(const nlohmann::json& j);

}  // namespace doelens
