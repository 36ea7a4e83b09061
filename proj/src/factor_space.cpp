#include "doelens/factor_space.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace doelens {

std::string_view to_string(FactorRole role) {
  return role == FactorRole::semantic ? "semantic" : "nuisance";
}

FactorRole parse_factor_role(std::string_view text) {
  if (text == "semantic") return FactorRole::semantic;
  if (text == "nuisance") return FactorRole::nuisance;
  throw std::invalid_argument("unknown factor role '" + std::string(text) + "'");
}

FactorSpace::FactorSpace(std::vector<FactorSpec> factors) : factors_(std::move(factors)) {
  if (factors_.empty()) throw std::invalid_argument("factor space needs at least one factor");
  std::set<std::string> names;
  for (const auto& f : factors_) {
    if (f.name.empty()) throw std::invalid_argument("factor name must be nonempty");
    if (f.level_count < 2)
      throw std::invalid_argument("factor '" + f.name + "' needs at least 2 levels");
    if (!f.level_labels.empty() && f.level_labels.size() != static_cast<std::size_t>(f.level_count))
      throw std::invalid_argument("factor '" + f.name + "' has mismatched level labels");
    if (!names.insert(f.name).second)
      throw std::invalid_argument("duplicate factor name '" + f.name + "'");
  }
}

std::optional<std::size_t> FactorSpace::find(std::string_view name) const {
  for (std::size_t i = 0; i < factors_.size(); ++i)
    if (factors_[i].name == name) return i;
  return std::nullopt;
}

std::size_t FactorSpace::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw std::out_of_range("no factor named '" + std::string(name) + "'");
}

std::optional<std::size_t> FactorSpace::semantic_index() const {
  for (std::size_t i = 0; i < factors_.size(); ++i)
    if (factors_[i].role == FactorRole::semantic) return i;
  return std::nullopt;
}

std::uint64_t FactorSpace::setting_count() const {
  std::uint64_t n = 1;
  for (const auto& f : factors_) n *= static_cast<std::uint64_t>(f.level_count);
  return n;
}

void validate_setting(const FactorSpace& space, const FactorSetting& setting) {
  if (setting.size() != space.size())
    throw std::invalid_argument("setting has " + std::to_string(setting.size()) +
                                " values, space has " + std::to_string(space.size()) + " factors");
  for (std::size_t i = 0; i < space.size(); ++i)
    if (setting[i] < 0 || setting[i] >= space[i].level_count)
      throw std::invalid_argument("level " + std::to_string(setting[i]) + " out of range for factor '" +
                                  space[i].name + "'");
}

std::uint64_t setting_key(const FactorSpace& space, const FactorSetting& setting) {
  std::uint64_t key = 0;
  for (std::size_t i = 0; i < space.size(); ++i)
    key = key * static_cast<std::uint64_t>(space[i].level_count) + static_cast<std::uint64_t>(setting[i]);
  return key;
}

LevelProjection two_level_projection(const FactorSpace& space, std::size_t factor_index) {
  if (factor_index >= space.size())
    throw std::out_of_range("factor index " + std::to_string(factor_index) + " out of range");
  const int levels = space[factor_index].level_count;
  const int quartile = std::max(1, levels / 4);
  LevelProjection out;
  for (int i = 0; i < quartile; ++i) {
    out.low.push_back(i);
    out.high.push_back(levels - quartile + i);
  }
  return out;
}

FactorSetting sample_setting(const FactorSpace& space, const PartialSetting& fixed, Rng& rng) {
  for (const auto& [index, level] : fixed) {
    if (index >= space.size()) throw std::out_of_range("fixed factor index out of range");
    if (level < 0 || level >= space[index].level_count)
      throw std::invalid_argument("fixed level " + std::to_string(level) + " out of range for factor '" +
                                  space[index].name + "'");
  }
  FactorSetting s;
  s.values.resize(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (auto it = fixed.find(i); it != fixed.end()) {
      s[i] = it->second;
    } else {
      std::uniform_int_distribution<int> dist(0, space[i].level_count - 1);
      s[i] = dist(rng);
    }
  }
  return s;
}

nlohmann::json to_json(const FactorSpace& space) {
  nlohmann::json factors = nlohmann::json::array();
  for (const auto& f : space.factors()) {
    nlohmann::json j{{"name", f.name}, {"role", to_string(f.role)}, {"levels", f.level_count}};
    if (!f.level_labels.empty()) j["labels"] = f.level_labels;
    factors.push_back(std::move(j));
  }
  return {{"factors", std::move(factors)}};
}

FactorSpace factor_space_from_json(const nlohmann::json& j) {
  const auto& arr = j.contains("factors") ? j.at("factors") : j;
  if (!arr.is_array()) throw std::invalid_argument("factor space JSON must hold a 'factors' array");
  std::vector<FactorSpec> specs;
  for (const auto& f : arr) {
    FactorSpec spec;
    spec.name = f.at("name").get<std::string>();
    spec.role = parse_factor_role(f.value("role", std::string("nuisance")));
    spec.level_count = f.at("levels").get<int>();
    if (f.contains("labels")) spec.level_labels = f.at("labels").get<std::vector<std::string>>();
    specs.push_back(std::move(spec));
  }
  return FactorSpace(std::move(specs));
}

}  // namespace doelens
