#pragma once

#include <filesystem>
#include <vector>

#include "doelens/nnet.hpp"
#include "doelens/synthgen.hpp"

namespace doelens {

/// Dataset directory: manifest.json (space, provenance, generator, seed,
/// image shape, count), images.bin (raw HWC uint8, concatenated) and
/// labels.csv (index, label, one column per factor).
void save_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

/// Pair directory: a dataset holding a then b images interleaved
/// (2i, 2i+1) plus pairs.csv (index_a, index_b, varied_factor).
void save_pairs(const FactorSpace& space, const GeneratorConfig& generator, std::uint64_t seed,
                const std::vector<CounterfactualPair>& pairs, const std::filesystem::path& dir);
std::vector<CounterfactualPair> load_pairs(const std::filesystem::path& dir);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const nlohmann::json& j, const std::filesystem::path& path);
void write_text(const std::string& text, const std::filesystem::path& path);

}  // namespace doelens
