#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "doelens/factor_space.hpp"

namespace doelens {

enum class GeneratorKind { dsprites, colored_shapes };

std::string_view to_string(GeneratorKind kind);
GeneratorKind parse_generator_kind(std::string_view text);

/// epsilon controls style->size leakage of the colored-shapes generator;
/// 0 is the perfect generator. Ignored by the dSprites-like renderer.
struct GeneratorConfig {
  GeneratorKind kind = GeneratorKind::dsprites;
  double epsilon = 0.0;

  bool operator==(const GeneratorConfig&) const = default;
};

void validate(const GeneratorConfig& cfg);

struct LabeledImage {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;  // row-major H x W x C
  int label = 0;
  FactorSetting setting;

  std::uint8_t at(int y, int x, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t foreground_count() const;
};

enum class Provenance { biased_train, audit_val, final_test, type1_correction, probe, balanced, pairs };

std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view text);

struct Dataset {
  FactorSpace space;
  GeneratorConfig generator;
  Provenance provenance = Provenance::balanced;
  std::uint64_t seed = 0;
  std::vector<LabeledImage> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

/// shape(3, semantic) scale(6) orientation(40) posX(32) posY(32).
const FactorSpace& dsprites_space();
/// shape(3, semantic) color(3) size(3) style(3) position(4).
const FactorSpace& colored_shapes_space();
const FactorSpace& generator_space(GeneratorKind kind);

inline constexpr int canvas_size = 64;

/// 64x64 grayscale white shape on black. Square, ellipse or heart with
/// bounding box 32 * (0.5 + 0.1 * scale) px, rotated by 2*pi*orientation/40,
/// centred at 16 + pos * 32/31 along each axis.
LabeledImage render_dsprites_like(const FactorSetting& setting);

/// Rendered half-size (px) of a colored shape: base 8/12/16 scaled by
/// 1, 1+epsilon, 1-0.7*epsilon for clean, rough, sketchy.
double rendered_half_size(int size_level, int style_level, double epsilon);

/// 64x64 RGB colored square, circle or triangle on black, in one of four
/// grid positions. Clean is a solid fill; rough jitters the outline with a
/// seed taken from the setting; sketchy is a dashed outline over a partial fill.
LabeledImage render_colored_shape(const FactorSetting& setting, const GeneratorConfig& cfg);

LabeledImage render(const GeneratorConfig& cfg, const FactorSetting& setting);

/// Renders settings in parallel; output order matches input order.
Dataset render_dataset(const GeneratorConfig& cfg, const std::vector<FactorSetting>& settings,
                       Provenance provenance, std::uint64_t seed);

/// Planted-bias dSprites-like training set: shape 0/1/2 confined to
/// posX [0,10] / [11,21] / [22,31], orientation confined to [0,4], other
/// factors uniform. Sample j has label j mod 3.
Dataset build_biased_trainset(std::size_t n, std::uint64_t seed);

/// Class-balanced dataset with every nuisance factor uniform.
Dataset build_balanced_dataset(const GeneratorConfig& cfg, std::size_t n, std::uint64_t seed,
                               Provenance provenance = Provenance::balanced);

/// Disjoint class-balanced audit-validation and final-test splits. No full
/// factor setting appears in both. Throws std::invalid_argument when
/// 2 * n_each exceeds the number of distinct settings.
std::pair<Dataset, Dataset> build_balanced_splits(std::size_t n_each, std::uint64_t seed,
                                                  const GeneratorConfig& cfg = {});

/// Concatenation; both datasets must share a space.
Dataset concat(const Dataset& a, const Dataset& b, Provenance provenance);

/// Per-factor, per-level sample counts.
using LevelHistogram = std::vector<std::vector<std::size_t>>;
LevelHistogram level_histogram(const Dataset& data);

nlohmann::json histogram_to_json(const FactorSpace& space, const LevelHistogram& hist);
LevelHistogram histogram_from_json(const FactorSpace& space, const nlohmann::json& j);

}  // namespace doelens
