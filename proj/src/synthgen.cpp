#include "doelens/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include "doelens/parallel.hpp"
#include "doelens/rng.hpp"

namespace doelens {
namespace {

struct Vec2 {
  double x = 0, y = 0;
};

FactorSpace make_dsprites_space() {
  return FactorSpace({{"shape", FactorRole::semantic, 3, {"square", "ellipse", "heart"}},
                      {"scale", FactorRole::nuisance, 6, {}},
                      {"orientation", FactorRole::nuisance, 40, {}},
                      {"posX", FactorRole::nuisance, 32, {}},
                      {"posY", FactorRole::nuisance, 32, {}}});
}

FactorSpace make_colored_space() {
  return FactorSpace({{"shape", FactorRole::semantic, 3, {"square", "circle", "triangle"}},
                      {"color", FactorRole::nuisance, 3, {"red", "green", "blue"}},
                      {"size", FactorRole::nuisance, 3, {"small", "medium", "large"}},
                      {"style", FactorRole::nuisance, 3, {"clean", "rough", "sketchy"}},
                      {"position", FactorRole::nuisance, 4, {"top_left", "top_right", "bottom_left", "bottom_right"}}});
}

void check_space(const FactorSpace& expected, const FactorSetting& setting, const char* what) {
  if (setting.size() != expected.size())
    throw std::invalid_argument(std::string("setting is not from the ") + what + " space");
  validate_setting(expected, setting);
}

bool inside_heart(double u, double v) {
  // (x^2 + y^2 - 1)^3 - x^2 y^3 <= 0, fitted to the unit box with y up.
  const double x = u * 1.2;
  const double y = -v * 1.2 + 0.125;
  const double a = x * x + y * y - 1.0;
  return a * a * a - x * x * y * y * y <= 0.0;
}

bool inside_dsprite(int shape, double u, double v) {
  switch (shape) {
    case 0: return std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
    case 1: return u * u + 4.0 * v * v <= 1.0;
    default: return inside_heart(u, v);
  }
}

// Outline of a unit shape (circumradius / half-side 1), evenly subdivided.
std::vector<Vec2> unit_outline(int shape) {
  constexpr int vertices = 48;
  std::vector<Vec2> out;
  out.reserve(vertices);
  if (shape == 1) {
    for (int i = 0; i < vertices; ++i) {
      const double t = 2.0 * std::numbers::pi * i / vertices;
      out.push_back({std::cos(t), std::sin(t)});
    }
    return out;
  }
  std::vector<Vec2> corners;
  if (shape == 0) {
    corners = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
  } else {
    for (double deg : {-90.0, 30.0, 150.0}) {
      const double t = deg * std::numbers::pi / 180.0;
      corners.push_back({std::cos(t), std::sin(t)});
    }
  }
  const int per_edge = vertices / static_cast<int>(corners.size());
  for (std::size_t c = 0; c < corners.size(); ++c) {
    const Vec2 a = corners[c], b = corners[(c + 1) % corners.size()];
    for (int i = 0; i < per_edge; ++i) {
      const double t = static_cast<double>(i) / per_edge;
      out.push_back({a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t});
    }
  }
  return out;
}

bool inside_polygon(const std::vector<Vec2>& poly, Vec2 p) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2 a = poly[i], b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

// Distance from p to the closed polyline and the arc length at the nearest point.
std::pair<double, double> nearest_on_outline(const std::vector<Vec2>& poly, Vec2 p) {
  double best = 1e300, best_arc = 0.0, arc = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2 a = poly[i], b = poly[(i + 1) % poly.size()];
    const double ex = b.x - a.x, ey = b.y - a.y;
    const double len2 = ex * ex + ey * ey;
    const double len = std::sqrt(len2);
    double t = len2 > 0 ? ((p.x - a.x) * ex + (p.y - a.y) * ey) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = a.x + ex * t - p.x, dy = a.y + ey * t - p.y;
    const double d = std::sqrt(dx * dx + dy * dy);
    if (d < best) {
      best = d;
      best_arc = arc + t * len;
    }
    arc += len;
  }
  return {best, best_arc};
}

constexpr std::array<std::array<std::uint8_t, 3>, 3> palette = {{{230, 40, 40}, {40, 200, 60}, {50, 80, 230}}};
constexpr std::array<Vec2, 4> grid_centers = {{{24, 24}, {40, 24}, {24, 40}, {40, 40}}};

}  // namespace

std::string_view to_string(GeneratorKind kind) {
  return kind == GeneratorKind::dsprites ? "dsprites" : "colored_shapes";
}

GeneratorKind parse_generator_kind(std::string_view text) {
  if (text == "dsprites") return GeneratorKind::dsprites;
  if (text == "colored_shapes" || text == "colored") return GeneratorKind::colored_shapes;
  throw std::invalid_argument("unknown generator '" + std::string(text) + "'");
}

void validate(const GeneratorConfig& cfg) {
  if (!(cfg.epsilon >= 0.0 && cfg.epsilon < 1.0))
    throw std::invalid_argument("entanglement epsilon must lie in [0, 1)");
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::biased_train: return "biased_train";
    case Provenance::audit_val: return "audit_val";
    case Provenance::final_test: return "final_test";
    case Provenance::type1_correction: return "type1_correction";
    case Provenance::probe: return "probe";
    case Provenance::balanced: return "balanced";
    case Provenance::pairs: return "pairs";
  }
  return "balanced";
}

Provenance parse_provenance(std::string_view text) {
  for (auto p : {Provenance::biased_train, Provenance::audit_val, Provenance::final_test,
                 Provenance::type1_correction, Provenance::probe, Provenance::balanced, Provenance::pairs})
    if (to_string(p) == text) return p;
  throw std::invalid_argument("unknown provenance '" + std::string(text) + "'");
}

std::size_t LabeledImage::foreground_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < pixels.size(); i += channels) {
    bool on = false;
    for (int c = 0; c < channels; ++c) on = on || pixels[i + c] != 0;
    n += on;
  }
  return n;
}

const FactorSpace& dsprites_space() {
  static const FactorSpace space = make_dsprites_space();
  return space;
}

const FactorSpace& colored_shapes_space() {
  static const FactorSpace space = make_colored_space();
  return space;
}

const FactorSpace& generator_space(GeneratorKind kind) {
  return kind == GeneratorKind::dsprites ? dsprites_space() : colored_shapes_space();
}

LabeledImage render_dsprites_like(const FactorSetting& setting) {
  check_space(dsprites_space(), setting, "dSprites-like");
  const int shape = setting[0];
  const double half = 16.0 * (0.5 + 0.1 * setting[1]);
  const double angle = 2.0 * std::numbers::pi * setting[2] / 40.0;
  const double cx = 16.0 + setting[3] * 32.0 / 31.0;
  const double cy = 16.0 + setting[4] * 32.0 / 31.0;
  const double c = std::cos(angle), s = std::sin(angle);

  LabeledImage img;
  img.height = img.width = canvas_size;
  img.channels = 1;
  img.pixels.assign(canvas_size * canvas_size, 0);
  img.label = shape;
  img.setting = setting;
  for (int y = 0; y < canvas_size; ++y) {
    for (int x = 0; x < canvas_size; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      const double u = (dx * c + dy * s) / half;
      const double v = (-dx * s + dy * c) / half;
      if (inside_dsprite(shape, u, v)) img.pixels[y * canvas_size + x] = 255;
    }
  }
  return img;
}

double rendered_half_size(int size_level, int style_level, double epsilon) {
  static constexpr std::array<double, 3> base = {8.0, 12.0, 16.0};
  const double factor = style_level == 1 ? 1.0 + epsilon : style_level == 2 ? 1.0 - 0.7 * epsilon : 1.0;
  return base.at(size_level) * factor;
}

LabeledImage render_colored_shape(const FactorSetting& setting, const GeneratorConfig& cfg) {
  check_space(colored_shapes_space(), setting, "colored-shapes");
  validate(cfg);
  const int shape = setting[0], color = setting[1], size = setting[2], style = setting[3];
  const Vec2 center = grid_centers[setting[4]];
  const double radius = rendered_half_size(size, style, cfg.epsilon);

  std::vector<Vec2> poly = unit_outline(shape);
  if (style == 1) {
    Rng rng = make_rng(setting_key(colored_shapes_space(), setting), 0x5247);
    std::uniform_real_distribution<double> jitter(-0.06, 0.06);
    for (auto& p : poly) {
      const double f = 1.0 + jitter(rng);
      p.x *= f;
      p.y *= f;
    }
  }
  for (auto& p : poly) p = {center.x + p.x * radius, center.y + p.y * radius};

  LabeledImage img;
  img.height = img.width = canvas_size;
  img.channels = 3;
  img.pixels.assign(canvas_size * canvas_size * 3, 0);
  img.label = shape;
  img.setting = setting;

  const double reach = radius * 1.2 + 2.0;
  const int x0 = std::max(0, static_cast<int>(std::floor(center.x - reach)));
  const int x1 = std::min(canvas_size - 1, static_cast<int>(std::ceil(center.x + reach)));
  const int y0 = std::max(0, static_cast<int>(std::floor(center.y - reach)));
  const int y1 = std::min(canvas_size - 1, static_cast<int>(std::ceil(center.y + reach)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const Vec2 p{x + 0.5, y + 0.5};
      const bool inside = inside_polygon(poly, p);
      bool on = false;
      if (style == 2) {
        const auto [dist, arc] = nearest_on_outline(poly, p);
        const bool dash = dist <= 1.0 && std::fmod(arc, 6.0) < 3.5;
        const bool fill = inside && dist > 1.0 && (x + y) % 4 != 0;
        on = dash || fill;
      } else {
        on = inside;
      }
      if (!on) continue;
      auto* px = &img.pixels[(static_cast<std::size_t>(y) * canvas_size + x) * 3];
      for (int ch = 0; ch < 3; ++ch) px[ch] = palette[color][ch];
    }
  }
  return img;
}

LabeledImage render(const GeneratorConfig& cfg, const FactorSetting& setting) {
  return cfg.kind == GeneratorKind::dsprites ? render_dsprites_like(setting) : render_colored_shape(setting, cfg);
}

Dataset render_dataset(const GeneratorConfig& cfg, const std::vector<FactorSetting>& settings,
                       Provenance provenance, std::uint64_t seed) {
  validate(cfg);
  Dataset data;
  data.space = generator_space(cfg.kind);
  data.generator = cfg;
  data.provenance = provenance;
  data.seed = seed;
  data.samples.resize(settings.size());
  parallel_for(settings.size(), [&](std::size_t i) { data.samples[i] = render(cfg, settings[i]); });
  return data;
}

Dataset build_biased_trainset(std::size_t n, std::uint64_t seed) {
  const auto& space = dsprites_space();
  static constexpr std::array<std::pair<int, int>, 3> bands = {{{0, 10}, {11, 21}, {22, 31}}};
  std::vector<FactorSetting> settings(n);
  for (std::size_t j = 0; j < n; ++j) {
    Rng rng = make_rng(seed, j);
    const int shape = static_cast<int>(j % 3);
    std::uniform_int_distribution<int> posx(bands[shape].first, bands[shape].second);
    std::uniform_int_distribution<int> orientation(0, 4);
    PartialSetting fixed{{0, shape}};
    fixed[3] = posx(rng);
    fixed[2] = orientation(rng);
    settings[j] = sample_setting(space, fixed, rng);
  }
  return render_dataset({GeneratorKind::dsprites, 0.0}, settings, Provenance::biased_train, seed);
}

namespace {

std::vector<FactorSetting> balanced_settings(const FactorSpace& space, std::size_t n, std::uint64_t seed) {
  const auto semantic = space.semantic_index();
  if (!semantic) throw std::invalid_argument("balanced sampling needs a semantic factor");
  const int classes = space[*semantic].level_count;
  std::vector<FactorSetting> settings(n);
  for (std::size_t j = 0; j < n; ++j) {
    Rng rng = make_rng(seed, j);
    settings[j] = sample_setting(space, {{*semantic, static_cast<int>(j % classes)}}, rng);
  }
  return settings;
}

}  // namespace

Dataset build_balanced_dataset(const GeneratorConfig& cfg, std::size_t n, std::uint64_t seed, Provenance provenance) {
  return render_dataset(cfg, balanced_settings(generator_space(cfg.kind), n, seed), provenance, seed);
}

std::pair<Dataset, Dataset> build_balanced_splits(std::size_t n_each, std::uint64_t seed, const GeneratorConfig& cfg) {
  const auto& space = generator_space(cfg.kind);
  if (n_each < 1) throw std::invalid_argument("split size must be >= 1");
  if (2 * static_cast<std::uint64_t>(n_each) > space.setting_count())
    throw std::invalid_argument("requested splits of " + std::to_string(n_each) + " exceed the pool of " +
                                std::to_string(space.setting_count()) + " distinct settings");
  const auto semantic = *space.semantic_index();
  const int classes = space[semantic].level_count;

  const std::uint64_t audit_seed = derive_seed(seed, 1);
  const std::uint64_t test_seed = derive_seed(seed, 2);
  auto audit = balanced_settings(space, n_each, audit_seed);
  std::set<std::uint64_t> taken;
  for (const auto& s : audit) taken.insert(setting_key(space, s));

  constexpr int max_attempts = 10000;
  std::vector<FactorSetting> test(n_each);
  for (std::size_t j = 0; j < n_each; ++j) {
    Rng rng = make_rng(test_seed, j);
    int attempt = 0;
    do {
      if (++attempt > max_attempts)
        throw std::invalid_argument("could not draw a final-test setting disjoint from the audit split");
      test[j] = sample_setting(space, {{semantic, static_cast<int>(j % classes)}}, rng);
    } while (taken.contains(setting_key(space, test[j])));
  }
  return {render_dataset(cfg, audit, Provenance::audit_val, audit_seed),
          render_dataset(cfg, test, Provenance::final_test, test_seed)};
}

Dataset concat(const Dataset& a, const Dataset& b, Provenance provenance) {
  if (!(a.space == b.space)) throw std::invalid_argument("cannot concatenate datasets over different spaces");
  Dataset out = a;
  out.provenance = provenance;
  out.samples.insert(out.samples.end(), b.samples.begin(), b.samples.end());
  return out;
}

LevelHistogram level_histogram(const Dataset& data) {
  LevelHistogram hist(data.space.size());
  for (std::size_t f = 0; f < data.space.size(); ++f) hist[f].assign(data.space[f].level_count, 0);
  for (const auto& s : data.samples)
    for (std::size_t f = 0; f < data.space.size(); ++f) ++hist[f][s.setting[f]];
  return hist;
}

nlohmann::json histogram_to_json(const FactorSpace& space, const LevelHistogram& hist) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t f = 0; f < space.size(); ++f) j[space[f].name] = hist.at(f);
  return j;
}

LevelHistogram histogram_from_json(const FactorSpace& space, const nlohmann::json& j) {
  LevelHistogram hist(space.size());
  for (std::size_t f = 0; f < space.size(); ++f) {
    if (!j.contains(space[f].name)) throw std::invalid_argument("histogram lacks factor '" + space[f].name + "'");
    hist[f] = j.at(space[f].name).get<std::vector<std::size_t>>();
    if (hist[f].size() != static_cast<std::size_t>(space[f].level_count))
      throw std::invalid_argument("histogram for '" + space[f].name + "' has wrong level count");
  }
  return hist;
}

}  // namespace doelens
