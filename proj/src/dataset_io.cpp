#include "doelens/dataset_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace doelens {
namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  if (!fs::exists(path)) throw std::invalid_argument("missing file " + path.string());
  std::ifstream in(path, mode);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return in;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

int to_int(const std::string& s, const fs::path& where) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw std::runtime_error("malformed integer '" + s + "' in " + where.string());
  }
}

}  // namespace

nlohmann::json read_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_text(const std::string& text, const fs::path& path) {
  auto out = open_out(path);
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void save_dataset(const Dataset& data, const fs::path& dir) {
  fs::create_directories(dir);
  int h = canvas_size, w = canvas_size, c = data.generator.kind == GeneratorKind::dsprites ? 1 : 3;
  if (!data.empty()) {
    h = data.samples[0].height;
    w = data.samples[0].width;
    c = data.samples[0].channels;
  }
  nlohmann::json manifest = {{"space", to_json(data.space)},
                             {"provenance", to_string(data.provenance)},
                             {"generator", to_string(data.generator.kind)},
                             {"epsilon", data.generator.epsilon},
                             {"seed", data.seed},
                             {"count", data.size()},
                             {"height", h},
                             {"width", w},
                             {"channels", c}};
  write_json(manifest, dir / "manifest.json");

  auto bin = open_out(dir / "images.bin", std::ios::out | std::ios::binary);
  std::ostringstream csv;
  csv << "index,label";
  for (const auto& f : data.space.factors()) csv << ',' << f.name;
  csv << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& img = data.samples[i];
    if (img.height != h || img.width != w || img.channels != c)
      throw std::invalid_argument("dataset images must share one shape");
    bin.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    csv << i << ',' << img.label;
    for (int v : img.setting.values) csv << ',' << v;
    csv << '\n';
  }
  if (!bin) throw std::runtime_error("failed writing images.bin");
  write_text(csv.str(), dir / "labels.csv");
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::invalid_argument("dataset directory not found: " + dir.string());
  const auto manifest = read_json(dir / "manifest.json");
  Dataset data;
  std::size_t count = 0;
  int h = 0, w = 0, c = 0;
  try {
    data.space = factor_space_from_json(manifest.at("space"));
    data.provenance = parse_provenance(manifest.at("provenance").get<std::string>());
    data.generator.kind = parse_generator_kind(manifest.at("generator").get<std::string>());
    data.generator.epsilon = manifest.value("epsilon", 0.0);
    data.seed = manifest.at("seed").get<std::uint64_t>();
    count = manifest.at("count").get<std::size_t>();
    h = manifest.at("height").get<int>();
    w = manifest.at("width").get<int>();
    c = manifest.at("channels").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed manifest in " + dir.string() + ": " + e.what());
  }
  if (h < 1 || w < 1 || c < 1) throw std::runtime_error("invalid image shape in manifest");

  auto bin = open_in(dir / "images.bin", std::ios::in | std::ios::binary);
  auto csv = open_in(dir / "labels.csv");
  std::string line;
  std::getline(csv, line);
  const auto header = split_csv(line);
  if (header.size() != data.space.size() + 2) throw std::runtime_error("labels.csv header does not match the space");
  const std::size_t bytes = static_cast<std::size_t>(h) * w * c;
  data.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(csv, line)) throw std::runtime_error("labels.csv has fewer rows than the manifest count");
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) throw std::runtime_error("labels.csv row " + std::to_string(i) + " is malformed");
    LabeledImage img;
    img.height = h;
    img.width = w;
    img.channels = c;
    img.label = to_int(cells[1], dir / "labels.csv");
    for (std::size_t f = 0; f < data.space.size(); ++f) img.setting.values.push_back(to_int(cells[f + 2], dir));
    validate_setting(data.space, img.setting);
    img.pixels.resize(bytes);
    bin.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(bytes));
    if (!bin) throw std::runtime_error("images.bin is truncated");
    data.samples.push_back(std::move(img));
  }
  return data;
}

void save_pairs(const FactorSpace& space, const GeneratorConfig& generator, std::uint64_t seed,
                const std::vector<CounterfactualPair>& pairs, const fs::path& dir) {
  Dataset images;
  images.space = space;
  images.generator = generator;
  images.provenance = Provenance::pairs;
  images.seed = seed;
  std::ostringstream csv;
  csv << "index_a,index_b,varied_factor\n";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    images.samples.push_back(pairs[i].a);
    images.samples.push_back(pairs[i].b);
    csv << 2 * i << ',' << 2 * i + 1 << ',' << space[pairs[i].varied_factor].name << '\n';
  }
  save_dataset(images, dir);
  write_text(csv.str(), dir / "pairs.csv");
}

std::vector<CounterfactualPair> load_pairs(const fs::path& dir) {
  const Dataset images = load_dataset(dir);
  auto csv = open_in(dir / "pairs.csv");
  std::string line;
  std::getline(csv, line);
  std::vector<CounterfactualPair> pairs;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 3) throw std::runtime_error("pairs.csv row is malformed: " + line);
    const auto ia = static_cast<std::size_t>(to_int(cells[0], dir / "pairs.csv"));
    const auto ib = static_cast<std::size_t>(to_int(cells[1], dir / "pairs.csv"));
    if (ia >= images.size() || ib >= images.size()) throw std::runtime_error("pairs.csv index out of range");
    pairs.push_back({images.samples[ia], images.samples[ib], images.space.index_of(cells[2])});
  }
  return pairs;
}

}  // namespace doelens
