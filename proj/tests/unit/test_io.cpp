#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "doelens/checkpoint.hpp"
#include "doelens/dataset_io.hpp"
#include "doelens/prescribe.hpp"

using namespace doelens;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void check_same(const Dataset& a, const Dataset& b) {
  CHECK(a.space == b.space);
  CHECK(a.generator == b.generator);
  CHECK(a.provenance == b.provenance);
  CHECK(a.seed == b.seed);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.samples[i].pixels == b.samples[i].pixels);
    CHECK(a.samples[i].setting == b.samples[i].setting);
    CHECK(a.samples[i].label == b.samples[i].label);
  }
}

}  // namespace

TEST_CASE("dataset directory round trip") {
  TempDir tmp("doelens_io_dataset");
  auto gray = build_biased_trainset(25, 3);
  save_dataset(gray, tmp.path / "gray");
  check_same(gray, load_dataset(tmp.path / "gray"));
  CHECK(fs::file_size(tmp.path / "gray" / "images.bin") == 25u * 64 * 64);

  auto rgb = build_balanced_dataset({GeneratorKind::colored_shapes, 0.3}, 12, 4, Provenance::audit_val);
  save_dataset(rgb, tmp.path / "rgb");
  check_same(rgb, load_dataset(tmp.path / "rgb"));

  std::ifstream csv(tmp.path / "rgb" / "labels.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "index,label,shape,color,size,style,position");

  auto manifest = read_json(tmp.path / "rgb" / "manifest.json");
  CHECK(manifest["count"] == 12);
  CHECK(manifest["provenance"] == "audit_val");
}

TEST_CASE("dataset loading errors") {
  TempDir tmp("doelens_io_errors");
  CHECK_THROWS_AS(load_dataset(tmp.path / "absent"), std::invalid_argument);
  auto data = build_balanced_dataset({}, 5, 1);
  save_dataset(data, tmp.path / "d");
  fs::resize_file(tmp.path / "d" / "images.bin", 100);
  CHECK_THROWS_AS(load_dataset(tmp.path / "d"), std::runtime_error);
  save_dataset(data, tmp.path / "e");
  { std::ofstream(tmp.path / "e" / "manifest.json") << "{ not json"; }
  CHECK_THROWS_AS(load_dataset(tmp.path / "e"), std::runtime_error);
  CHECK_THROWS_AS(read_json(tmp.path / "nothing.json"), std::invalid_argument);
}

TEST_CASE("pair directory round trip") {
  TempDir tmp("doelens_io_pairs");
  const auto real = build_biased_trainset(60, 2);
  GapDiagnosis d;
  for (const auto& f : dsprites_space().factors()) {
    FactorDiagnosis fd;
    fd.factor = f.name;
    fd.classification = f.name == "posX" ? GapType::type_ii : GapType::correct;
    d.factors.push_back(fd);
  }
  auto plan = build_plan(dsprites_space(), d, 0, 7);
  auto pairs = generate_type2_pairs(plan, level_histogram(real), {}, 5);
  save_pairs(dsprites_space(), {}, 5, pairs, tmp.path / "p");
  auto back = load_pairs(tmp.path / "p");
  REQUIRE(back.size() == 7);
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(back[i].varied_factor == 3);
    CHECK(back[i].a.pixels == pairs[i].a.pixels);
    CHECK(back[i].b.setting == pairs[i].b.setting);
  }
  std::ifstream csv(tmp.path / "p" / "pairs.csv");
  std::string header, first;
  std::getline(csv, header);
  std::getline(csv, first);
  CHECK(header == "index_a,index_b,varied_factor");
  CHECK(first == "0,1,posX");
}

TEST_CASE("checkpoint round trip") {
  TempDir tmp("doelens_io_ckpt");
  auto params = nnet::init_params<float>(nnet::Architecture::dsprites_cnn(0.25), 9);
  params.buffers[0].values[0] = 0.125f;
  save_checkpoint(params, tmp.path / "m.ckpt", {{"seed", 9}});
  auto ck = load_checkpoint(tmp.path / "m.ckpt");
  CHECK(ck.params.arch == params.arch);
  CHECK(ck.metadata["seed"] == 9);
  REQUIRE(ck.params.weights.size() == params.weights.size());
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    CHECK(ck.params.weights[i].name == params.weights[i].name);
    CHECK(ck.params.weights[i].values == params.weights[i].values);
  }
  CHECK(ck.params.buffers[0].values == params.buffers[0].values);

  CHECK_THROWS_AS(load_checkpoint(tmp.path / "none.ckpt"), std::invalid_argument);
  { std::ofstream(tmp.path / "bad.ckpt") << "NOTACKPT"; }
  CHECK_THROWS_AS(load_checkpoint(tmp.path / "bad.ckpt"), std::runtime_error);
  fs::copy_file(tmp.path / "m.ckpt", tmp.path / "cut.ckpt");
  fs::resize_file(tmp.path / "cut.ckpt", fs::file_size(tmp.path / "m.ckpt") - 10);
  CHECK_THROWS_AS(load_checkpoint(tmp.path / "cut.ckpt"), std::runtime_error);
}
