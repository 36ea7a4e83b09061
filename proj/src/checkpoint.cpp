#include "doelens/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace doelens {
namespace fs = std::filesystem;

namespace {

constexpr char magic[8] = {'D', 'O', 'E', 'L', 'C', 'K', 'P', 'T'};
static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  if (!in) throw std::runtime_error("checkpoint truncated");
  return v;
}
std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  if (!in) throw std::runtime_error("checkpoint truncated");
  return v;
}

std::string get_string(std::istream& in, std::uint64_t limit) {
  const auto len = get_u64(in);
  if (len > limit) throw std::runtime_error("checkpoint field too long");
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("checkpoint truncated");
  return s;
}

void put_tensor(std::ostream& out, const nnet::Tensor<float>& t) {
  put_u64(out, t.name.size());
  out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
  put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
  for (int d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
  put_u64(out, t.values.size());
  out.write(reinterpret_cast<const char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * 4));
}

void read_tensor_into(std::istream& in, nnet::Tensor<float>& expected) {
  const std::string name = get_string(in, 1 << 10);
  if (name != expected.name)
    throw std::runtime_error("checkpoint tensor '" + name + "' where '" + expected.name + "' was expected");
  const auto rank = get_u32(in);
  if (rank != expected.shape.size()) throw std::runtime_error("checkpoint tensor '" + name + "' has wrong rank");
  for (std::uint32_t r = 0; r < rank; ++r)
    if (get_u32(in) != static_cast<std::uint32_t>(expected.shape[r]))
      throw std::runtime_error("checkpoint tensor '" + name + "' has wrong shape");
  const auto count = get_u64(in);
  if (count != expected.values.size()) throw std::runtime_error("checkpoint tensor '" + name + "' has wrong size");
  in.read(reinterpret_cast<char*>(expected.values.data()), static_cast<std::streamsize>(count * 4));
  if (!in) throw std::runtime_error("checkpoint truncated");
}

}  // namespace

void save_checkpoint(const nnet::ModelParams& params, const fs::path& path, const nlohmann::json& metadata) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(magic, sizeof magic);
  put_u32(out, checkpoint_version);
  const nlohmann::json header = {{"architecture", nnet::to_json(params.arch)}, {"metadata", metadata}};
  const std::string text = header.dump();
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put_u32(out, static_cast<std::uint32_t>(params.weights.size()));
  put_u32(out, static_cast<std::uint32_t>(params.buffers.size()));
  for (const auto& t : params.weights) put_tensor(out, t);
  for (const auto& t : params.buffers) put_tensor(out, t);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw std::invalid_argument("checkpoint not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  char m[8] = {};
  in.read(m, sizeof m);
  if (!in || std::memcmp(m, magic, sizeof m) != 0) throw std::runtime_error(path.string() + " is not a checkpoint");
  const auto version = get_u32(in);
  if (version != checkpoint_version)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(get_string(in, 1 << 20));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("corrupt checkpoint header: ") + e.what());
  }
  Checkpoint ck;
  ck.metadata = header.value("metadata", nlohmann::json::object());
  const auto arch = nnet::architecture_from_json(header.at("architecture"));
  ck.params = nnet::init_params<float>(arch, 0);
  if (get_u32(in) != ck.params.weights.size() || get_u32(in) != ck.params.buffers.size())
    throw std::runtime_error("checkpoint tensor count does not match its architecture");
  for (auto& t : ck.params.weights) read_tensor_into(in, t);
  for (auto& t : ck.params.buffers) read_tensor_into(in, t);
  return ck;
}

}  // namespace doelens
