#include "gmnn/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "gmnn/error.hpp"

namespace gmnn {

namespace {

constexpr char kMagic[8] = {'G', 'M', 'N', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DataError("checkpoint is truncated");
  return v;
}

std::string get_bytes(std::istream& in, std::uint64_t n) {
  if (n > (1ULL << 32)) throw DataError("checkpoint field length is implausible");
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n))) throw DataError("checkpoint is truncated");
  return s;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_digest(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

std::uint64_t config_digest(const ModelConfig& config) { return fnv1a64(model_config_to_json(config).dump()); }

void write_checkpoint(std::ostream& out, const ModelParams& model) {
  const std::string config = model_config_to_json(model.config).dump();
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, config_digest(model.config));
  put<std::uint64_t>(out, config.size());
  out.write(config.data(), static_cast<std::streamsize>(config.size()));
  const auto params = model.named_parameters();
  put<std::uint64_t>(out, params.size());
  for (const auto& [name, m] : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(out, m->rows());
    put<std::uint64_t>(out, m->cols());
    for (const Scalar v : m->values()) put<double>(out, static_cast<double>(v));
  }
  if (!out) throw DataError("failed to write checkpoint");
}

void save_checkpoint(const std::string& path, const ModelParams& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  write_checkpoint(out, model);
}

ModelParams read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw DataError("not a checkpoint file");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto digest = get<std::uint64_t>(in);
  const std::string config_text = get_bytes(in, get<std::uint64_t>(in));

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(config_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint config is not valid JSON: ") + e.what());
  }
  ModelParams model = build_model(parse_model_config(j));
  if (config_digest(model.config) != digest) throw DataError("checkpoint config digest mismatch");

  std::map<std::string, Matrix*> slots;
  for (const auto& [name, m] : model.named_parameters()) slots.emplace(name, m);
  const auto count = get<std::uint64_t>(in);
  if (count != slots.size()) throw DataError("checkpoint tensor count does not match its config");
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = get_bytes(in, get<std::uint32_t>(in));
    const auto it = slots.find(name);
    if (it == slots.end()) throw DataError("checkpoint has unknown tensor " + name);
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    Matrix& m = *it->second;
    if (rows != m.rows() || cols != m.cols()) throw DataError("checkpoint tensor " + name + " has the wrong shape");
    for (auto& v : m.values()) v = static_cast<Scalar>(get<double>(in));
    slots.erase(it);
  }
  return model;
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  return read_checkpoint(in);
}

}  // namespace gmnn
