#include "dfd/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "dfd/error.hpp"

namespace dfd {

namespace {

constexpr char kMagic[8] = {'D', 'F', 'D', 'C', 'K', 'P', 'T', '1'};
constexpr uint32_t kVersion = 1;
constexpr uint32_t kEndMarker = 0x444B5054;

void write_u16(std::ofstream& f, uint16_t v) { f.write(reinterpret_cast<const char*>(&v), 2); }
void write_u32(std::ofstream& f, uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); }

uint16_t read_u16(std::ifstream& f, const std::string& path) {
  uint16_t v;
  if (!f.read(reinterpret_cast<char*>(&v), 2))
    fail(Errc::corrupt_file, "truncated checkpoint: " + path);
  return v;
}

uint32_t read_u32(std::ifstream& f, const std::string& path) {
  uint32_t v;
  if (!f.read(reinterpret_cast<char*>(&v), 4))
    fail(Errc::corrupt_file, "truncated checkpoint: " + path);
  return v;
}

}  // namespace

nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"patch_freq", c.patch_freq}, {"patch_time", c.patch_time},
          {"embed_dim", c.embed_dim},   {"depth", c.depth},
          {"n_heads", c.n_heads},       {"mlp_ratio", c.mlp_ratio},
          {"n_classes", c.n_classes},   {"max_tokens", c.max_tokens},
          {"n_mels", c.n_mels}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.patch_freq = j.at("patch_freq").get<int>();
  c.patch_time = j.at("patch_time").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.depth = j.at("depth").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.mlp_ratio = j.at("mlp_ratio").get<int>();
  c.n_classes = j.at("n_classes").get<int>();
  c.max_tokens = j.at("max_tokens").get<int>();
  c.n_mels = j.at("n_mels").get<int>();
  return c;
}

nlohmann::json frontend_config_to_json(const FrontendConfig& c) {
  return {{"win_ms", c.win_ms}, {"hop_ms", c.hop_ms},       {"n_mels", c.n_mels},
          {"n_fft", c.n_fft},   {"fmin", c.fmin},           {"fmax", c.fmax},
          {"log_floor", c.log_floor}};
}

FrontendConfig frontend_config_from_json(const nlohmann::json& j) {
  FrontendConfig c;
  c.win_ms = j.at("win_ms").get<double>();
  c.hop_ms = j.at("hop_ms").get<double>();
  c.n_mels = j.at("n_mels").get<int>();
  c.n_fft = j.at("n_fft").get<int>();
  c.fmin = j.at("fmin").get<double>();
  c.fmax = j.at("fmax").get<double>();
  c.log_floor = j.at("log_floor").get<double>();
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(Errc::unwritable_path, "cannot write checkpoint: " + path);

  const nlohmann::json config = {
      {"model", model_config_to_json(ckpt.params.config)},
      {"frontend", frontend_config_to_json(ckpt.frontend)},
  };
  const std::string config_str = config.dump();

  f.write(kMagic, sizeof(kMagic));
  write_u32(f, kVersion);
  write_u32(f, static_cast<uint32_t>(config_str.size()));
  f.write(config_str.data(), static_cast<std::streamsize>(config_str.size()));

  auto& params = const_cast<ModelParams&>(ckpt.params);
  auto refs = tensor_refs(params);
  const double norm_stats[2] = {ckpt.params.input_mean, ckpt.params.input_std};
  write_u32(f, static_cast<uint32_t>(refs.size() + 1));
  auto write_tensor = [&](const std::string& name, const double* data, size_t size) {
    write_u16(f, static_cast<uint16_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(f, static_cast<uint32_t>(size));
    f.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(size * sizeof(double)));
  };
  write_tensor("input_norm", norm_stats, 2);
  for (const auto& r : refs) write_tensor(r.name, r.data, r.size);
  write_u32(f, kEndMarker);
  f.flush();
  if (!f) fail(Errc::unwritable_path, "checkpoint write failed: " + path);
}

void require_config_match(const Checkpoint& ckpt, const ModelConfig& expected) {
  const auto got = model_config_to_json(ckpt.params.config);
  const auto want = model_config_to_json(expected);
  if (got != want)
    fail(Errc::shape_mismatch,
         "checkpoint architecture " + got.dump() + " does not match configured " + want.dump());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) fail(Errc::file_missing, "no such checkpoint: " + path);
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(Errc::io_error, "cannot open checkpoint: " + path);

  char magic[8];
  if (!f.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    fail(Errc::corrupt_file, "not a checkpoint file: " + path);
  const uint32_t version = read_u32(f, path);
  if (version != kVersion)
    fail(Errc::version_mismatch, "checkpoint version " + std::to_string(version) +
                                     " (expected " + std::to_string(kVersion) + "): " + path);

  const uint32_t json_len = read_u32(f, path);
  std::string config_str(json_len, '\0');
  if (!f.read(config_str.data(), json_len))
    fail(Errc::corrupt_file, "truncated checkpoint: " + path);
  nlohmann::json config;
  try {
    config = nlohmann::json::parse(config_str);
  } catch (const nlohmann::json::exception&) {
    fail(Errc::corrupt_file, "unparseable checkpoint config: " + path);
  }

  Checkpoint ckpt;
  ckpt.frontend = frontend_config_from_json(config.at("frontend"));
  ckpt.params = ModelParams::zeros(model_config_from_json(config.at("model")));

  const uint32_t n_tensors = read_u32(f, path);
  auto refs = tensor_refs(ckpt.params);
  size_t next_ref = 0;
  bool have_norm = false;
  for (uint32_t t = 0; t < n_tensors; ++t) {
    const uint16_t name_len = read_u16(f, path);
    std::string name(name_len, '\0');
    if (!f.read(name.data(), name_len))
      fail(Errc::corrupt_file, "truncated checkpoint: " + path);
    const uint32_t size = read_u32(f, path);

    double* dest = nullptr;
    if (name == "input_norm") {
      static_assert(sizeof(double) == 8);
      if (size != 2) fail(Errc::shape_mismatch, "input_norm must hold 2 values: " + path);
      double stats[2];
      if (!f.read(reinterpret_cast<char*>(stats), sizeof(stats)))
        fail(Errc::corrupt_file, "truncated checkpoint: " + path);
      ckpt.params.input_mean = stats[0];
      ckpt.params.input_std = stats[1];
      have_norm = true;
      continue;
    }
    if (next_ref >= refs.size() || refs[next_ref].name != name)
      fail(Errc::corrupt_file, "unexpected tensor '" + name + "' in " + path);
    if (refs[next_ref].size != size)
      fail(Errc::shape_mismatch, "tensor '" + name + "' holds " + std::to_string(size) +
                                     " values, expected " +
                                     std::to_string(refs[next_ref].size) + ": " + path);
    dest = refs[next_ref].data;
    ++next_ref;
    if (!f.read(reinterpret_cast<char*>(dest), static_cast<std::streamsize>(size * 8)))
      fail(Errc::corrupt_file, "truncated checkpoint: " + path);
  }
  if (!have_norm || next_ref != refs.size())
    fail(Errc::corrupt_file, "checkpoint is missing tensors: " + path);
  const uint32_t marker = read_u32(f, path);
  if (marker != kEndMarker) fail(Errc::corrupt_file, "bad end marker: " + path);
  return ckpt;
}

}  // namespace dfd
