#pragma once

#include <string>

#include "dfd/frontend.hpp"
#include "dfd/model.hpp"
#include "json.hpp"

namespace dfd {

// A trained model plus everything inference needs: the frontend settings the
// features were computed with and the input-normalization statistics (stored
// as a tensor so the round trip is bit-exact).
struct Checkpoint {
  ModelParams params;
  FrontendConfig frontend;
};

// Binary layout (little-endian):
//   magic "DFDCKPT1" | u32 version | u32 json_len | config JSON |
//   u32 tensor_count | per tensor: u16 name_len, name, u32 size, f64 data[] |
//   end marker u32 0x444B5054
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Rejects a checkpoint whose architecture differs from what the caller was
// configured for (e.g. resuming a d=64 checkpoint into a d=32 run).
void require_config_match(const Checkpoint& ckpt, const ModelConfig& expected);

nlohmann::json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json frontend_config_to_json(const FrontendConfig& c);
FrontendConfig frontend_config_from_json(const nlohmann::json& j);

}  // namespace dfd
