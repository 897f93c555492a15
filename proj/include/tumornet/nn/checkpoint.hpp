#pragma once

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "tumornet/nn/layers.hpp"
#include "tumornet/nn/optim.hpp"

namespace tumornet::nn {

inline constexpr const char* kCheckpointMagic = "TUMORNET-CHECKPOINT 1";

// Header: {"model": <architecture config>, "step", "optimizer": <config or
// null>, "optimizer_steps", "tensors": [{"name", "shape", "role"}], "extra"}.
// Payload: f32 values of parameters, then buffers, then optimizer state, in
// that order.
void save_checkpoint(const std::filesystem::path& path, const Module<float>& model, const nlohmann::json& model_config,
                     std::int64_t step, const Optimizer<float>* opt = nullptr,
                     const nlohmann::json& extra = nlohmann::json::object());

nlohmann::json read_checkpoint_header(const std::filesystem::path& path);

// Copies weights and buffers into `model` (names and shapes must match) and,
// when given, the optimizer state. Returns the header.
nlohmann::json load_checkpoint(const std::filesystem::path& path, Module<float>& model, Optimizer<float>* opt = nullptr);

}  // namespace tumornet::nn
