#include "tumornet/nn/checkpoint.hpp"

#include "tumornet/field/volume_io.hpp"

namespace tumornet::nn {

namespace {

void append(std::vector<float>& payload, nlohmann::json& tensors, const std::string& name, const Tensor<float>& t,
            const char* role) {
  tensors.push_back({{"name", name}, {"shape", t.shape()}, {"role", role}});
  payload.insert(payload.end(), t.data(), t.data() + t.numel());
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Module<float>& model, const nlohmann::json& model_config,
                     std::int64_t step, const Optimizer<float>* opt, const nlohmann::json& extra) {
  std::vector<float> payload;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& [name, t] : model.parameters()) append(payload, tensors, name, t, "param");
  for (const auto& [name, t] : model.buffers()) append(payload, tensors, name, t, "buffer");
  if (opt) {
    int i = 0;
    for (const auto& t : opt->state()) append(payload, tensors, "optim." + std::to_string(i++), t, "optim");
  }
  nlohmann::json header{{"model", model_config},
                        {"step", step},
                        {"optimizer", opt ? nlohmann::json(opt->config()) : nlohmann::json(nullptr)},
                        {"optimizer_steps", opt ? opt->steps() : 0},
                        {"tensors", tensors},
                        {"extra", extra}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  field::write_container(path, kCheckpointMagic, header, payload);
}

nlohmann::json read_checkpoint_header(const std::filesystem::path& path) {
  return field::read_container(path, kCheckpointMagic).header;
}

nlohmann::json load_checkpoint(const std::filesystem::path& path, Module<float>& model, Optimizer<float>* opt) {
  auto c = field::read_container(path, kCheckpointMagic);
  const auto& tensors = c.header.at("tensors");
  std::size_t offset = 0;
  std::size_t ti = 0;
  auto take = [&](const std::string& name, Tensor<float>& dst, const char* role) {
    if (ti >= tensors.size()) throw Error(ErrorCode::payload_size_mismatch, "checkpoint is missing tensor " + name);
    const auto& rec = tensors[ti++];
    const auto shape = rec.at("shape").get<Shape>();
    if (rec.at("name").get<std::string>() != name || rec.at("role").get<std::string>() != role || shape != dst.shape()) {
      throw Error(ErrorCode::shape_mismatch, "checkpoint tensor " + rec.at("name").get<std::string>() + " " +
                                                 shape_string(shape) + " does not match model tensor " + name + " " +
                                                 shape_string(dst.shape()));
    }
    if (offset + dst.numel() > c.payload.size()) {
      throw Error(ErrorCode::payload_size_mismatch, "checkpoint payload too short at " + name);
    }
    std::copy_n(c.payload.data() + offset, dst.numel(), dst.data());
    offset += dst.numel();
  };
  for (auto& [name, t] : model.parameters()) take(name, t, "param");
  for (auto& [name, t] : model.buffers()) take(name, t, "buffer");
  if (opt) {
    auto state = opt->state();
    for (std::size_t i = 0; i < state.size(); ++i) take("optim." + std::to_string(i), state[i], "optim");
    opt->load_state(state, c.header.at("optimizer_steps").get<std::int64_t>());
  } else {
    while (ti < tensors.size() && tensors[ti].at("role") == "optim") {
      offset += shape_numel(tensors[ti].at("shape").get<Shape>());
      ++ti;
    }
  }
  if (ti != tensors.size() || offset != c.payload.size()) {
    throw Error(ErrorCode::payload_size_mismatch, "checkpoint has tensors the model does not declare");
  }
  return c.header;
}

}  // namespace tumornet::nn
