#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tumornet/field/tissue.hpp"
#include "tumornet/field/volume.hpp"

namespace tumornet::field {

// On-disk container shared by volumes, tissue maps and checkpoints:
//
//   bytes [0, 64)   ASCII magic + version, space padded, byte 63 is '\n'
//   next line       compact JSON header terminated by '\n'
//   remainder       little-endian float32 payload
//
// Volume headers carry {"channels", "dims", "dtype": "f32le", "spacing"}; the
// payload is the channels back to back, each in x-fastest order.
inline constexpr std::size_t kMagicLineBytes = 64;
inline constexpr const char* kVolumeMagic = "TUMORNET-VOLUME 1";

struct ContainerContents {
  nlohmann::json header;
  std::vector<float> payload;
};

void write_container(const std::filesystem::path& path, const std::string& magic, const nlohmann::json& header,
                     const std::vector<float>& payload);
ContainerContents read_container(const std::filesystem::path& path, const std::string& magic);

void save_volume(const std::filesystem::path& path, const Volume3f& v, const std::string& channel = "value");
Volume3f load_volume(const std::filesystem::path& path);

void save_channels(const std::filesystem::path& path, const std::vector<const Volume3f*>& channels,
                   const std::vector<std::string>& names);
std::vector<Volume3f> load_channels(const std::filesystem::path& path, std::vector<std::string>* names = nullptr);

void save_tissue(const std::filesystem::path& path, const TissueMap& t);
TissueMap load_tissue(const std::filesystem::path& path);

}  // namespace tumornet::field
