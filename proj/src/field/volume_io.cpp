#include "tumornet/field/volume_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace tumornet::field {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

std::string magic_line(const std::string& magic) {
  std::string line = magic;
  line.resize(kMagicLineBytes - 1, ' ');
  line.push_back('\n');
  return line;
}

}  // namespace

void write_container(const std::filesystem::path& path, const std::string& magic, const nlohmann::json& header,
                     const std::vector<float>& payload) {
  if (magic.size() >= kMagicLineBytes) throw Error(ErrorCode::invalid_argument, "container magic too long");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
  const std::string line = magic_line(magic);
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  const std::string json = header.dump() + "\n";
  out.write(json.data(), static_cast<std::streamsize>(json.size()));
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size() * 4));
  } else {
    std::vector<std::uint32_t> le(payload.size());
    for (std::size_t i = 0; i < payload.size(); ++i) le[i] = byteswap32(std::bit_cast<std::uint32_t>(payload[i]));
    out.write(reinterpret_cast<const char*>(le.data()), static_cast<std::streamsize>(le.size() * 4));
  }
  if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

ContainerContents read_container(const std::filesystem::path& path, const std::string& magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < kMagicLineBytes || bytes.compare(0, kMagicLineBytes, magic_line(magic)) != 0) {
    throw Error(ErrorCode::not_a_container, "not a volume container: " + path.string());
  }
  const std::size_t eol = bytes.find('\n', kMagicLineBytes);
  if (eol == std::string::npos) throw Error(ErrorCode::malformed_header, "unterminated header in " + path.string());
  ContainerContents c;
  try {
    c.header = nlohmann::json::parse(bytes.begin() + kMagicLineBytes, bytes.begin() + static_cast<std::ptrdiff_t>(eol));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::malformed_header, "malformed header in " + path.string() + ": " + e.what());
  }
  if (!c.header.is_object()) throw Error(ErrorCode::malformed_header, "header is not an object in " + path.string());
  const std::size_t payload_bytes = bytes.size() - eol - 1;
  if (payload_bytes % 4 != 0) {
    throw Error(ErrorCode::truncated_payload, "truncated payload in " + path.string());
  }
  c.payload.resize(payload_bytes / 4);
  std::memcpy(c.payload.data(), bytes.data() + eol + 1, payload_bytes);
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& f : c.payload) f = std::bit_cast<float>(byteswap32(std::bit_cast<std::uint32_t>(f)));
  }
  return c;
}

void save_channels(const std::filesystem::path& path, const std::vector<const Volume3f*>& channels,
                   const std::vector<std::string>& names) {
  if (channels.empty() || channels.size() != names.size()) {
    throw Error(ErrorCode::invalid_argument, "channel list and names must be nonempty and equally long");
  }
  const Volume3f& first = *channels.front();
  std::vector<float> payload;
  payload.reserve(static_cast<std::size_t>(first.size()) * channels.size());
  for (const Volume3f* v : channels) {
    if (!v->same_shape(first)) throw Error(ErrorCode::shape_mismatch, "channels must share dims");
    payload.insert(payload.end(), v->data(), v->data() + v->size());
  }
  const nlohmann::json header{
      {"channels", names}, {"dims", first.dims()}, {"dtype", "f32le"}, {"spacing", first.spacing()}};
  write_container(path, kVolumeMagic, header, payload);
}

std::vector<Volume3f> load_channels(const std::filesystem::path& path, std::vector<std::string>* names) {
  ContainerContents c = read_container(path, kVolumeMagic);
  Dims dims{};
  double spacing = 1.0;
  std::vector<std::string> channel_names;
  try {
    dims = c.header.at("dims").get<Dims>();
    spacing = c.header.at("spacing").get<double>();
    channel_names = c.header.at("channels").get<std::vector<std::string>>();
    if (c.header.at("dtype").get<std::string>() != "f32le") {
      throw Error(ErrorCode::malformed_header, "unsupported dtype in " + path.string());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::malformed_header, "malformed header in " + path.string() + ": " + e.what());
  }
  if (channel_names.empty() || dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0) {
    throw Error(ErrorCode::malformed_header, "invalid dims or channels in " + path.string());
  }
  const std::int64_t n = voxel_count(dims);
  if (static_cast<std::int64_t>(c.payload.size()) != n * static_cast<std::int64_t>(channel_names.size())) {
    throw Error(ErrorCode::payload_size_mismatch,
                "payload size mismatch in " + path.string() + ": expected " +
                    std::to_string(n * static_cast<std::int64_t>(channel_names.size())) + " values, found " +
                    std::to_string(c.payload.size()));
  }
  std::vector<Volume3f> out;
  for (std::size_t ch = 0; ch < channel_names.size(); ++ch) {
    Volume3f::Array a = Eigen::Map<const Volume3f::Array>(c.payload.data() + ch * n, n);
    out.emplace_back(dims, std::move(a), spacing);
  }
  if (names) *names = std::move(channel_names);
  return out;
}

void save_volume(const std::filesystem::path& path, const Volume3f& v, const std::string& channel) {
  save_channels(path, {&v}, {channel});
}

Volume3f load_volume(const std::filesystem::path& path) {
  auto channels = load_channels(path);
  if (channels.size() != 1) {
    throw Error(ErrorCode::malformed_header, path.string() + " holds " + std::to_string(channels.size()) +
                                                 " channels, expected a single volume");
  }
  return std::move(channels.front());
}

void save_tissue(const std::filesystem::path& path, const TissueMap& t) {
  save_channels(path, {&t.wm, &t.gm, &t.csf},
                {TissueMap::channel_names.begin(), TissueMap::channel_names.end()});
}

TissueMap load_tissue(const std::filesystem::path& path) {
  std::vector<std::string> names;
  auto channels = load_channels(path, &names);
  if (names != std::vector<std::string>(TissueMap::channel_names.begin(), TissueMap::channel_names.end())) {
    throw Error(ErrorCode::malformed_header, path.string() + " is not a tissue map (channels must be wm, gm, csf)");
  }
  return TissueMap{std::move(channels[0]), std::move(channels[1]), std::move(channels[2])};
}

}  // namespace tumornet::field
