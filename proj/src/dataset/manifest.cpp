#include "tumornet/dataset/manifest.hpp"

#include <fstream>
#include <set>

#include "tumornet/field/volume_io.hpp"

namespace tumornet::dataset {

std::string to_string(Split s) {
  switch (s) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "train";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw Error(ErrorCode::config, "unknown split '" + s + "' (expected train, val or test)");
}

void to_json(nlohmann::json& j, const SampleRecord& r) {
  j = nlohmann::json{{"id", r.id},
                     {"split", to_string(r.split)},
                     {"phantom_seed", r.phantom_seed},
                     {"param_seed", r.param_seed},
                     {"attempt", r.attempt},
                     {"theta_raw", r.theta_raw},
                     {"theta_norm", r.theta_norm},
                     {"provenance", r.provenance},
                     {"tissue", r.tissue_path},
                     {"target", r.target_path}};
}

void from_json(const nlohmann::json& j, SampleRecord& r) {
  j.at("id").get_to(r.id);
  r.split = split_from_string(j.at("split").get<std::string>());
  j.at("phantom_seed").get_to(r.phantom_seed);
  j.at("param_seed").get_to(r.param_seed);
  j.at("attempt").get_to(r.attempt);
  j.at("theta_raw").get_to(r.theta_raw);
  j.at("theta_norm").get_to(r.theta_norm);
  j.at("provenance").get_to(r.provenance);
  j.at("tissue").get_to(r.tissue_path);
  j.at("target").get_to(r.target_path);
}

void to_json(nlohmann::json& j, const Manifest& m) {
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : m.failures) {
    failures.push_back({{"index", f.index}, {"attempt", f.attempt}, {"message", f.message}});
  }
  j = nlohmann::json{{"format_version", m.format_version},
                     {"name", m.name},
                     {"global_seed", m.global_seed},
                     {"phantom", m.phantom},
                     {"ranges", m.ranges},
                     {"simulation", m.simulation},
                     {"work_dims", m.work_dims},
                     {"out_dims", m.out_dims},
                     {"counts", {{"train", m.n_train}, {"val", m.n_val}, {"test", m.n_test}}},
                     {"samples", m.samples},
                     {"failures", failures}};
}

void from_json(const nlohmann::json& j, Manifest& m) {
  j.at("format_version").get_to(m.format_version);
  if (m.format_version != Manifest::kFormatVersion) {
    throw Error(ErrorCode::malformed_header, "unsupported manifest format_version " + std::to_string(m.format_version));
  }
  j.at("name").get_to(m.name);
  j.at("global_seed").get_to(m.global_seed);
  j.at("phantom").get_to(m.phantom);
  j.at("ranges").get_to(m.ranges);
  j.at("simulation").get_to(m.simulation);
  j.at("work_dims").get_to(m.work_dims);
  j.at("out_dims").get_to(m.out_dims);
  const auto& counts = j.at("counts");
  counts.at("train").get_to(m.n_train);
  counts.at("val").get_to(m.n_val);
  counts.at("test").get_to(m.n_test);
  j.at("samples").get_to(m.samples);
  m.failures.clear();
  if (j.contains("failures")) {
    for (const auto& f : j.at("failures")) {
      m.failures.push_back({f.at("index").get<std::size_t>(), f.at("attempt").get<int>(), f.at("message").get<std::string>()});
    }
  }
}

std::vector<const SampleRecord*> Manifest::split(Split s) const {
  std::vector<const SampleRecord*> out;
  for (const auto& r : samples) {
    if (r.split == s) out.push_back(&r);
  }
  return out;
}

const SampleRecord& Manifest::find(const std::string& id) const {
  for (const auto& r : samples) {
    if (r.id == id) return r;
  }
  throw Error(ErrorCode::missing_data, "sample '" + id + "' not in manifest");
}

void Manifest::validate() const {
  std::set<std::string> ids;
  for (const auto& r : samples) {
    if (!ids.insert(r.id).second) throw Error(ErrorCode::missing_data, "duplicate sample id " + r.id);
    for (double v : r.theta_norm) {
      if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::missing_data, "theta_norm outside [0,1] for " + r.id);
    }
  }
  if (split(Split::train).size() != n_train || split(Split::val).size() != n_val ||
      split(Split::test).size() != n_test) {
    throw Error(ErrorCode::missing_data, "manifest split sizes do not match counts");
  }
}

void save_manifest(const Manifest& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + (dir / "manifest.json").string());
  out << nlohmann::json(m).dump(2) << "\n";
}

Manifest load_manifest(const std::filesystem::path& dir_or_file) {
  const auto file = std::filesystem::is_directory(dir_or_file) ? dir_or_file / "manifest.json" : dir_or_file;
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::missing_data, "cannot open manifest " + file.string());
  Manifest m;
  try {
    m = nlohmann::json::parse(in).get<Manifest>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::malformed_header, "malformed manifest " + file.string() + ": " + e.what());
  }
  m.root = file.parent_path();
  m.validate();
  return m;
}

LoadedSample load_sample(const Manifest& m, const SampleRecord& r) {
  const auto tissue = m.root / r.tissue_path;
  const auto target = m.root / r.target_path;
  if (!std::filesystem::exists(tissue) || !std::filesystem::exists(target)) {
    throw Error(ErrorCode::missing_data, "missing files for sample " + r.id + " under " + m.root.string());
  }
  return {field::load_tissue(tissue), field::load_volume(target)};
}

}  // namespace tumornet::dataset
