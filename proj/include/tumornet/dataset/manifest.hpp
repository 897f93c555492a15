#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tumornet/dataset/phantom.hpp"
#include "tumornet/dataset/preprocess.hpp"
#include "tumornet/field/params.hpp"
#include "tumornet/pde/solver.hpp"

namespace tumornet::dataset {

enum class Split { train, val, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

// theta_raw is the sampled parameter set on the simulation grid. theta_norm is
// what the surrogates are conditioned on: rho and d_w mapped through the
// ranges, and the seed re-expressed in the preprocessed grid.
struct SampleRecord {
  std::string id;
  Split split = Split::train;
  std::uint64_t phantom_seed = 0;
  std::uint64_t param_seed = 0;
  int attempt = 0;
  field::GrowthParams theta_raw;
  field::NormalizedParams theta_norm{};
  Provenance provenance;
  std::string tissue_path;  // relative to the manifest directory
  std::string target_path;
};

void to_json(nlohmann::json& j, const SampleRecord& r);
void from_json(const nlohmann::json& j, SampleRecord& r);

struct SampleFailure {
  std::size_t index = 0;
  int attempt = 0;
  std::string message;
};

struct Manifest {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  std::string name = "dataset";
  std::uint64_t global_seed = 0;
  PhantomSpec phantom;
  field::ParamRanges ranges;
  pde::SimulationConfig simulation;
  field::Dims work_dims{56, 56, 56};
  field::Dims out_dims{32, 32, 32};
  std::size_t n_train = 0, n_val = 0, n_test = 0;
  std::vector<SampleRecord> samples;
  std::vector<SampleFailure> failures;

  std::filesystem::path root;  // directory holding manifest.json, not serialized

  std::vector<const SampleRecord*> split(Split s) const;
  const SampleRecord& find(const std::string& id) const;
  // Ids unique, split sizes consistent with the counts.
  void validate() const;
};

void to_json(nlohmann::json& j, const Manifest& m);
void from_json(const nlohmann::json& j, Manifest& m);

void save_manifest(const Manifest& m, const std::filesystem::path& dir);
Manifest load_manifest(const std::filesystem::path& dir_or_file);

struct LoadedSample {
  field::TissueMap tissue;
  field::Volume3f target;
};

LoadedSample load_sample(const Manifest& m, const SampleRecord& r);

}  // namespace tumornet::dataset
