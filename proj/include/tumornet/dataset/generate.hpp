#pragma once

#include <cstdint>
#include <filesystem>

#include "tumornet/dataset/manifest.hpp"

namespace tumornet::dataset {

inline constexpr int kMaxSampleRetries = 5;

struct GenerateOptions {
  std::string name = "dataset";
  field::Dims work_dims{56, 56, 56};
  field::Dims out_dims{32, 32, 32};
  bool verbose = false;
};

// Samples are ordered train, val, test with ids s00000, s00001, ... The
// stream for sample i on attempt k is derive_seed(global_seed, i, k).
Manifest generate_dataset(std::size_t n_train, std::size_t n_val, std::size_t n_test, const PhantomSpec& spec,
                          const field::ParamRanges& ranges, const pde::SimulationConfig& sim_cfg,
                          std::uint64_t global_seed, const std::filesystem::path& out_dir,
                          const GenerateOptions& opts = {});

// Rebuilds one sample from its seeds without touching disk.
struct GeneratedSample {
  field::TissueMap tissue_raw;
  field::Volume3f tumor_raw;
  Preprocessed pre;
  field::GrowthParams theta_raw;
  field::NormalizedParams theta_norm{};
};

GeneratedSample generate_sample(const PhantomSpec& spec, const field::ParamRanges& ranges,
                                const pde::SimulationConfig& sim_cfg, std::uint64_t phantom_seed,
                                std::uint64_t param_seed, const field::Dims& work_dims, const field::Dims& out_dims);

// Conditioning vector in the preprocessed frame.
field::NormalizedParams model_frame_params(const field::GrowthParams& raw, const Provenance& prov,
                                           const field::ParamRanges& ranges);

}  // namespace tumornet::dataset
