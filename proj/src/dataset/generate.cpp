#include "tumornet/dataset/generate.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "tumornet/core/rng.hpp"
#include "tumornet/dataset/sampling.hpp"
#include "tumornet/field/volume_io.hpp"

namespace tumornet::dataset {

namespace {

std::string sample_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%05zu", i);
  return buf;
}

}  // namespace

field::NormalizedParams model_frame_params(const field::GrowthParams& raw, const Provenance& prov,
                                           const field::ParamRanges& ranges) {
  field::GrowthParams framed = raw;
  framed.seed = seed_to_model_frame(raw.seed, prov);
  // Seeds near the crop border can land a hair outside [0,1]; clamp silently
  // since the tumor, not the seed, defined the crop.
  for (double& s : framed.seed) s = std::clamp(s, 0.0, 1.0);
  return field::normalize_params(framed, ranges);
}

GeneratedSample generate_sample(const PhantomSpec& spec, const field::ParamRanges& ranges,
                                const pde::SimulationConfig& sim_cfg, std::uint64_t phantom_seed,
                                std::uint64_t param_seed, const field::Dims& work_dims, const field::Dims& out_dims) {
  GeneratedSample g;
  g.tissue_raw = gen_phantom(spec, phantom_seed);
  g.theta_raw = sample_params(ranges, g.tissue_raw, param_seed);
  const auto sim = pde::simulate(g.tissue_raw, g.theta_raw, sim_cfg);
  g.tumor_raw = sim.final_state.cast<float>();
  g.pre = preprocess(g.tissue_raw, g.tumor_raw, work_dims, out_dims);
  const float mx = g.pre.tumor.array().maxCoeff();
  if (!(mx > 0.0f && mx <= 1.0f)) {
    throw Error(ErrorCode::numerical_blowup, "target max " + std::to_string(mx) + " outside (0, 1]");
  }
  g.theta_norm = model_frame_params(g.theta_raw, g.pre.provenance, ranges);
  return g;
}

Manifest generate_dataset(std::size_t n_train, std::size_t n_val, std::size_t n_test, const PhantomSpec& spec,
                          const field::ParamRanges& ranges, const pde::SimulationConfig& sim_cfg,
                          std::uint64_t global_seed, const std::filesystem::path& out_dir,
                          const GenerateOptions& opts) {
  spec.validate();
  ranges.validate();
  sim_cfg.validate();
  try {
    std::filesystem::create_directories(out_dir / "samples");
  } catch (const std::filesystem::filesystem_error& e) {
    throw Error(ErrorCode::io, std::string("cannot create output directory: ") + e.what());
  }

  Manifest m;
  m.name = opts.name;
  m.global_seed = global_seed;
  m.phantom = spec;
  m.ranges = ranges;
  m.simulation = sim_cfg;
  m.work_dims = opts.work_dims;
  m.out_dims = opts.out_dims;
  m.n_train = n_train;
  m.n_val = n_val;
  m.n_test = n_test;
  m.root = out_dir;

  const std::size_t total = n_train + n_val + n_test;
  for (std::size_t i = 0; i < total; ++i) {
    SampleRecord r;
    r.id = sample_id(i);
    r.split = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);
    GeneratedSample g;
    bool ok = false;
    for (int attempt = 0; attempt < kMaxSampleRetries && !ok; ++attempt) {
      const std::uint64_t s = derive_seed(global_seed, i, static_cast<std::uint64_t>(attempt));
      r.attempt = attempt;
      r.phantom_seed = derive_seed(s, 0, 1);
      r.param_seed = derive_seed(s, 0, 2);
      try {
        g = generate_sample(spec, ranges, sim_cfg, r.phantom_seed, r.param_seed, opts.work_dims, opts.out_dims);
        ok = true;
      } catch (const Error& e) {
        m.failures.push_back({i, attempt, e.what()});
        if (opts.verbose) std::fprintf(stderr, "sample %s attempt %d failed: %s\n", r.id.c_str(), attempt, e.what());
      }
    }
    if (!ok) {
      save_manifest(m, out_dir);
      throw Error(ErrorCode::numerical_blowup,
                  "sample " + r.id + " failed " + std::to_string(kMaxSampleRetries) + " times; aborting");
    }
    r.theta_raw = g.theta_raw;
    r.theta_norm = g.theta_norm;
    r.provenance = g.pre.provenance;
    const std::string dir = "samples/" + r.id;
    r.tissue_path = dir + "/tissue.vol";
    r.target_path = dir + "/target.vol";
    std::filesystem::create_directories(out_dir / dir);
    field::save_tissue(out_dir / r.tissue_path, g.pre.tissue);
    field::save_volume(out_dir / r.target_path, g.pre.tumor, "tumor");
    {
      std::ofstream meta(out_dir / dir / "meta.json", std::ios::trunc);
      meta << nlohmann::json(r).dump(2) << "\n";
    }
    if (opts.verbose) {
      std::fprintf(stderr, "[%zu/%zu] %s rho=%.4f d_w=%.4f\n", i + 1, total, r.id.c_str(), r.theta_raw.rho,
                   r.theta_raw.d_w);
    }
    m.samples.push_back(std::move(r));
  }
  m.validate();
  save_manifest(m, out_dir);
  return m;
}

}  // namespace tumornet::dataset
