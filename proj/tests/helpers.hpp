//
// Shared test fixtures: scratch directories and canned scenario configs.
//
#pragma once

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "core/synthgen.hpp"

namespace testutil {

// Unique scratch directory under the system temp root, removed on scope
// exit.
class scratch_dir {
 public:
  explicit scratch_dir(const std::string& tag) {
    static std::atomic<uint64_t> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("perfslice_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~scratch_dir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Small iterative scenario with distinct per-rank spread, handy wherever a
// trace-bearing database is needed.
inline perfslice::synthgen::iter_scenario_config small_iter_config(
    uint64_t seed = 7, uint32_t n_ranks = 4, uint32_t n_iterations = 5,
    double jitter = 0.0) {
  perfslice::synthgen::iter_scenario_config cfg;
  cfg.n_ranks = n_ranks;
  cfg.n_iterations = n_iterations;
  cfg.anchor_name = "solver_loop";
  cfg.copy_segment_s = 0.004;
  cfg.seed = seed;
  perfslice::synthgen::kernel_spec a;
  a.name = "kernel_heavy";
  a.mean_time_s = 0.4;
  a.within_rank_jitter_frac = jitter;
  for (uint32_t r = 0; r < n_ranks; ++r)
    a.across_rank_spread.push_back(0.6 + 0.8 * r / std::max(1u, n_ranks - 1));
  perfslice::synthgen::kernel_spec b;
  b.name = "kernel_light";
  b.mean_time_s = 0.1;
  b.within_rank_jitter_frac = jitter;
  cfg.kernels = {a, b};
  return cfg;
}

// Eight ranks, eleven iterations, six kernels whose cross-rank mean/max are
// tuned to the reference per-iteration figures. Factor vectors put one rank
// at max/mean and spread the rest evenly so the factor mean is exactly 1.
inline perfslice::synthgen::iter_scenario_config gamess_like_config(
    uint64_t seed = 0) {
  using perfslice::synthgen::kernel_spec;
  perfslice::synthgen::iter_scenario_config cfg;
  cfg.n_ranks = 8;
  cfg.n_iterations = 11;
  cfg.anchor_name = "gpu_ompmod_twoei_jk_";
  cfg.copy_segment_s = 0.0345;
  cfg.hostname = "x4109c0s0b0n0";
  cfg.seed = seed;

  struct row {
    const char* name;
    double mean, max;
    double cv;  // across-rank CV target as a fraction; 0 = minimal spread
  };
  const row rows[] = {
      {"gpu_rhf_j05_ppps_", 2.963, 4.650, 0.0},
      {"gpu_rhf_j06_pppp_", 2.483, 2.599, 0.0},
      {"gpu_rhf_j03_ppss_", 0.734, 0.945, 0.0},
      {"gpu_rhf_j04_psps_", 0.483, 0.958, 0.4631},
      {"gpu_rhf_j02_psss_", 0.239, 0.300, 0.0},
      {"gpu_rhf_j01_ssss_", 0.007, 0.010, 0.0},
  };
  for (const row& r : rows) {
    kernel_spec k;
    k.name = r.name;
    k.mean_time_s = r.mean;
    // One rank at max/mean; the rest centered so the factor mean is 1.
    // With a CV target, the rest spread on an even ladder sized to hit it.
    double ratio = r.max / r.mean;
    double rest_mean = (8.0 - ratio) / 7.0;
    double s = 0.0;
    if (r.cv > 0.0) {
      double num = 8.0 * r.cv * r.cv - (ratio - 1.0) * (ratio - 1.0) -
                   7.0 * (rest_mean - 1.0) * (rest_mean - 1.0);
      s = std::sqrt(num / 7.0);
    }
    k.across_rank_spread = {ratio};
    for (double d : {-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5})
      k.across_rank_spread.push_back(rest_mean + s * d);
    cfg.kernels.push_back(std::move(k));
  }
  return cfg;
}

// Desk-scale congested-allocation shape: 1,000 nodes x 10
// ranks, 202 outlier nodes spread across 22 racks, multiplied MPI_Allreduce
// time tuned so group total means land at 5.19 s vs 3.12 s.
inline perfslice::synthgen::congestion_scenario_config aurora_like_config(
    uint64_t seed = 42, double jitter = 0.02) {
  using perfslice::synthgen::congestion_callsite;
  perfslice::synthgen::congestion_scenario_config cfg;
  cfg.n_nodes = 1000;
  cfg.ranks_per_node = 10;
  cfg.rack_id_base = 4000;
  cfg.chassis_per_rack = 4;
  cfg.slots_per_chassis = 8;
  cfg.outlier_node_count = 202;
  for (uint32_t r = 0; r < 22; ++r) cfg.outlier_racks.push_back(4001 + r);
  cfg.compute_time_s = 2.01;
  cfg.jitter_frac = jitter;
  cfg.congestion_multiplier = 4.234375;  // 0.64 * (m - 1) = 2.07
  cfg.congested_callsite = 0;
  cfg.seed = seed;

  auto site = [](const char* name, std::vector<std::string> chain,
                 double base) {
    congestion_callsite s;
    s.routine_name = name;
    s.call_chain = std::move(chain);
    s.base_time_s = base;
    return s;
  };
  cfg.callsites = {
      site("MPI_Allreduce",
           {"hypre_GMRESSetup", "hypre_BoomerAMGSetup",
            "hypre_ParCSRMatrixSetNumNonzeros_core"},
           0.64),
      site("MPI_Allreduce", {"hypre_GMRESSolve", "hypre_BoomerAMGSolve"},
           0.15),
      site("MPI_Waitall", {"hypre_ParCSRMatrixMatvec"}, 0.12),
      site("MPI_Isend", {"hypre_ParCSRCommHandleCreate"}, 0.09),
      site("MPI_Irecv", {"hypre_ParCSRCommHandleCreate2"}, 0.07),
      site("MPI_Barrier", {"hypre_BoomerAMGCycle"}, 0.04),
  };
  return cfg;
}

}  // namespace testutil
