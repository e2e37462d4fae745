#pragma once

// Desk-scale fixtures shared by the slow binaries.

#include <cstdio>
#include <filesystem>

#include "mcsample/datasets.hpp"
#include "mcsample/training.hpp"

namespace desk {

/// Scratch directory, wiped on first use.
inline std::filesystem::path work_dir(const char* name) {
  auto d = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

/// 300 phantom pairs of 64×64, seed 0, split 200/40/60, written under `dir`.
inline mcs::PairDataset make_data(const std::filesystem::path& dir) {
  mcs::synth_dataset(dir, 300, 64, 0);
  return mcs::load_dataset(dir / "manifest.json");
}

/// Library defaults: seed 0, 500 steps, batch 4, lr 5e-4, lambda 0.01,
/// slope 10, budget 6, depth 3, base 16, no residual.
inline mcs::TrainConfig config() {
  mcs::TrainConfig c;
  c.seed = 0;
  c.steps = 500;
  c.batch_size = 4;
  c.budget = 6;
  c.net = mcs::NetConfig{3, 16, 2, 0, false};
  return c;
}

inline void progress(const char* what, const mcs::TrainLog& log) {
  std::fprintf(stderr, "  %s: %zu steps in %.1f s, final val mae %.5f psnr %.2f\n", what, log.steps.size(),
               log.wall_clock_s, log.validation.back().mae, log.validation.back().psnr_db);
}

}  // namespace desk
