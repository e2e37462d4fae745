#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcsample/datasets.hpp"
#include "mcsample/mask_zoo.hpp"
#include "mcsample/metrics.hpp"
#include "mcsample/recon_net.hpp"
#include "mcsample/sampler.hpp"

namespace mcs {

struct AdamConfig {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

struct ParamGroup {
  std::span<float> values;
  std::span<const float> grads;
};

/// One bias-corrected Adam update over all groups. The state is sized on
/// first use; throws DivergedTraining on a non-finite gradient (parameters
/// are left untouched in that case).
void adam_step(std::span<const ParamGroup> groups, AdamState& state, const AdamConfig& config);

struct TrainConfig {
  AdamConfig adam;
  int batch_size = 4;
  int steps = 500;
  std::uint64_t seed = 0;
  int budget = 6;          // lines kept by the stage-1 mask extraction
  double sparsity = 0.01;  // lambda
  double slope = 10.0;     // sigmoid steepness
  bool multi_contrast = true;
  NetConfig net;           // in_channels is derived from multi_contrast
};

void validate(const TrainConfig& config);

struct StepRecord {
  int step = 0;
  double loss_total = 0.0;
  double loss_mae = 0.0;
  std::optional<double> loss_sparsity;  // stage 1 only
};

struct ValidationRecord {
  int step = 0;
  int epoch = 0;
  double mae = 0.0;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<ValidationRecord> validation;
  std::optional<LineMask> final_mask;
  double wall_clock_s = 0.0;  // not part of the CSV
};

/// step,phase,loss_total,loss_mae,loss_sparsity,val_psnr,val_ssim. Validation
/// rows carry the validation MAE in loss_mae.
std::string train_log_csv(const TrainLog& log);
void write_train_log(const std::filesystem::path& path, const TrainLog& log);

double mae_loss(const ImageSlice& pred, const ImageSlice& target);

/// Visit order of the training slices for one epoch; a pure function of
/// (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, std::uint64_t epoch);

/// Optional progress callbacks; neither may mutate training state.
struct TrainHooks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const ValidationRecord&)> on_validation;
};

struct Stage1Result {
  SamplerParams sampler;
  NetWeights net;
  TrainLog log;
  LineMask mask;
};

/// Joint training of the line sampler and a reconstructor on soft-masked
/// inputs; loss = MAE + lambda * mean(p). Extracts the top-`budget` mask.
Stage1Result train_stage1(std::span<const SlicePair> train, std::span<const SlicePair> val,
                          const TrainConfig& config, const TrainHooks& hooks = {});

struct Stage2Result {
  NetWeights net;
  TrainLog log;
};

/// Trains a fresh reconstructor on zero-filled inputs acquired with a fixed mask.
Stage2Result train_stage2(std::span<const SlicePair> train, std::span<const SlicePair> val, const LineMask& mask,
                          const TrainConfig& config, const TrainHooks& hooks = {});

/// Network input for one pair: [zero-filled target (, reference)].
FeatureMap<float> recon_input(const SlicePair& pair, const LineMask& mask, bool multi_contrast);

EvalReport evaluate(const NetWeights& weights, const LineMask& mask, std::span<const SlicePair> test,
                    bool multi_contrast);

}  // namespace mcs
