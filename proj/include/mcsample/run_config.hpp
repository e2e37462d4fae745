#pragma once

#include <filesystem>
#include <string>

#include "mcsample/training.hpp"

namespace mcs {

/// Everything an experiment needs. Loaded from a JSON object whose keys are
/// the flat names below; unknown keys are rejected.
///
///   learning_rate adam_beta1 adam_beta2 adam_eps batch_size steps seed
///   budget lambda slope multi_contrast depth base_channels residual
///   data out
struct RunConfig {
  TrainConfig train;
  std::string data;  // dataset manifest
  std::string out;   // output directory
};

RunConfig run_config_from_json(const std::string& text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});
std::string run_config_to_json(const RunConfig& config);

/// Throws Config on any invalid field.
void validate(const RunConfig& config);

}  // namespace mcs
