#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mcsample/forward_model.hpp"
#include "mcsample/image.hpp"
#include "mcsample/mask_zoo.hpp"

namespace mcs {

/// Trainable acquisition parameters: one logit per phase-encode line, relaxed
/// through a sigmoid of steepness `slope`, with an L1 sparsity weight.
struct SamplerParams {
  std::vector<float> logits;
  double slope = 10.0;
  double sparsity = 0.01;

  int lines() const { return static_cast<int>(logits.size()); }
};

/// Per-line acquisition probabilities.
struct SoftMask {
  std::vector<double> probs;
};

/// Logits i.i.d. uniform in [-0.01, 0.01].
SamplerParams init_sampler(int n, std::uint64_t seed, double slope = 10.0, double sparsity = 0.01);

void validate(const SamplerParams& params);

/// p_i = 1 / (1 + exp(-slope * w_i)).
SoftMask soft_mask(const SamplerParams& params);

/// lambda * mean(p).
double sparsity_penalty(const SoftMask& mask, double lambda);

/// Magnitude of the zero-filled image acquired with soft line weights.
ImageSlice acquire_soft(const ImageSlice& image, const SoftMask& mask);

/// Intermediates of acquire_soft needed for the backward pass.
struct SoftAcquisition {
  KSpaceSlice full_kspace;   // fft2 of the target image, unmasked
  ComplexImage weighted;     // ifft2 of the weighted spectrum
  ImageSlice magnitude;      // |weighted|
};

/// acquire_soft from a precomputed spectrum, keeping what backward needs.
SoftAcquisition acquire_soft_traced(KSpaceSlice full_kspace, const SoftMask& mask);

/// dL/dp given dL/d(magnitude).
std::vector<double> acquire_soft_backward(const SoftAcquisition& trace, const ImageSlice& grad_magnitude);

/// Chain rule through the sigmoid: dL/dw_i = dL/dp_i * slope * p_i * (1 - p_i).
std::vector<double> logit_gradient(const SamplerParams& params, const SoftMask& mask,
                                   std::span<const double> grad_probs);

/// d(sparsity_penalty)/dp_i = lambda / n.
std::vector<double> sparsity_gradient(const SoftMask& mask, double lambda);

/// Binarizes the learned pattern: the `budget` lines with largest probability.
LineMask extract_mask(const SamplerParams& params, int budget);

/// Fraction of lines with p_i > threshold.
double effective_rate(const SoftMask& mask, double threshold = 0.5);

/// Checkpoint: JSON header at `header` plus float32 LE logits in the sibling
/// file with extension ".bin".
void save_sampler(const std::filesystem::path& header, const SamplerParams& params);
SamplerParams load_sampler(const std::filesystem::path& header);

}  // namespace mcs
