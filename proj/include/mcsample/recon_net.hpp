#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mcsample/image.hpp"

namespace mcs {

/// U-net hyperparameters. Input H and W must be divisible by 2^depth.
struct NetConfig {
  int depth = 3;
  int base_channels = 16;
  int in_channels = 2;  // 1: aliased target only; 2: aliased target + reference contrast
  std::uint64_t seed = 0;
  bool residual = false;  // add input channel 0 to the output

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

void validate(const NetConfig& config);

/// One convolution of the documented layer list. Every conv has a
/// [out, in, k, k] kernel and an [out] bias.
struct ConvLayerSpec {
  std::string name;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  bool relu = true;
};

/// Layer list in execution order:
///   enc{l}.conv1, enc{l}.conv2           l = 0..depth-1, width base*2^l
///   bottleneck.conv1, bottleneck.conv2   width base*2^depth
///   dec{l}.up, dec{l}.conv1, dec{l}.conv2  l = depth-1..0 (up: after nearest ×2,
///                                          conv1 sees [skip, up] concatenated)
///   out                                  1×1, linear, one channel
std::vector<ConvLayerSpec> layer_table(const NetConfig& config);

std::size_t parameter_count(const NetConfig& config);

template <typename T>
struct ParamTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<T> values;
};

template <typename T>
struct BasicNetWeights {
  NetConfig config;
  std::vector<ParamTensor<T>> tensors;  // per layer: weight then bias

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.values.size();
    return n;
  }

  BasicNetWeights zeros_like() const {
    BasicNetWeights out = *this;
    for (auto& t : out.tensors) std::fill(t.values.begin(), t.values.end(), T(0));
    return out;
  }
};

using NetWeights = BasicNetWeights<float>;

template <typename To, typename From>
BasicNetWeights<To> cast_weights(const BasicNetWeights<From>& in) {
  BasicNetWeights<To> out;
  out.config = in.config;
  out.tensors.reserve(in.tensors.size());
  for (const auto& t : in.tensors)
    out.tensors.push_back({t.name, t.shape, std::vector<To>(t.values.begin(), t.values.end())});
  return out;
}

/// Channel-major (C, H, W) activation.
template <typename T>
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, T(0)) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  T* channel(int c) { return data.data() + c * plane(); }
  const T* channel(int c) const { return data.data() + c * plane(); }
};

/// Intermediates kept by forward() for backward().
template <typename T>
struct ForwardTrace {
  std::vector<std::vector<T>> columns;      // per conv: im2col of its input
  std::vector<FeatureMap<T>> activations;   // per conv: its output
  std::vector<std::vector<std::uint32_t>> pool_argmax;  // per level
  FeatureMap<T> input;
};

/// He-normal kernels (std sqrt(2 / fan_in)), zero biases, seeded by config.seed.
NetWeights init_weights(const NetConfig& config);

template <typename T>
FeatureMap<T> forward(const BasicNetWeights<T>& weights, const FeatureMap<T>& input,
                      ForwardTrace<T>* trace = nullptr);

/// Accumulates parameter gradients into `grads` (same layout as weights) and,
/// when grad_input is non-null, writes the gradient w.r.t. the input.
template <typename T>
void backward(const BasicNetWeights<T>& weights, const ForwardTrace<T>& trace, const FeatureMap<T>& grad_output,
              BasicNetWeights<T>& grads, FeatureMap<T>* grad_input = nullptr);

/// Stacks equally-sized images into a float feature map.
FeatureMap<float> stack_channels(std::span<const ImageSlice* const> images);

ImageSlice to_image(const FeatureMap<float>& map, int channel = 0);

/// Runs the network on a channel stack and returns the single output channel.
ImageSlice reconstruct(const NetWeights& weights, std::span<const ImageSlice* const> channels);

/// Checkpoint: JSON manifest at `manifest`, float32 LE blob in the sibling
/// ".bin" file; offsets and lengths in elements.
void save_weights(const std::filesystem::path& manifest, const NetWeights& weights);
NetWeights load_weights(const std::filesystem::path& manifest);

}  // namespace mcs
