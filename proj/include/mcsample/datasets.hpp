#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mcsample/image.hpp"

namespace mcs {

/// Co-registered reference (T1-like) and target (T2-like) slices.
struct SlicePair {
  ImageSlice t1;
  ImageSlice t2;
  std::string id;

  friend bool operator==(const SlicePair&, const SlicePair&) = default;
};

struct DatasetManifest {
  int version = 1;
  int height = 0;
  int width = 0;
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
  int pairs = 0;  // generator pair count; 0 when not synthetic
};

struct PairDataset {
  DatasetManifest manifest;
  std::vector<SlicePair> train;
  std::vector<SlicePair> val;
  std::vector<SlicePair> test;
};

/// Clamps negatives to 0 and divides by the maximum (all-zero stays zero).
ImageSlice normalize(const ImageSlice& image);

/// Ellipse phantom with shared anatomy and independent per-contrast tissue
/// intensities, a smooth multiplicative bias (|b| <= 0.05) and Gaussian noise
/// (sigma 0.01), normalized per slice and rounded to float precision.
SlicePair generate_phantom_pair(int height, int width, std::uint64_t seed);

/// Seed of the i-th pair of a synthetic set.
std::uint64_t pair_seed(std::uint64_t dataset_seed, std::uint64_t index);

/// In-memory synthetic set; ids are "pair_00000", ...
std::vector<SlicePair> synth_pairs(int count, int size, std::uint64_t seed);

std::vector<std::uint8_t> encode_pair(const SlicePair& pair);
SlicePair decode_pair(std::span<const std::uint8_t> bytes, std::string id = {});
void write_pair(const std::filesystem::path& path, const SlicePair& pair);
/// The pair id is the file stem.
SlicePair read_pair(const std::filesystem::path& path);

/// Seeded shuffle then contiguous cut at rounded cumulative fractions.
DatasetManifest split(std::span<const std::string> ids, std::array<double, 3> fractions, std::uint64_t seed);

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const std::string& text);

/// Loads the manifest and every referenced pair (paths relative to the
/// manifest's directory) and checks shapes.
PairDataset load_dataset(const std::filesystem::path& manifest_path);

/// Writes `pairs` phantom files under out_dir/pairs/ plus out_dir/manifest.json.
DatasetManifest synth_dataset(const std::filesystem::path& out_dir, int pairs, int size, std::uint64_t seed,
                              std::array<double, 3> fractions = {2.0 / 3.0, 2.0 / 15.0, 1.0 / 5.0});

}  // namespace mcs
