#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mcsample/image.hpp"
#include "mcsample/mask_zoo.hpp"

namespace mcs {

double mae(const ImageSlice& x, const ImageSlice& y);
double mse(const ImageSlice& x, const ImageSlice& y);

/// 10 log10(range^2 / MSE); +infinity when the images are identical.
double psnr(const ImageSlice& x, const ImageSlice& y, double data_range = 1.0);

/// Mean SSIM over the valid region of an 11×11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03. Local variances are the biased weighted moments.
double ssim(const ImageSlice& x, const ImageSlice& y, double data_range = 1.0);

/// Normalized 11×11 Gaussian window used by ssim(), row-major.
std::vector<double> ssim_window();

/// Per-pixel |x - y|.
ImageSlice error_map(const ImageSlice& x, const ImageSlice& y);

struct SliceScore {
  std::string slice_id;
  double mae = 0.0;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct EvalReport {
  std::vector<SliceScore> per_slice;
  double mean_mae = 0.0;
  double mean_psnr_db = 0.0;
  double mean_ssim = 0.0;
  std::string mask_kind;
  LineMask mask;
  double acceleration = 0.0;
};

/// Fills the means from per_slice.
void summarize(EvalReport& report);

/// slice_id,mae,psnr_db,ssim rows and a final MEAN row.
std::string eval_report_csv(const EvalReport& report);
void write_eval_report(const std::filesystem::path& path, const EvalReport& report);

/// Binary 16-bit PGM (P5, maxval 65535, big-endian samples),
/// sample = round(clamp(v, 0, 1) * 65535).
std::vector<std::uint8_t> encode_pgm16(const ImageSlice& image);
void write_pgm16(const std::filesystem::path& path, const ImageSlice& image);

}  // namespace mcs
