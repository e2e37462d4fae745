#include "mcsample/forward_model.hpp"

#include <fftw3.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <string>

#include "mcsample/error.hpp"

namespace mcs {
namespace {

// Only fftw_execute is re-entrant; plan creation and destruction are not.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(fftw_complex* p) const { fftw_free(p); }
};

void check_dims(int h, int w) {
  if (h < 2 || w < 2)
    throw Error(ErrorKind::InvalidInput,
                "transform needs H, W >= 2, got " + std::to_string(h) + "x" + std::to_string(w));
}

void check_finite(std::span<const double> values, const char* what) {
  for (double v : values)
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidInput, std::string("non-finite value in ") + what);
}

// Centered unitary 2D DFT with the given FFTW sign. The same index shift
// serves both directions: buffer[j] = in[(j + c) mod n], out[u] = buffer[(u - c) mod n].
void centered_transform(int h, int w, std::span<const double> in_re, std::span<const double> in_im,
                        std::span<double> out_re, std::span<double> out_im, int sign) {
  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::unique_ptr<fftw_complex[], FftwFree> buf(fftw_alloc_complex(n));
  const int ch = h / 2;
  const int cw = w / 2;
  for (int j = 0; j < h; ++j) {
    const int src_row = (j + ch) % h;
    for (int k = 0; k < w; ++k) {
      const std::size_t src = static_cast<std::size_t>(src_row) * w + (k + cw) % w;
      buf[static_cast<std::size_t>(j) * w + k][0] = in_re[src];
      buf[static_cast<std::size_t>(j) * w + k][1] = in_im.empty() ? 0.0 : in_im[src];
    }
  }

  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_2d(h, w, buf.get(), buf.get(), sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int u = 0; u < h; ++u) {
    const int src_row = (u - ch + h) % h;
    for (int v = 0; v < w; ++v) {
      const std::size_t src = static_cast<std::size_t>(src_row) * w + (v - cw + w) % w;
      const std::size_t dst = static_cast<std::size_t>(u) * w + v;
      out_re[dst] = buf[src][0] * scale;
      out_im[dst] = buf[src][1] * scale;
    }
  }
}

}  // namespace

KSpaceSlice fft2_centered(const ImageSlice& image) {
  check_dims(image.height, image.width);
  check_finite(image.pixels, "image");
  KSpaceSlice k(image.height, image.width);
  centered_transform(image.height, image.width, image.pixels, {}, k.real, k.imag, FFTW_FORWARD);
  return k;
}

KSpaceSlice fft2_centered(const ComplexImage& image) {
  check_dims(image.height, image.width);
  check_finite(image.real, "image");
  check_finite(image.imag, "image");
  KSpaceSlice k(image.height, image.width);
  centered_transform(image.height, image.width, image.real, image.imag, k.real, k.imag, FFTW_FORWARD);
  return k;
}

ComplexImage ifft2_centered(const KSpaceSlice& kspace) {
  check_dims(kspace.height, kspace.width);
  check_finite(kspace.real, "k-space");
  check_finite(kspace.imag, "k-space");
  ComplexImage out(kspace.height, kspace.width);
  centered_transform(kspace.height, kspace.width, kspace.real, kspace.imag, out.real, out.imag,
                     FFTW_BACKWARD);
  return out;
}

ImageSlice magnitude_image(const ComplexImage& image) {
  ImageSlice out(image.height, image.width);
  for (std::size_t i = 0; i < image.size(); ++i) out.pixels[i] = std::hypot(image.real[i], image.imag[i]);
  return out;
}

KSpaceSlice apply_line_mask(const KSpaceSlice& kspace, std::span<const double> mask) {
  if (mask.size() != static_cast<std::size_t>(kspace.height))
    throw Error(ErrorKind::Shape, "mask length " + std::to_string(mask.size()) + " != k-space height " +
                                      std::to_string(kspace.height));
  for (double m : mask)
    if (!(m >= 0.0 && m <= 1.0)) throw Error(ErrorKind::InvalidMask, "mask values must lie in [0, 1]");

  KSpaceSlice out = kspace;
  for (int row = 0; row < kspace.height; ++row) {
    const std::size_t base = static_cast<std::size_t>(row) * kspace.width;
    for (int col = 0; col < kspace.width; ++col) {
      out.real[base + col] *= mask[row];
      out.imag[base + col] *= mask[row];
    }
  }
  return out;
}

ImageSlice zero_filled_recon(const ImageSlice& image, std::span<const double> mask) {
  return magnitude_image(ifft2_centered(apply_line_mask(fft2_centered(image), mask)));
}

}  // namespace mcs
