#pragma once

#include <span>
#include <vector>

#include "mcsample/image.hpp"

namespace mcs {

/// DC-centered complex spectrum. The DC coefficient sits at row H/2, column
/// W/2 (integer division). Rows are phase-encode lines.
struct KSpaceSlice {
  int height = 0;
  int width = 0;
  std::vector<double> real;
  std::vector<double> imag;

  KSpaceSlice() = default;
  KSpaceSlice(int h, int w)
      : height(h), width(w), real(static_cast<std::size_t>(h) * w), imag(static_cast<std::size_t>(h) * w) {}

  std::size_t size() const { return real.size(); }
  friend bool operator==(const KSpaceSlice&, const KSpaceSlice&) = default;
};

/// Complex image-domain result of the inverse transform.
struct ComplexImage {
  int height = 0;
  int width = 0;
  std::vector<double> real;
  std::vector<double> imag;

  ComplexImage() = default;
  ComplexImage(int h, int w)
      : height(h), width(w), real(static_cast<std::size_t>(h) * w), imag(static_cast<std::size_t>(h) * w) {}

  std::size_t size() const { return real.size(); }
};

/// Orthonormal centered 2D DFT:
///   K[u,v] = 1/sqrt(HW) * sum x[m,n] exp(-2πi((u-cu)(m-cu)/H + (v-cv)(n-cv)/W))
/// with cu = H/2, cv = W/2. Equivalent to fftshift(fft2(ifftshift(x))) / sqrt(HW).
KSpaceSlice fft2_centered(const ImageSlice& image);
KSpaceSlice fft2_centered(const ComplexImage& image);

/// Inverse of fft2_centered; also its adjoint (the transform is unitary).
ComplexImage ifft2_centered(const KSpaceSlice& kspace);

ImageSlice magnitude_image(const ComplexImage& image);

/// Multiplies row i of both planes by mask[i]. Values must lie in [0, 1].
KSpaceSlice apply_line_mask(const KSpaceSlice& kspace, std::span<const double> mask);

/// |ifft2(mask ⊙ fft2(image))|.
ImageSlice zero_filled_recon(const ImageSlice& image, std::span<const double> mask);

}  // namespace mcs
