#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace tbf {

// In-memory counterparts of common post-processing applied to tampered images.
struct DistortSpec {
  enum class Kind { none, resize, gaussian_blur, jpeg };
  Kind kind = Kind::none;
  double factor = 1.0;     // resize scale in (0, 1]
  std::size_t ksize = 3;   // blur kernel size, odd
  int quality = 100;       // jpeg quality in [1, 100]
};

// Parses "none", "resize:0.78", "gaussian_blur:3", "jpeg:85".
DistortSpec parse_distort(const std::string& text);
std::string distort_name(const DistortSpec& spec);

// General bilinear resample of a CxHxW (or HxW) image to a new size.
Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w);

// Scale factor form: output dims are round(dim*factor), at least 1.
// factor == 1.0 returns the input bit-for-bit.
Tensor resize_by_factor(const Tensor& image, double factor);

// Normalized 1-D gaussian taps, sigma = 0.3*((k-1)/2 - 1) + 0.8.
std::vector<double> gaussian_taps(std::size_t ksize);

// Separable gaussian blur with replicated borders. Constant images pass
// through unchanged.
Tensor gaussian_blur(const Tensor& image, std::size_t ksize);

// Compress/decompress round trip: per-channel 8x8 DCT, quality-scaled
// quantization of the standard luminance table.
Tensor jpeg_roundtrip(const Tensor& image, int quality);

// Applies the spec; output is clamped to [0, 1].
Tensor apply_distortion(const Tensor& image, const DistortSpec& spec);

}  // namespace tbf
