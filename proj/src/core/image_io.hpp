#pragma once

#include <string>

#include "tensor.hpp"

namespace tbf {

// Binary PPM (P6) for color, PGM (P5) for masks/grayscale, maxval 255 only.
// Values map byte/255 <-> round(v*255), so anything on the 8-bit grid
// round-trips bit-exactly.
void save_ppm(const std::string& path, const Tensor& image);  // 3xHxW in [0,1]
Tensor load_ppm(const std::string& path);
void save_pgm(const std::string& path, const Tensor& gray);  // HxW in [0,1]
Tensor load_pgm(const std::string& path);

}  // namespace tbf
