#pragma once

#include "nn.hpp"

namespace tbf {

// Constrained high-pass stem: 3->3 channel k x k kernels with center weight
// -1 and the remaining weights summing to 1 per channel pair.
struct BayarParams {
  Tensor kernels;  // 3 x 3 x k x k
};

BayarParams make_bayar(Rng& rng, std::size_t k = 5);

// True when every channel pair has center == -1 and non-center sum == 1
// within tol.
bool bayar_constraints_ok(const BayarParams& p, double tol = 1e-6);

// Center forced to -1, non-center weights rescaled to sum 1. A channel pair
// whose non-center weights sum to ~0 is reinitialized uniform with a warning.
// Mutates kernel data in place (leaf mutation; never under a tape).
void bayar_reproject(BayarParams& p);

// RGB image -> noise map, same extent. Replicate padding so a constant image
// maps to zero everywhere including the border. The constraint guard is
// loose (1e-3) so finite-difference probing of the kernels stays legal.
Tensor bayar_forward(const Tensor& image, const BayarParams& p);

}  // namespace tbf
