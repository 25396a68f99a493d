#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"

namespace tbf {

enum class ForgeryKind { splice, copymove, removal };

const char* forgery_kind_name(ForgeryKind kind);
ForgeryKind forgery_kind_from_name(const std::string& name);

// Procedural background: a two-color gradient plus smoothed coarse noise and
// per-pixel fine noise. Fully determined by (seed, index).
Tensor synth_background(std::uint64_t seed, std::uint64_t index, std::size_t h,
                        std::size_t w);

// Elliptical region inscribed in an h x w bounding box; coordinates are
// relative to the box's top-left corner.
struct EllipseRegion {
  std::size_t h = 0, w = 0;
  bool contains(std::size_t dy, std::size_t dx) const;
  std::size_t pixel_count() const;
};

struct BBox {
  std::size_t y0 = 0, x0 = 0, h = 0, w = 0;
  bool intersects(const BBox& other) const;
};

Tensor crop(const Tensor& image, std::size_t y0, std::size_t x0, std::size_t h,
            std::size_t w);

// Copies the region's pixels out of `patch` into `image` at (y0, x0).
Tensor paste_region(const Tensor& image, const Tensor& patch, const EllipseRegion& region,
                    std::size_t y0, std::size_t x0);

// H x W binary mask with ones on the region's pixels.
Tensor region_mask(std::size_t image_h, std::size_t image_w, const EllipseRegion& region,
                   std::size_t y0, std::size_t x0);

// How visible `patch` would be if its region pixels were pasted at (y0, x0):
// L1 distance between per-channel means of the pasted content and of the
// border ring around the box, plus the same distance between per-channel
// standard deviations. Lower is better concealed.
double concealment_score(const Tensor& target, const Tensor& patch,
                         const EllipseRegion& region, std::size_t y0, std::size_t x0);

struct Placement {
  std::size_t y0 = 0, x0 = 0;
  double score = 0.0;
};

// Argmin of concealment_score over the stride grid of candidate positions;
// candidates whose bounding box intersects `exclude` are skipped. Throws when
// no candidate remains.
Placement best_placement(const Tensor& target, const Tensor& patch,
                         const EllipseRegion& region, std::size_t stride,
                         const std::optional<BBox>& exclude = std::nullopt);

// Same scan, but each candidate is scored on the target's own content there
// (used to pick which region to erase).
Placement best_hole_placement(const Tensor& target, const EllipseRegion& region,
                              std::size_t stride);

// Fills mask==1 pixels by iterative 4-neighbor diffusion from the surrounding
// image, starting from the boundary mean.
Tensor inpaint_region(const Tensor& image, const Tensor& mask, std::size_t iterations);

struct SynthSample {
  Tensor image;  // 3 x H x W
  Tensor mask;   // H x W, values {0,1}, 1 = forged
  ForgeryKind kind = ForgeryKind::splice;
  std::size_t donor_index = 0;  // meaningful for splice only
  double placement_score = 0.0;
};

constexpr std::size_t kInpaintIterations = 50;

SynthSample synthesize(ForgeryKind kind, const Tensor& background,
                       const std::vector<Tensor>& donor_pool, Rng& rng,
                       std::size_t stride = 4);

}  // namespace tbf
