#include "synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "distort.hpp"

namespace tbf {
namespace {

constexpr std::size_t kRingWidth = 2;

void require_image(const Tensor& t, const char* who) {
  if (t.rank() != 3 || t.extent(0) != 3)
    throw std::invalid_argument(std::string(who) + ": expected 3xHxW image, got " +
                                shape_str(t.shape()));
}

struct ChannelStats {
  double mean[3] = {0, 0, 0};
  double stddev[3] = {0, 0, 0};
};

// Population mean/std per channel over an arbitrary pixel set.
template <typename Visit>
ChannelStats stats_over(const Tensor& image, std::size_t count, Visit&& visit) {
  ChannelStats s;
  if (count == 0) return s;
  const std::size_t h = image.extent(1), w = image.extent(2);
  const auto& d = image.data();
  double sum[3] = {0, 0, 0}, sumsq[3] = {0, 0, 0};
  visit([&](std::size_t y, std::size_t x) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = d[(c * h + y) * w + x];
      sum[c] += v;
      sumsq[c] += v * v;
    }
  });
  for (std::size_t c = 0; c < 3; ++c) {
    s.mean[c] = sum[c] / static_cast<double>(count);
    const double var = sumsq[c] / static_cast<double>(count) - s.mean[c] * s.mean[c];
    s.stddev[c] = std::sqrt(std::max(0.0, var));
  }
  return s;
}

std::size_t ring_pixel_count(std::size_t image_h, std::size_t image_w,
                             const EllipseRegion& region, std::size_t y0, std::size_t x0) {
  std::size_t count = 0;
  const std::size_t ry0 = y0 >= kRingWidth ? y0 - kRingWidth : 0;
  const std::size_t rx0 = x0 >= kRingWidth ? x0 - kRingWidth : 0;
  const std::size_t ry1 = std::min(image_h, y0 + region.h + kRingWidth);
  const std::size_t rx1 = std::min(image_w, x0 + region.w + kRingWidth);
  for (std::size_t y = ry0; y < ry1; ++y)
    for (std::size_t x = rx0; x < rx1; ++x) {
      const bool in_region = y >= y0 && y < y0 + region.h && x >= x0 &&
                             x < x0 + region.w && region.contains(y - y0, x - x0);
      if (!in_region) ++count;
    }
  return count;
}

}  // namespace

const char* forgery_kind_name(ForgeryKind kind) {
  switch (kind) {
    case ForgeryKind::splice:
      return "splice";
    case ForgeryKind::copymove:
      return "copymove";
    case ForgeryKind::removal:
      return "removal";
  }
  return "splice";
}

ForgeryKind forgery_kind_from_name(const std::string& name) {
  if (name == "splice") return ForgeryKind::splice;
  if (name == "copymove") return ForgeryKind::copymove;
  if (name == "removal") return ForgeryKind::removal;
  throw std::invalid_argument("unknown forgery kind \"" + name + "\"");
}

Tensor synth_background(std::uint64_t seed, std::uint64_t index, std::size_t h,
                        std::size_t w) {
  if (h == 0 || w == 0)
    throw std::invalid_argument("synth_background: dimensions must be positive");
  Rng rng = Rng(seed).stream(index, 0xB6CD);
  double c0[3], c1[3];
  for (int c = 0; c < 3; ++c) c0[c] = rng.uniform(0.15, 0.85);
  for (int c = 0; c < 3; ++c) c1[c] = rng.uniform(0.15, 0.85);
  const double theta = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  const double ax = std::cos(theta), ay = std::sin(theta);
  const double lo = std::min(0.0, ax) + std::min(0.0, ay);
  const double hi = std::max(0.0, ax) + std::max(0.0, ay);

  const std::size_t gh = std::max<std::size_t>(2, h / 8);
  const std::size_t gw = std::max<std::size_t>(2, w / 8);
  Tensor coarse = Tensor::zeros({3, gh, gw});
  for (double& v : coarse.mutable_data()) v = rng.uniform(-0.18, 0.18);
  Tensor coarse_up = resize_bilinear(coarse, h, w);

  Tensor out = Tensor::zeros({3, h, w});
  auto& d = out.mutable_data();
  const auto& cu = coarse_up.data();
  for (std::size_t y = 0; y < h; ++y) {
    const double fy = h > 1 ? static_cast<double>(y) / static_cast<double>(h - 1) : 0.0;
    for (std::size_t x = 0; x < w; ++x) {
      const double fx = w > 1 ? static_cast<double>(x) / static_cast<double>(w - 1) : 0.0;
      const double t = (fx * ax + fy * ay - lo) / (hi - lo);
      const double fine = rng.uniform(-0.03, 0.03);
      for (std::size_t c = 0; c < 3; ++c) {
        double v = c0[c] + (c1[c] - c0[c]) * t + cu[(c * h + y) * w + x] + fine;
        d[(c * h + y) * w + x] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return out;
}

bool EllipseRegion::contains(std::size_t dy, std::size_t dx) const {
  if (dy >= h || dx >= w) return false;
  const double ry = static_cast<double>(h) / 2.0, rx = static_cast<double>(w) / 2.0;
  const double py = (static_cast<double>(dy) + 0.5 - ry) / ry;
  const double px = (static_cast<double>(dx) + 0.5 - rx) / rx;
  return py * py + px * px <= 1.0;
}

std::size_t EllipseRegion::pixel_count() const {
  std::size_t n = 0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      if (contains(y, x)) ++n;
  return n;
}

bool BBox::intersects(const BBox& other) const {
  return y0 < other.y0 + other.h && other.y0 < y0 + h && x0 < other.x0 + other.w &&
         other.x0 < x0 + w;
}

Tensor crop(const Tensor& image, std::size_t y0, std::size_t x0, std::size_t h,
            std::size_t w) {
  require_image(image, "crop");
  const std::size_t ih = image.extent(1), iw = image.extent(2);
  if (h == 0 || w == 0 || y0 + h > ih || x0 + w > iw)
    throw std::invalid_argument("crop: region out of bounds");
  Tensor out = Tensor::zeros({3, h, w});
  auto& d = out.mutable_data();
  const auto& s = image.data();
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        d[(c * h + y) * w + x] = s[(c * ih + y0 + y) * iw + x0 + x];
  return out;
}

Tensor paste_region(const Tensor& image, const Tensor& patch, const EllipseRegion& region,
                    std::size_t y0, std::size_t x0) {
  require_image(image, "paste_region");
  require_image(patch, "paste_region");
  const std::size_t ih = image.extent(1), iw = image.extent(2);
  if (patch.extent(1) != region.h || patch.extent(2) != region.w)
    throw std::invalid_argument("paste_region: patch does not match region box");
  if (y0 + region.h > ih || x0 + region.w > iw)
    throw std::invalid_argument("paste_region: region out of bounds");
  Tensor out = Tensor::from_data(image.shape(), image.data());
  auto& d = out.mutable_data();
  const auto& p = patch.data();
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < region.h; ++y)
      for (std::size_t x = 0; x < region.w; ++x)
        if (region.contains(y, x))
          d[(c * ih + y0 + y) * iw + x0 + x] = p[(c * region.h + y) * region.w + x];
  return out;
}

Tensor region_mask(std::size_t image_h, std::size_t image_w, const EllipseRegion& region,
                   std::size_t y0, std::size_t x0) {
  if (y0 + region.h > image_h || x0 + region.w > image_w)
    throw std::invalid_argument("region_mask: region out of bounds");
  Tensor mask = Tensor::zeros({image_h, image_w});
  auto& d = mask.mutable_data();
  for (std::size_t y = 0; y < region.h; ++y)
    for (std::size_t x = 0; x < region.w; ++x)
      if (region.contains(y, x)) d[(y0 + y) * image_w + x0 + x] = 1.0;
  return mask;
}

double concealment_score(const Tensor& target, const Tensor& patch,
                         const EllipseRegion& region, std::size_t y0, std::size_t x0) {
  require_image(target, "concealment_score");
  require_image(patch, "concealment_score");
  const std::size_t ih = target.extent(1), iw = target.extent(2);
  if (y0 + region.h > ih || x0 + region.w > iw)
    throw std::invalid_argument("concealment_score: region out of bounds");

  std::size_t region_count = region.pixel_count();
  ChannelStats rs = stats_over(patch, region_count, [&](auto&& fn) {
    for (std::size_t y = 0; y < region.h; ++y)
      for (std::size_t x = 0; x < region.w; ++x)
        if (region.contains(y, x)) fn(y, x);
  });

  const std::size_t ring_count = ring_pixel_count(ih, iw, region, y0, x0);
  ChannelStats gs = stats_over(target, ring_count, [&](auto&& fn) {
    const std::size_t ry0 = y0 >= kRingWidth ? y0 - kRingWidth : 0;
    const std::size_t rx0 = x0 >= kRingWidth ? x0 - kRingWidth : 0;
    const std::size_t ry1 = std::min(ih, y0 + region.h + kRingWidth);
    const std::size_t rx1 = std::min(iw, x0 + region.w + kRingWidth);
    for (std::size_t y = ry0; y < ry1; ++y)
      for (std::size_t x = rx0; x < rx1; ++x) {
        const bool in_region = y >= y0 && y < y0 + region.h && x >= x0 &&
                               x < x0 + region.w && region.contains(y - y0, x - x0);
        if (!in_region) fn(y, x);
      }
  });

  double score = 0.0;
  for (std::size_t c = 0; c < 3; ++c)
    score += std::abs(rs.mean[c] - gs.mean[c]) + std::abs(rs.stddev[c] - gs.stddev[c]);
  return score;
}

Placement best_placement(const Tensor& target, const Tensor& patch,
                         const EllipseRegion& region, std::size_t stride,
                         const std::optional<BBox>& exclude) {
  require_image(target, "best_placement");
  if (stride == 0) throw std::invalid_argument("best_placement: stride must be positive");
  const std::size_t ih = target.extent(1), iw = target.extent(2);
  if (region.h > ih || region.w > iw)
    throw std::invalid_argument("best_placement: region larger than target");
  bool found = false;
  Placement best;
  for (std::size_t y0 = 0; y0 + region.h <= ih; y0 += stride) {
    for (std::size_t x0 = 0; x0 + region.w <= iw; x0 += stride) {
      if (exclude && exclude->intersects({y0, x0, region.h, region.w})) continue;
      const double s = concealment_score(target, patch, region, y0, x0);
      if (!found || s < best.score) {
        best = {y0, x0, s};
        found = true;
      }
    }
  }
  if (!found)
    throw std::runtime_error("best_placement: no non-overlapping candidate position");
  return best;
}

Placement best_hole_placement(const Tensor& target, const EllipseRegion& region,
                              std::size_t stride) {
  require_image(target, "best_hole_placement");
  if (stride == 0)
    throw std::invalid_argument("best_hole_placement: stride must be positive");
  const std::size_t ih = target.extent(1), iw = target.extent(2);
  if (region.h > ih || region.w > iw)
    throw std::invalid_argument("best_hole_placement: region larger than target");
  bool found = false;
  Placement best;
  for (std::size_t y0 = 0; y0 + region.h <= ih; y0 += stride) {
    for (std::size_t x0 = 0; x0 + region.w <= iw; x0 += stride) {
      Tensor content = crop(target, y0, x0, region.h, region.w);
      const double s = concealment_score(target, content, region, y0, x0);
      if (!found || s < best.score) {
        best = {y0, x0, s};
        found = true;
      }
    }
  }
  if (!found) throw std::runtime_error("best_hole_placement: no candidate position");
  return best;
}

Tensor inpaint_region(const Tensor& image, const Tensor& mask, std::size_t iterations) {
  require_image(image, "inpaint_region");
  const std::size_t h = image.extent(1), w = image.extent(2);
  if (mask.rank() != 2 || mask.extent(0) != h || mask.extent(1) != w)
    throw std::invalid_argument("inpaint_region: mask shape mismatch");
  const auto& m = mask.data();
  std::vector<std::size_t> hole;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] != 0.0 && m[i] != 1.0)
      throw std::invalid_argument("inpaint_region: mask must be binary");
    if (m[i] == 1.0) hole.push_back(i);
  }
  Tensor out = Tensor::from_data(image.shape(), image.data());
  if (hole.empty()) return out;
  auto& d = out.mutable_data();

  // Seed the hole with the mean color of its outside boundary.
  double seed_color[3] = {0.5, 0.5, 0.5};
  {
    double sum[3] = {0, 0, 0};
    std::size_t count = 0;
    for (std::size_t idx : hole) {
      const std::size_t y = idx / w, x = idx % w;
      const std::ptrdiff_t offs[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
      for (auto& o : offs) {
        const std::ptrdiff_t ny = static_cast<std::ptrdiff_t>(y) + o[0];
        const std::ptrdiff_t nx = static_cast<std::ptrdiff_t>(x) + o[1];
        if (ny < 0 || nx < 0 || ny >= static_cast<std::ptrdiff_t>(h) ||
            nx >= static_cast<std::ptrdiff_t>(w))
          continue;
        const std::size_t nidx = static_cast<std::size_t>(ny) * w +
                                 static_cast<std::size_t>(nx);
        if (m[nidx] == 1.0) continue;
        for (std::size_t c = 0; c < 3; ++c) sum[c] += d[c * h * w + nidx];
        ++count;
      }
    }
    if (count > 0)
      for (std::size_t c = 0; c < 3; ++c)
        seed_color[c] = sum[c] / static_cast<double>(count);
  }
  for (std::size_t idx : hole)
    for (std::size_t c = 0; c < 3; ++c) d[c * h * w + idx] = seed_color[c];

  std::vector<double> next(d.size());
  for (std::size_t it = 0; it < iterations; ++it) {
    next = d;
    for (std::size_t idx : hole) {
      const std::size_t y = idx / w, x = idx % w;
      const std::ptrdiff_t offs[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
      for (std::size_t c = 0; c < 3; ++c) {
        double sum = 0.0;
        std::size_t count = 0;
        for (auto& o : offs) {
          const std::ptrdiff_t ny = static_cast<std::ptrdiff_t>(y) + o[0];
          const std::ptrdiff_t nx = static_cast<std::ptrdiff_t>(x) + o[1];
          if (ny < 0 || nx < 0 || ny >= static_cast<std::ptrdiff_t>(h) ||
              nx >= static_cast<std::ptrdiff_t>(w))
            continue;
          sum += d[(c * h + static_cast<std::size_t>(ny)) * w + static_cast<std::size_t>(nx)];
          ++count;
        }
        if (count > 0) next[c * h * w + idx] = sum / static_cast<double>(count);
      }
    }
    d.swap(next);
  }
  return out;
}

SynthSample synthesize(ForgeryKind kind, const Tensor& background,
                       const std::vector<Tensor>& donor_pool, Rng& rng,
                       std::size_t stride) {
  require_image(background, "synthesize");
  const std::size_t h = background.extent(1), w = background.extent(2);
  if (h < 16 || w < 16)
    throw std::invalid_argument("synthesize: background must be at least 16x16");

  // Region box: generous for pastes, tighter for copy-move so a disjoint
  // destination always has room.
  const bool tight = kind == ForgeryKind::copymove;
  const std::size_t lo_h = std::max<std::size_t>(4, tight ? h / 5 : h / 4);
  const std::size_t hi_h = std::max(lo_h, tight ? h / 3 : h / 2);
  const std::size_t lo_w = std::max<std::size_t>(4, tight ? w / 5 : w / 4);
  const std::size_t hi_w = std::max(lo_w, tight ? w / 3 : w / 2);
  EllipseRegion region;
  region.h = lo_h + rng.below(hi_h - lo_h + 1);
  region.w = lo_w + rng.below(hi_w - lo_w + 1);
  if (region.h >= h || region.w >= w)
    throw std::invalid_argument("synthesize: background too small for donor region");

  SynthSample sample;
  sample.kind = kind;
  switch (kind) {
    case ForgeryKind::splice: {
      if (donor_pool.empty())
        throw std::invalid_argument("synthesize: splice needs a donor pool");
      sample.donor_index = rng.below(donor_pool.size());
      const Tensor& donor = donor_pool[sample.donor_index];
      require_image(donor, "synthesize");
      if (donor.extent(1) < region.h || donor.extent(2) < region.w)
        throw std::invalid_argument("synthesize: donor smaller than region");
      const std::size_t sy = rng.below(donor.extent(1) - region.h + 1);
      const std::size_t sx = rng.below(donor.extent(2) - region.w + 1);
      Tensor patch = crop(donor, sy, sx, region.h, region.w);
      Placement place = best_placement(background, patch, region, stride);
      sample.image = paste_region(background, patch, region, place.y0, place.x0);
      sample.mask = region_mask(h, w, region, place.y0, place.x0);
      sample.placement_score = place.score;
      break;
    }
    case ForgeryKind::copymove: {
      const std::size_t sy = rng.below(h - region.h + 1);
      const std::size_t sx = rng.below(w - region.w + 1);
      Tensor patch = crop(background, sy, sx, region.h, region.w);
      BBox source{sy, sx, region.h, region.w};
      Placement place = best_placement(background, patch, region, stride, source);
      sample.image = paste_region(background, patch, region, place.y0, place.x0);
      sample.mask = region_mask(h, w, region, place.y0, place.x0);
      sample.placement_score = place.score;
      break;
    }
    case ForgeryKind::removal: {
      Placement place = best_hole_placement(background, region, stride);
      sample.mask = region_mask(h, w, region, place.y0, place.x0);
      sample.image = inpaint_region(background, sample.mask, kInpaintIterations);
      sample.placement_score = place.score;
      break;
    }
  }
  return sample;
}

}  // namespace tbf
