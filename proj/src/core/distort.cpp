#include "distort.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace tbf {
namespace {

constexpr int kLuminanceTable[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99};

struct PlaneShape {
  std::size_t channels, h, w;
};

PlaneShape plane_shape(const Tensor& image, const char* who) {
  if (image.rank() == 2) return {1, image.extent(0), image.extent(1)};
  if (image.rank() == 3) return {image.extent(0), image.extent(1), image.extent(2)};
  throw std::invalid_argument(std::string(who) + ": expected HxW or CxHxW image, got " +
                              shape_str(image.shape()));
}

Tensor like_shape(const Tensor& ref, std::size_t h, std::size_t w) {
  if (ref.rank() == 2) return Tensor::zeros({h, w});
  return Tensor::zeros({ref.extent(0), h, w});
}

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

void quantize_block(double block[64], int quality) {
  const int s = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  for (int i = 0; i < 64; ++i) {
    int tq = (kLuminanceTable[i] * s + 50) / 100;
    tq = std::clamp(tq, 1, 255);
    block[i] = std::nearbyint(block[i] / tq) * tq;
  }
}

}  // namespace

DistortSpec parse_distort(const std::string& text) {
  DistortSpec spec;
  if (text.empty() || text == "none") return spec;
  auto colon = text.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("distort: expected KIND:PARAM, got \"" + text + "\"");
  const std::string kind = text.substr(0, colon);
  const std::string param = text.substr(colon + 1);
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(param, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("distort: bad parameter \"" + param + "\"");
  }
  if (used != param.size())
    throw std::invalid_argument("distort: bad parameter \"" + param + "\"");
  if (kind == "resize") {
    spec.kind = DistortSpec::Kind::resize;
    if (!(value > 0.0) || value > 1.0)
      throw std::invalid_argument("distort: resize factor must be in (0, 1], got " + param);
    spec.factor = value;
  } else if (kind == "gaussian_blur") {
    spec.kind = DistortSpec::Kind::gaussian_blur;
    if (value < 3.0 || value != std::floor(value) || std::fmod(value, 2.0) != 1.0)
      throw std::invalid_argument("distort: blur kernel size must be odd and >= 3, got " +
                                  param);
    spec.ksize = static_cast<std::size_t>(value);
  } else if (kind == "jpeg") {
    spec.kind = DistortSpec::Kind::jpeg;
    if (value < 1.0 || value > 100.0 || value != std::floor(value))
      throw std::invalid_argument("distort: jpeg quality must be an integer in [1, 100], got " +
                                  param);
    spec.quality = static_cast<int>(value);
  } else {
    throw std::invalid_argument("distort: unknown kind \"" + kind + "\"");
  }
  return spec;
}

std::string distort_name(const DistortSpec& spec) {
  char buf[64];
  switch (spec.kind) {
    case DistortSpec::Kind::none:
      return "none";
    case DistortSpec::Kind::resize:
      std::snprintf(buf, sizeof(buf), "resize:%g", spec.factor);
      return buf;
    case DistortSpec::Kind::gaussian_blur:
      std::snprintf(buf, sizeof(buf), "gaussian_blur:%zu", spec.ksize);
      return buf;
    case DistortSpec::Kind::jpeg:
      std::snprintf(buf, sizeof(buf), "jpeg:%d", spec.quality);
      return buf;
  }
  return "none";
}

Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w) {
  PlaneShape in = plane_shape(image, "resize_bilinear");
  if (out_h == 0 || out_w == 0)
    throw std::invalid_argument("resize_bilinear: output dimensions must be positive");
  if (out_h == in.h && out_w == in.w) return image;
  Tensor out = like_shape(image, out_h, out_w);
  const auto& src = image.data();
  auto& dst = out.mutable_data();
  const double sy_scale = static_cast<double>(in.h) / static_cast<double>(out_h);
  const double sx_scale = static_cast<double>(in.w) / static_cast<double>(out_w);
  for (std::size_t c = 0; c < in.channels; ++c) {
    const double* plane = src.data() + c * in.h * in.w;
    double* oplane = dst.data() + c * out_h * out_w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      double sy = (oy + 0.5) * sy_scale - 0.5;
      sy = std::clamp(sy, 0.0, static_cast<double>(in.h - 1));
      const std::size_t y0 = static_cast<std::size_t>(sy);
      const std::size_t y1 = std::min(y0 + 1, in.h - 1);
      const double fy = sy - static_cast<double>(y0);
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        double sx = (ox + 0.5) * sx_scale - 0.5;
        sx = std::clamp(sx, 0.0, static_cast<double>(in.w - 1));
        const std::size_t x0 = static_cast<std::size_t>(sx);
        const std::size_t x1 = std::min(x0 + 1, in.w - 1);
        const double fx = sx - static_cast<double>(x0);
        const double top = plane[y0 * in.w + x0] * (1.0 - fx) + plane[y0 * in.w + x1] * fx;
        const double bot = plane[y1 * in.w + x0] * (1.0 - fx) + plane[y1 * in.w + x1] * fx;
        oplane[oy * out_w + ox] = top * (1.0 - fy) + bot * fy;
      }
    }
  }
  return out;
}

Tensor resize_by_factor(const Tensor& image, double factor) {
  if (!(factor > 0.0) || factor > 1.0)
    throw std::invalid_argument("resize: factor must be in (0, 1]");
  if (factor == 1.0) return image;
  PlaneShape in = plane_shape(image, "resize");
  const std::size_t out_h =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(in.h * factor)));
  const std::size_t out_w =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(in.w * factor)));
  return resize_bilinear(image, out_h, out_w);
}

std::vector<double> gaussian_taps(std::size_t ksize) {
  if (ksize == 0 || ksize % 2 == 0)
    throw std::invalid_argument("gaussian_taps: kernel size must be odd and >= 1");
  const double sigma = 0.3 * ((static_cast<double>(ksize) - 1.0) / 2.0 - 1.0) + 0.8;
  const std::ptrdiff_t c = static_cast<std::ptrdiff_t>(ksize) / 2;
  std::vector<double> taps(ksize);
  double sum = 0.0;
  for (std::size_t i = 0; i < ksize; ++i) {
    const double d = static_cast<double>(static_cast<std::ptrdiff_t>(i) - c);
    taps[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

Tensor gaussian_blur(const Tensor& image, std::size_t ksize) {
  PlaneShape in = plane_shape(image, "gaussian_blur");
  const std::vector<double> taps = gaussian_taps(ksize);
  const std::ptrdiff_t radius = static_cast<std::ptrdiff_t>(ksize) / 2;
  const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(in.h);
  const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(in.w);
  // Convolution written as center + weighted differences: since the taps sum
  // to one the result is algebraically identical, and a constant input comes
  // back bit-for-bit.
  auto pass = [&](const std::vector<double>& src, std::vector<double>& dst, bool rows) {
    for (std::size_t c = 0; c < in.channels; ++c) {
      const double* plane = src.data() + c * in.h * in.w;
      double* oplane = dst.data() + c * in.h * in.w;
      for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < w; ++x) {
          const double center = plane[y * w + x];
          double acc = 0.0;
          for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
            std::ptrdiff_t sy = y, sx = x;
            if (rows) {
              sx = std::clamp<std::ptrdiff_t>(x + t, 0, w - 1);
            } else {
              sy = std::clamp<std::ptrdiff_t>(y + t, 0, h - 1);
            }
            acc += taps[static_cast<std::size_t>(t + radius)] * (plane[sy * w + sx] - center);
          }
          oplane[y * w + x] = center + acc;
        }
      }
    }
  };
  std::vector<double> mid(image.size()), out(image.size());
  pass(image.data(), mid, true);
  pass(mid, out, false);
  Tensor result = like_shape(image, in.h, in.w);
  result.mutable_data() = std::move(out);
  return result;
}

Tensor jpeg_roundtrip(const Tensor& image, int quality) {
  if (quality < 1 || quality > 100)
    throw std::invalid_argument("jpeg: quality must be in [1, 100]");
  PlaneShape in = plane_shape(image, "jpeg");
  const std::size_t ph = (in.h + 7) / 8 * 8, pw = (in.w + 7) / 8 * 8;

  double cosine[8][8];  // cosine[u][x] = cos((2x+1)*u*pi/16)
  for (int u = 0; u < 8; ++u)
    for (int x = 0; x < 8; ++x)
      cosine[u][x] = std::cos((2.0 * x + 1.0) * u * 3.14159265358979323846 / 16.0);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  auto alpha = [&](int u) { return u == 0 ? inv_sqrt2 : 1.0; };

  Tensor out = like_shape(image, in.h, in.w);
  const auto& src = image.data();
  auto& dst = out.mutable_data();
  std::vector<double> padded(ph * pw);
  for (std::size_t c = 0; c < in.channels; ++c) {
    const double* plane = src.data() + c * in.h * in.w;
    // Level-shifted 0..255 samples, edge rows/columns replicated out to a
    // multiple of the block size.
    for (std::size_t y = 0; y < ph; ++y) {
      const std::size_t sy = std::min(y, in.h - 1);
      for (std::size_t x = 0; x < pw; ++x) {
        const std::size_t sx = std::min(x, in.w - 1);
        padded[y * pw + x] = plane[sy * in.w + sx] * 255.0 - 128.0;
      }
    }
    for (std::size_t by = 0; by < ph; by += 8) {
      for (std::size_t bx = 0; bx < pw; bx += 8) {
        double freq[64];
        for (int u = 0; u < 8; ++u) {
          for (int v = 0; v < 8; ++v) {
            double acc = 0.0;
            for (int y = 0; y < 8; ++y)
              for (int x = 0; x < 8; ++x)
                acc += padded[(by + y) * pw + (bx + x)] * cosine[u][y] * cosine[v][x];
            freq[u * 8 + v] = 0.25 * alpha(u) * alpha(v) * acc;
          }
        }
        quantize_block(freq, quality);
        for (int y = 0; y < 8; ++y) {
          for (int x = 0; x < 8; ++x) {
            double acc = 0.0;
            for (int u = 0; u < 8; ++u)
              for (int v = 0; v < 8; ++v)
                acc += alpha(u) * alpha(v) * freq[u * 8 + v] * cosine[u][y] * cosine[v][x];
            padded[(by + y) * pw + (bx + x)] = 0.25 * acc;
          }
        }
      }
    }
    double* oplane = dst.data() + c * in.h * in.w;
    for (std::size_t y = 0; y < in.h; ++y)
      for (std::size_t x = 0; x < in.w; ++x)
        oplane[y * in.w + x] = clamp01((padded[y * pw + x] + 128.0) / 255.0);
  }
  return out;
}

Tensor apply_distortion(const Tensor& image, const DistortSpec& spec) {
  Tensor out;
  switch (spec.kind) {
    case DistortSpec::Kind::none:
      return image;
    case DistortSpec::Kind::resize:
      out = resize_by_factor(image, spec.factor);
      break;
    case DistortSpec::Kind::gaussian_blur:
      out = gaussian_blur(image, spec.ksize);
      break;
    case DistortSpec::Kind::jpeg:
      out = jpeg_roundtrip(image, spec.quality);
      break;
  }
  if (out.impl() == image.impl()) return image;  // identity resize: leave input alone
  for (double& v : out.mutable_data()) v = clamp01(v);
  return out;
}

}  // namespace tbf
