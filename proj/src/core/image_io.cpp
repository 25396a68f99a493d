#include "image_io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace tbf {
namespace {

std::uint8_t quantize(double v) {
  double scaled = std::lround(v * 255.0);
  if (scaled < 0.0) scaled = 0.0;
  if (scaled > 255.0) scaled = 255.0;
  return static_cast<std::uint8_t>(scaled);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("image: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("image: cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("image: short write to " + path);
}

// Cursor over a PNM header; reports the byte offset of any malformation.
struct HeaderReader {
  const std::vector<std::uint8_t>& bytes;
  const std::string& path;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error("image: " + path + ": " + what + " at byte " +
                             std::to_string(pos));
  }

  bool at_end() const { return pos >= bytes.size(); }

  // Whitespace separates header tokens; '#' starts a comment running to end of line.
  void skip_separators() {
    while (!at_end()) {
      std::uint8_t c = bytes[pos];
      if (c == '#') {
        while (!at_end() && bytes[pos] != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos;
      } else {
        return;
      }
    }
  }

  std::size_t read_number(const char* what) {
    skip_separators();
    if (at_end()) fail(std::string("missing ") + what);
    if (bytes[pos] < '0' || bytes[pos] > '9')
      fail(std::string("expected digit for ") + what);
    std::size_t value = 0;
    while (!at_end() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      value = value * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (value > 1u << 24) fail(std::string(what) + " out of range");
      ++pos;
    }
    return value;
  }
};

// Parses "P6"/"P5", dimensions, maxval; returns the offset where pixel data starts.
struct PnmHeader {
  std::size_t width = 0, height = 0, data_offset = 0;
};

PnmHeader parse_header(const std::vector<std::uint8_t>& bytes, const std::string& path,
                       char expected_kind) {
  HeaderReader r{bytes, path};
  if (bytes.size() < 2) r.fail("missing magic number");
  if (bytes[0] != 'P' || bytes[1] != expected_kind) {
    throw std::runtime_error("image: " + path + ": expected P" +
                             std::string(1, expected_kind) + " magic at byte 0");
  }
  r.pos = 2;
  PnmHeader h;
  h.width = r.read_number("width");
  h.height = r.read_number("height");
  if (h.width == 0 || h.height == 0) r.fail("zero image dimension");
  std::size_t maxval = r.read_number("maxval");
  if (maxval != 255) {
    r.fail("unsupported maxval " + std::to_string(maxval) + " (only 255)");
  }
  if (r.at_end()) r.fail("missing raster separator");
  std::uint8_t sep = bytes[r.pos];
  if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n')
    r.fail("expected single whitespace before raster");
  h.data_offset = r.pos + 1;
  return h;
}

void check_payload(const std::vector<std::uint8_t>& bytes, const std::string& path,
                   std::size_t offset, std::size_t needed) {
  if (bytes.size() < offset + needed) {
    throw std::runtime_error("image: " + path + ": truncated raster at byte " +
                             std::to_string(bytes.size()) + " (need " +
                             std::to_string(offset + needed) + " bytes)");
  }
  if (bytes.size() > offset + needed) {
    throw std::runtime_error("image: " + path + ": trailing data at byte " +
                             std::to_string(offset + needed));
  }
}

}  // namespace

void save_ppm(const std::string& path, const Tensor& image) {
  if (image.rank() != 3 || image.extent(0) != 3)
    throw std::invalid_argument("save_ppm: expected 3xHxW image, got " +
                                shape_str(image.shape()));
  const std::size_t h = image.extent(1), w = image.extent(2);
  std::string header = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.reserve(bytes.size() + h * w * 3);
  const auto& d = image.data();
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        bytes.push_back(quantize(d[(c * h + y) * w + x]));
  write_file(path, bytes);
}

Tensor load_ppm(const std::string& path) {
  auto bytes = read_file(path);
  PnmHeader hd = parse_header(bytes, path, '6');
  check_payload(bytes, path, hd.data_offset, hd.width * hd.height * 3);
  Tensor out = Tensor::zeros({3, hd.height, hd.width});
  auto& d = out.mutable_data();
  std::size_t p = hd.data_offset;
  for (std::size_t y = 0; y < hd.height; ++y)
    for (std::size_t x = 0; x < hd.width; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        d[(c * hd.height + y) * hd.width + x] = bytes[p++] / 255.0;
  return out;
}

void save_pgm(const std::string& path, const Tensor& gray) {
  if (gray.rank() != 2)
    throw std::invalid_argument("save_pgm: expected HxW image, got " +
                                shape_str(gray.shape()));
  const std::size_t h = gray.extent(0), w = gray.extent(1);
  std::string header = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.reserve(bytes.size() + h * w);
  for (double v : gray.data()) bytes.push_back(quantize(v));
  write_file(path, bytes);
}

Tensor load_pgm(const std::string& path) {
  auto bytes = read_file(path);
  PnmHeader hd = parse_header(bytes, path, '5');
  check_payload(bytes, path, hd.data_offset, hd.width * hd.height);
  Tensor out = Tensor::zeros({hd.height, hd.width});
  auto& d = out.mutable_data();
  for (std::size_t i = 0; i < hd.width * hd.height; ++i)
    d[i] = bytes[hd.data_offset + i] / 255.0;
  return out;
}

}  // namespace tbf
