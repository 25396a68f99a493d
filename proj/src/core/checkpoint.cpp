#include "checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace tbf {

namespace {

constexpr char kMagic[4] = {'T', 'B', 'F', '1'};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

// Cursor with truncation errors that name the missing field and its offset.
struct Reader {
  const std::vector<std::uint8_t>& buf;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) const {
    if (pos + n > buf.size())
      throw std::runtime_error("checkpoint: truncated at byte " + std::to_string(pos) +
                               " while reading " + what);
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(buf[pos] | (buf[pos + 1] << 8));
    pos += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return buf[pos++];
  }
  float f32(const char* what) {
    std::uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
};

}  // namespace

std::uint32_t crc32_ieee(const std::uint8_t* data, std::size_t n) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int b = 0; b < 8; ++b) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

void write_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors) {
  std::vector<std::uint8_t> buf;
  buf.insert(buf.end(), kMagic, kMagic + 4);
  put_u32(buf, kCheckpointVersion);
  put_u32(buf, static_cast<std::uint32_t>(tensors.size()));

  for (const auto& t : tensors) {
    if (t.name.empty() || t.name.size() > std::numeric_limits<std::uint16_t>::max())
      throw std::invalid_argument("checkpoint: bad tensor name length for '" + t.name + "'");
    if (t.shape.empty() || t.shape.size() > 255)
      throw std::invalid_argument("checkpoint: bad rank for '" + t.name + "'");
    if (shape_numel(t.shape) != t.data.size())
      throw std::invalid_argument("checkpoint: shape/data mismatch for '" + t.name + "'");
    put_u16(buf, static_cast<std::uint16_t>(t.name.size()));
    buf.insert(buf.end(), t.name.begin(), t.name.end());
    buf.push_back(static_cast<std::uint8_t>(t.shape.size()));
    for (std::size_t e : t.shape) put_u32(buf, static_cast<std::uint32_t>(e));
    for (double v : t.data) put_f32(buf, static_cast<float>(v));
  }

  put_u32(buf, crc32_ieee(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("checkpoint: write to '" + path + "' failed");
}

std::vector<NamedTensor> read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());

  if (buf.size() < 16)
    throw std::runtime_error("checkpoint: file too small (" + std::to_string(buf.size()) +
                             " bytes)");
  if (std::memcmp(buf.data(), kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic (not a checkpoint file)");

  const std::uint32_t stored_crc = static_cast<std::uint32_t>(buf[buf.size() - 4]) |
                                   (static_cast<std::uint32_t>(buf[buf.size() - 3]) << 8) |
                                   (static_cast<std::uint32_t>(buf[buf.size() - 2]) << 16) |
                                   (static_cast<std::uint32_t>(buf[buf.size() - 1]) << 24);
  if (crc32_ieee(buf.data(), buf.size() - 4) != stored_crc)
    throw std::runtime_error("checkpoint: CRC mismatch (file corrupted)");

  Reader r{buf};
  r.pos = 4;
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  const std::uint32_t count = r.u32("tensor count");

  std::vector<NamedTensor> tensors;
  tensors.reserve(count);
  const std::size_t payload_end = buf.size() - 4;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const std::uint16_t name_len = r.u16("name length");
    r.need(name_len, "tensor name");
    t.name.assign(reinterpret_cast<const char*>(buf.data() + r.pos), name_len);
    r.pos += name_len;
    const std::uint8_t rank = r.u8("rank");
    t.shape.resize(rank);
    std::size_t numel = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      t.shape[d] = r.u32("extent");
      numel *= t.shape[d];
    }
    t.data.resize(numel);
    for (std::size_t j = 0; j < numel; ++j) t.data[j] = static_cast<double>(r.f32("payload"));
    if (r.pos > payload_end)
      throw std::runtime_error("checkpoint: tensor '" + t.name + "' overruns the payload");
    tensors.push_back(std::move(t));
  }
  if (r.pos != payload_end)
    throw std::runtime_error("checkpoint: " + std::to_string(payload_end - r.pos) +
                             " unexpected trailing bytes");
  return tensors;
}

}  // namespace tbf
