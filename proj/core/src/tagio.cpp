#include "mirpairs/tagio.hpp"

#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace mirpairs {
namespace tagio {

namespace {

constexpr std::array<char, 8> kMagic = {'M', 'I', 'R', 'T', 'A', 'G', '1', '\0'};
constexpr std::size_t kHeaderBytes = 8 + 4 + 8 + 3 * 8 + 8 + 8;
constexpr std::size_t kRecordBytes = 9;

[[noreturn]] void fail(const std::string& path, std::size_t offset, const std::string& what) {
  throw std::runtime_error("tag file '" + path + "': " + what + " at byte offset " +
                           std::to_string(offset));
}

// Fixed little-endian packing keeps files portable across hosts.
void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u64(std::vector<unsigned char>& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_f64(std::vector<unsigned char>& buf, double v) {
  std::uint64_t bits = 0;
  static_assert(sizeof(bits) == sizeof(v));
  std::memcpy(&bits, &v, sizeof(bits));
  put_u64(buf, bits);
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

double get_f64(const unsigned char* p) {
  const std::uint64_t bits = get_u64(p);
  double v = 0.0;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace

void write_tags(const std::string& path, const pairsource::TagStream& stream) {
  std::vector<unsigned char> buf;
  buf.reserve(kHeaderBytes + kRecordBytes * stream.tags.size());
  buf.insert(buf.end(), kMagic.begin(), kMagic.end());
  put_u32(buf, kFormatVersion);
  put_u64(buf, stream.meta.seed);
  put_f64(buf, stream.meta.peak_power_w);
  put_f64(buf, stream.meta.duration_s);
  put_f64(buf, stream.meta.rep_rate_hz);
  put_u64(buf, stream.meta.config_hash);
  put_u64(buf, static_cast<std::uint64_t>(stream.tags.size()));
  for (const pairsource::TimeTag& tag : stream.tags) {
    buf.push_back(tag.channel);
    put_u64(buf, static_cast<std::uint64_t>(tag.t_ps));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("tag file '" + path + "': cannot open for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("tag file '" + path + "': write failed");
}

pairsource::TagStream read_tags(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("tag file '" + path + "': cannot open for reading");
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());

  if (buf.size() < kHeaderBytes) fail(path, buf.size(), "truncated header");
  if (std::memcmp(buf.data(), kMagic.data(), kMagic.size()) != 0)
    fail(path, 0, "bad magic (not a tag file)");
  const std::uint32_t version = get_u32(buf.data() + 8);
  if (version != kFormatVersion)
    fail(path, 8, "unsupported format version " + std::to_string(version));

  pairsource::TagStream stream;
  stream.meta.seed = get_u64(buf.data() + 12);
  stream.meta.peak_power_w = get_f64(buf.data() + 20);
  stream.meta.duration_s = get_f64(buf.data() + 28);
  stream.meta.rep_rate_hz = get_f64(buf.data() + 36);
  stream.meta.config_hash = get_u64(buf.data() + 44);
  const std::uint64_t count = get_u64(buf.data() + 52);

  const std::size_t want = kHeaderBytes + kRecordBytes * count;
  if (buf.size() < want)
    fail(path, buf.size(), "truncated records (expected " + std::to_string(want) + " bytes)");
  if (buf.size() > want) fail(path, want, "trailing bytes after last record");

  stream.tags.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t off = kHeaderBytes + kRecordBytes * i;
    const std::uint8_t channel = buf[off];
    if (channel > 1) fail(path, off, "channel out of range");
    stream.tags[i].channel = channel;
    stream.tags[i].t_ps = static_cast<std::int64_t>(get_u64(buf.data() + off + 1));
  }
  return stream;
}

void write_tags_csv(const std::string& path, const pairsource::TagStream& stream) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("tag file '" + path + "': cannot open for writing");
  char line[128];
  std::snprintf(line, sizeof(line), "# seed=%llu\n",
                static_cast<unsigned long long>(stream.meta.seed));
  out << line;
  std::snprintf(line, sizeof(line), "# peak_power_w=%.10g\n", stream.meta.peak_power_w);
  out << line;
  std::snprintf(line, sizeof(line), "# duration_s=%.10g\n", stream.meta.duration_s);
  out << line;
  std::snprintf(line, sizeof(line), "# rep_rate_hz=%.10g\n", stream.meta.rep_rate_hz);
  out << line;
  std::snprintf(line, sizeof(line), "# config_hash=%llu\n",
                static_cast<unsigned long long>(stream.meta.config_hash));
  out << line;
  out << "channel,t_ps\n";
  for (const pairsource::TimeTag& tag : stream.tags) {
    std::snprintf(line, sizeof(line), "%u,%lld\n", static_cast<unsigned>(tag.channel),
                  static_cast<long long>(tag.t_ps));
    out << line;
  }
  if (!out) throw std::runtime_error("tag file '" + path + "': write failed");
}

}  // namespace tagio
}  // namespace mirpairs
