#pragma once

#include <string>

#include "mirpairs/pairsource.hpp"

// Time-tag container files. The binary format is little-endian:
//   bytes 0-7   magic "MIRTAG1\0"
//   u32         format version (1)
//   u64         rng seed
//   f64         peak power [W], acquisition duration [s], repetition rate [Hz]
//   u64         configuration hash, record count
//   records     count x { u8 channel, i64 time [ps] } packed, 9 bytes each
// Parse errors report the byte offset of the offending field.

namespace mirpairs {
namespace tagio {

inline constexpr std::uint32_t kFormatVersion = 1;

void write_tags(const std::string& path, const pairsource::TagStream& stream);
pairsource::TagStream read_tags(const std::string& path);  // throws std::runtime_error

// Text form, one "channel,t_ps" row per tag after "# key=value" header lines.
void write_tags_csv(const std::string& path, const pairsource::TagStream& stream);

}  // namespace tagio
}  // namespace mirpairs
