#pragma once

// Binary checkpoint format for parameter sets.
//
//   "LPRM" | version u16 | layer count u32
//   per layer: name length u32 | UTF-8 name | kind u8 | dims u32... | f32 payload
//
// Matrix layers carry (rows, cols), vector layers carry (len). All integers
// and floats are little-endian; the payload is row-major.

#include <filesystem>
#include <iosfwd>

#include "dfl/params.hpp"

namespace dfl {

inline constexpr std::uint16_t kParamsFormatVersion = 1;

void write_params(std::ostream& out, const LayeredParams& params);
LayeredParams read_params(std::istream& in);

void save_params(const std::filesystem::path& path, const LayeredParams& params);
LayeredParams load_params(const std::filesystem::path& path);

}  // namespace dfl
