#include "dfl/params_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace dfl {
namespace {

constexpr std::array<char, 4> kMagic = {'L', 'P', 'R', 'M'};

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.put(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
}

template <typename T>
T get_le(std::istream& in) {
  static_assert(std::is_unsigned_v<T>);
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw FormatError("LPRM: truncated input");
    value |= static_cast<T>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return value;
}

std::uint32_t checked_u32(Eigen::Index v) {
  if (v < 0 || v > static_cast<Eigen::Index>(UINT32_MAX)) throw FormatError("LPRM: dimension overflow");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

void write_params(std::ostream& out, const LayeredParams& params) {
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint16_t>(out, kParamsFormatVersion);
  put_le<std::uint32_t>(out, checked_u32(static_cast<Eigen::Index>(params.size())));
  for (const auto& layer : params) {
    put_le<std::uint32_t>(out, checked_u32(static_cast<Eigen::Index>(layer.name.size())));
    out.write(layer.name.data(), static_cast<std::streamsize>(layer.name.size()));
    out.put(static_cast<char>(layer.kind));
    if (layer.kind == LayerKind::kMatrix) {
      put_le<std::uint32_t>(out, checked_u32(layer.values.rows()));
      put_le<std::uint32_t>(out, checked_u32(layer.values.cols()));
    } else {
      put_le<std::uint32_t>(out, checked_u32(layer.values.cols()));
    }
    for (Eigen::Index i = 0; i < layer.values.size(); ++i) {
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(layer.values.data()[i]));
    }
  }
  if (!out) throw FormatError("LPRM: write failed");
}

LayeredParams read_params(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw FormatError("LPRM: bad magic");
  const auto version = get_le<std::uint16_t>(in);
  if (version != kParamsFormatVersion) {
    throw FormatError("LPRM: unsupported version " + std::to_string(version));
  }
  const auto count = get_le<std::uint32_t>(in);
  std::vector<Layer<float>> layers;
  layers.reserve(count);
  for (std::uint32_t l = 0; l < count; ++l) {
    Layer<float> layer;
    const auto name_len = get_le<std::uint32_t>(in);
    layer.name.resize(name_len);
    in.read(layer.name.data(), name_len);
    if (!in) throw FormatError("LPRM: truncated layer name");
    const int kind = in.get();
    Eigen::Index rows = 1;
    Eigen::Index cols = 0;
    if (kind == static_cast<int>(LayerKind::kMatrix)) {
      layer.kind = LayerKind::kMatrix;
      rows = get_le<std::uint32_t>(in);
      cols = get_le<std::uint32_t>(in);
    } else if (kind == static_cast<int>(LayerKind::kVector)) {
      layer.kind = LayerKind::kVector;
      cols = get_le<std::uint32_t>(in);
    } else {
      throw FormatError("LPRM: unknown layer kind");
    }
    layer.values.resize(rows, cols);
    for (Eigen::Index i = 0; i < layer.values.size(); ++i) {
      layer.values.data()[i] = std::bit_cast<float>(get_le<std::uint32_t>(in));
    }
    layers.push_back(std::move(layer));
  }
  return LayeredParams(std::move(layers));
}

void save_params(const std::filesystem::path& path, const LayeredParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_params(out, params);
}

LayeredParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_params(in);
}

}  // namespace dfl
