#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "dfl/params.hpp"
#include "dfl/random.hpp"

namespace dfl::test {

struct Shape {
  LayerKind kind;
  Eigen::Index rows;
  Eigen::Index cols;
};

template <typename Scalar = float>
BasicLayeredParams<Scalar> random_params(Rng& rng, const std::vector<Shape>& shapes, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  BasicLayeredParams<Scalar> p;
  int i = 0;
  for (const auto& s : shapes) {
    auto& l = s.kind == LayerKind::kMatrix ? p.add_matrix("l" + std::to_string(i), s.rows, s.cols)
                                           : p.add_vector("l" + std::to_string(i), s.cols);
    for (Eigen::Index k = 0; k < l.values.size(); ++k) l.values.data()[k] = static_cast<Scalar>(n(rng));
    ++i;
  }
  return p;
}

/// A few layers of random shape (matrix + vector pairs).
inline std::vector<Shape> random_shapes(Rng& rng) {
  std::uniform_int_distribution<int> dim(1, 6), layers(1, 3);
  std::vector<Shape> out;
  const int n = layers(rng);
  for (int i = 0; i < n; ++i) {
    const int r = dim(rng), c = dim(rng);
    out.push_back({LayerKind::kMatrix, r, c});
    out.push_back({LayerKind::kVector, 1, r});
  }
  return out;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("dfl_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void put_be32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

/// Uncompressed IDX pair.
inline void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                      const std::vector<std::vector<std::uint8_t>>& pixels, const std::vector<std::uint8_t>& y,
                      int rows, int cols) {
  std::ofstream im(images, std::ios::binary);
  put_be32(im, 0x803);
  put_be32(im, static_cast<std::uint32_t>(pixels.size()));
  put_be32(im, static_cast<std::uint32_t>(rows));
  put_be32(im, static_cast<std::uint32_t>(cols));
  for (const auto& p : pixels) im.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size()));
  std::ofstream lb(labels, std::ios::binary);
  put_be32(lb, 0x801);
  put_be32(lb, static_cast<std::uint32_t>(y.size()));
  lb.write(reinterpret_cast<const char*>(y.data()), static_cast<std::streamsize>(y.size()));
}

}  // namespace dfl::test
