#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "spada/raster.hpp"

namespace spada::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "spada") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline MultiSpectralImage random_image(int bands, int h, int w, std::mt19937_64& rng,
                                       float lo = 0.0f, float hi = 1.0f) {
  MultiSpectralImage img(bands, h, w);
  std::uniform_real_distribution<float> u(lo, hi);
  for (float& v : img.data()) v = u(rng);
  return img;
}

/// Each pixel labeled with probability `density`, class uniform in [0, n).
inline LabelRaster random_labels(int h, int w, std::mt19937_64& rng, double density = 1.0,
                                 int n_classes = kNumTrainableClasses) {
  LabelRaster out(h, w);
  std::bernoulli_distribution keep(density);
  std::uniform_int_distribution<int> cls(0, n_classes - 1);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (keep(rng)) out[i] = static_cast<std::uint8_t>(cls(rng));
  return out;
}

}  // namespace spada::test

namespace spada::test {

/// Union of random discs: a cheap stand-in for land-cover patches.
inline Grid<std::uint8_t> random_blobs(int h, int w, int n_discs, std::mt19937_64& rng) {
  Grid<std::uint8_t> m(h, w, 0);
  std::uniform_real_distribution<double> ur(0.0, h), uc(0.0, w), rad(1.5, std::min(h, w) / 4.0);
  for (int k = 0; k < n_discs; ++k) {
    double cr = ur(rng), cc = uc(rng), rr = rad(rng);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        if ((r - cr) * (r - cr) + (c - cc) * (c - cc) <= rr * rr) m(r, c) = 1;
  }
  return m;
}

inline LabelRaster mask_to_labels(const Grid<std::uint8_t>& m, FuelClass cls) {
  LabelRaster out(m.height(), m.width());
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i]) out[i] = id(cls);
  return out;
}

}  // namespace spada::test
