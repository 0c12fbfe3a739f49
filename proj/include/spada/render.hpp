#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "spada/raster.hpp"

namespace spada {

/// Interleaved 8-bit RGB, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

/// Class colours blended at 50% over a grayscale composite of the image;
/// unlabeled pixels show the composite alone.
RgbImage render_labels(const LabelRaster& labels, const MultiSpectralImage* image);

void write_png(const RgbImage& img, const std::filesystem::path& path);

}  // namespace spada
