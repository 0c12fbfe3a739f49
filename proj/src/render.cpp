#include "spada/render.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace spada {

namespace {

// Percentile-stretched mean of the visible bands (or band 0).
std::vector<double> composite(const MultiSpectralImage& img) {
  std::vector<int> bands;
  for (auto name : {"Red", "Green", "Blue"})
    if (img.has_band(name)) bands.push_back(img.band_index(name));
  if (bands.empty()) bands.push_back(0);
  std::vector<double> gray(img.plane_size(), 0.0);
  for (int b : bands)
    for (std::size_t i = 0; i < gray.size(); ++i) gray[i] += img.band(b)[i];
  for (double& g : gray) g /= static_cast<double>(bands.size());
  if (gray.empty()) return gray;

  std::vector<double> sorted = gray;
  std::sort(sorted.begin(), sorted.end());
  double lo = sorted[sorted.size() * 2 / 100];
  double hi = sorted[std::min(sorted.size() - 1, sorted.size() * 98 / 100)];
  double span = hi > lo ? hi - lo : 1.0;
  for (double& g : gray) g = std::clamp((g - lo) / span, 0.0, 1.0) * 255.0;
  return gray;
}

}  // namespace

RgbImage render_labels(const LabelRaster& labels, const MultiSpectralImage* image) {
  if (image && (image->height() != labels.height() || image->width() != labels.width()))
    throw Error("render: image and labels differ in shape");
  RgbImage out{labels.width(), labels.height(),
               std::vector<std::uint8_t>(labels.size() * 3, 0)};
  std::vector<double> gray =
      image ? composite(*image) : std::vector<double>(labels.size(), 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double g = gray[i];
    std::uint8_t v = labels[i];
    std::array<double, 3> rgb{g, g, g};
    if (is_fuel_class(v)) {
      Rgb c = class_color(static_cast<FuelClass>(v));
      rgb = {0.5 * c.r + 0.5 * g, 0.5 * c.g + 0.5 * g, 0.5 * c.b + 0.5 * g};
      if (!image) rgb = {double(c.r), double(c.g), double(c.b)};
    }
    for (int k = 0; k < 3; ++k)
      out.pixels[i * 3 + k] = static_cast<std::uint8_t>(std::lround(rgb[k]));
  }
  return out;
}

void write_png(const RgbImage& img, const std::filesystem::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw Error("cannot open for writing: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("PNG encoding failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < img.height; ++r)
    png_write_row(png, img.pixels.data() + static_cast<std::size_t>(r) * img.width * 3);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace spada
