#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace spada {

/// Raised for malformed inputs: bad headers, shape mismatches, invalid ids.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Fuel-class taxonomy
// ---------------------------------------------------------------------------

enum class FuelClass : std::uint8_t {
  Artificial = 0,
  Bare = 1,
  Wetlands = 2,
  Water = 3,
  Grassland = 4,
  Agricultural = 5,
  Broadleaves = 6,
  Coniferous = 7,
  Shrubs = 8,
  Ignored = 9,
};

inline constexpr std::uint8_t kUnlabeled = 255;
inline constexpr int kNumFuelClasses = 10;
/// Classes the network predicts; Ignored never enters a loss or a metric.
inline constexpr int kNumTrainableClasses = 9;

struct Rgb {
  std::uint8_t r, g, b;
  bool operator==(const Rgb&) const = default;
};

constexpr std::uint8_t id(FuelClass c) { return static_cast<std::uint8_t>(c); }
constexpr bool is_fuel_class(std::uint8_t v) { return v < kNumFuelClasses; }
constexpr bool is_trainable(std::uint8_t v) { return v < kNumTrainableClasses; }

std::string_view class_name(FuelClass c);
Rgb class_color(FuelClass c);
std::optional<FuelClass> class_from_name(std::string_view name);

// ---------------------------------------------------------------------------
// Containers
// ---------------------------------------------------------------------------

/// Dense row-major H x W grid.
template <class T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, T fill = T{})
      : height_(height), width_(width) {
    if (height < 0 || width < 0) throw Error("negative grid extent");
    data_.assign(static_cast<std::size_t>(height) * width, fill);
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int r, int c) { return data_[index(r, c)]; }
  const T& operator()(int r, int c) const { return data_[index(r, c)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  bool in_bounds(int r, int c) const {
    return r >= 0 && c >= 0 && r < height_ && c < width_;
  }
  bool same_shape(int h, int w) const { return h == height_ && w == width_; }
  template <class U>
  bool same_shape(const Grid<U>& o) const {
    return o.height() == height_ && o.width() == width_;
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * width_ + c;
  }
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

/// Per-pixel fuel-class ids or kUnlabeled.
class LabelRaster : public Grid<std::uint8_t> {
 public:
  LabelRaster() = default;
  LabelRaster(int height, int width, std::uint8_t fill = kUnlabeled)
      : Grid(height, width, fill) {}
  explicit LabelRaster(Grid<std::uint8_t> g) : Grid(std::move(g)) {}

  /// Throws unless every value is a fuel-class id or kUnlabeled.
  void validate() const;
  std::size_t count_labeled() const;
  std::size_t count(std::uint8_t value) const;
};

using WeightMap = Grid<double>;

/// B x H x W band-sequential float stack.
class MultiSpectralImage {
 public:
  MultiSpectralImage() = default;
  /// Empty `band_names` means default_band_names() for a 12-band stack
  /// and B0, B1, ... otherwise.
  MultiSpectralImage(int bands, int height, int width,
                     std::vector<std::string> band_names = {});

  int bands() const { return bands_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t plane_size() const {
    return static_cast<std::size_t>(height_) * width_;
  }

  float& at(int b, int r, int c) { return data_[offset(b, r, c)]; }
  float at(int b, int r, int c) const { return data_[offset(b, r, c)]; }
  float* band(int b) { return data_.data() + b * plane_size(); }
  const float* band(int b) const { return data_.data() + b * plane_size(); }

  const std::vector<std::string>& band_names() const { return band_names_; }
  /// Index of the named band; throws Error when absent.
  int band_index(std::string_view name) const;
  bool has_band(std::string_view name) const;

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  /// Throws if any value is NaN or infinite.
  void validate_finite() const;
  /// Throws unless B >= 4 and Red, Green and NIR are present.
  void validate_spectral() const;

  bool operator==(const MultiSpectralImage&) const = default;

 private:
  std::size_t offset(int b, int r, int c) const {
    return (static_cast<std::size_t>(b) * height_ + r) * width_ + c;
  }
  int bands_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<std::string> band_names_;
  std::vector<float> data_;
};

/// Sentinel-2 band naming used by the synthetic generator and defaults.
const std::vector<std::string>& default_band_names();

/// C x H x W per-pixel class distribution over the trainable classes.
class ProbabilityMap {
 public:
  ProbabilityMap() = default;
  ProbabilityMap(int height, int width)
      : height_(height),
        width_(width),
        probs_(static_cast<std::size_t>(kNumTrainableClasses) * height * width,
               0.0) {}

  int height() const { return height_; }
  int width() const { return width_; }
  double& at(int c, int r, int col) { return probs_[offset(c, r, col)]; }
  double at(int c, int r, int col) const { return probs_[offset(c, r, col)]; }
  std::vector<double>& data() { return probs_; }
  const std::vector<double>& data() const { return probs_; }

  /// Per-pixel argmax class and max probability.
  LabelRaster argmax() const;
  Grid<double> max_prob() const;
  /// Throws unless every pixel sums to 1 within tol and entries lie in [0,1].
  void validate(double tol = 1e-6) const;

  /// f32 image with one band per class, named by class.
  MultiSpectralImage to_image() const;

 private:
  std::size_t offset(int c, int r, int col) const {
    return (static_cast<std::size_t>(c) * height_ + r) * width_ + col;
  }
  int height_ = 0;
  int width_ = 0;
  std::vector<double> probs_;
};

// ---------------------------------------------------------------------------
// On-disk format: <base>.json header + <base>.bin band-sequential LE payload
// ---------------------------------------------------------------------------

enum class DType { F32, U8 };

struct RasterHeader {
  int width = 0;
  int height = 0;
  int bands = 0;
  DType dtype = DType::F32;
  std::vector<std::string> band_names;
  std::optional<double> nodata;
  /// Opaque georeferencing JSON text, carried through unchanged.
  std::optional<std::string> georef;
};

using AnyRaster = std::variant<MultiSpectralImage, LabelRaster>;

/// Resolves `base`, `base.json` or `base.bin` to the header/payload pair.
std::filesystem::path header_path(const std::filesystem::path& p);
std::filesystem::path payload_path(const std::filesystem::path& p);

RasterHeader read_header(const std::filesystem::path& path);
AnyRaster read_raster(const std::filesystem::path& path);
MultiSpectralImage read_image(const std::filesystem::path& path);
LabelRaster read_labels(const std::filesystem::path& path);

void write_raster(const MultiSpectralImage& image,
                  const std::filesystem::path& path,
                  std::optional<std::string> georef = std::nullopt);
void write_raster(const LabelRaster& labels, const std::filesystem::path& path,
                  std::optional<std::string> georef = std::nullopt);

// ---------------------------------------------------------------------------
// Tiling and band arithmetic
// ---------------------------------------------------------------------------

struct TileOffset {
  int row;
  int col;
  bool operator==(const TileOffset&) const = default;
};

/// Row-major tile origins; the last row/column is clamped to the border.
std::vector<TileOffset> tile_offsets(int height, int width, int tile_size,
                                     int stride);

template <class T>
struct Tile {
  int row;
  int col;
  T raster;
};

template <class T>
Grid<T> crop(const Grid<T>& g, int row, int col, int h, int w) {
  Grid<T> out(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) out(r, c) = g(row + r, col + c);
  return out;
}
LabelRaster crop(const LabelRaster& g, int row, int col, int h, int w);
MultiSpectralImage crop(const MultiSpectralImage& img, int row, int col, int h,
                        int w);

std::vector<Tile<MultiSpectralImage>> tile(const MultiSpectralImage& img,
                                           int tile_size, int stride);
std::vector<Tile<LabelRaster>> tile(const LabelRaster& labels, int tile_size,
                                    int stride);

/// (a - b) / (a + b) per pixel; 0 where |a + b| < 1e-12.
Grid<double> normalized_difference(const MultiSpectralImage& img,
                                   std::string_view band_a,
                                   std::string_view band_b);
inline Grid<double> ndvi(const MultiSpectralImage& img) {
  return normalized_difference(img, "NIR", "Red");
}
inline Grid<double> ndwi(const MultiSpectralImage& img) {
  return normalized_difference(img, "Green", "NIR");
}

}  // namespace spada
