#include "spada/raster.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace spada {

namespace {

struct ClassInfo {
  std::string_view name;
  Rgb color;
};

constexpr std::array<ClassInfo, kNumFuelClasses> kClasses{{
    {"Artificial", {214, 58, 61}},
    {"Bare", {154, 154, 154}},
    {"Wetlands", {150, 107, 196}},
    {"Water", {43, 80, 198}},
    {"Grassland", {249, 159, 39}},
    {"Agricultural", {253, 211, 39}},
    {"Broadleaves", {36, 152, 1}},
    {"Coniferous", {8, 98, 0}},
    {"Shrubs", {141, 140, 0}},
    {"Ignored", {44, 44, 44}},
}};

static_assert(std::endian::native == std::endian::little,
              "raster payloads are written in host order");

const char* dtype_name(DType d) { return d == DType::F32 ? "f32" : "u8"; }

std::size_t dtype_size(DType d) { return d == DType::F32 ? 4 : 1; }

void write_header(const RasterHeader& h, const std::filesystem::path& path) {
  nlohmann::json j;
  j["width"] = h.width;
  j["height"] = h.height;
  j["bands"] = h.bands;
  j["dtype"] = dtype_name(h.dtype);
  j["band_names"] = h.band_names;
  j["nodata"] = h.nodata ? nlohmann::json(*h.nodata) : nlohmann::json(nullptr);
  if (h.georef) j["georef"] = nlohmann::json::parse(*h.georef);
  std::ofstream out(header_path(path));
  if (!out) throw Error("cannot open for writing: " + header_path(path).string());
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed: " + header_path(path).string());
}

void write_payload(const std::filesystem::path& path, const void* bytes,
                   std::size_t n) {
  std::ofstream out(payload_path(path), std::ios::binary);
  if (!out)
    throw Error("cannot open for writing: " + payload_path(path).string());
  out.write(static_cast<const char*>(bytes), static_cast<std::streamsize>(n));
  if (!out) throw Error("write failed: " + payload_path(path).string());
}

std::vector<char> read_payload(const std::filesystem::path& path) {
  std::ifstream in(payload_path(path), std::ios::binary);
  if (!in) throw Error("missing payload: " + payload_path(path).string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void ensure_parent(const std::filesystem::path& path) {
  auto parent = header_path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

}  // namespace

std::string_view class_name(FuelClass c) { return kClasses.at(id(c)).name; }

Rgb class_color(FuelClass c) { return kClasses.at(id(c)).color; }

std::optional<FuelClass> class_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kClasses.size(); ++i)
    if (kClasses[i].name == name) return static_cast<FuelClass>(i);
  return std::nullopt;
}

// --- LabelRaster -----------------------------------------------------------

void LabelRaster::validate() const {
  for (std::size_t i = 0; i < size(); ++i) {
    auto v = (*this)[i];
    if (v != kUnlabeled && !is_fuel_class(v))
      throw Error("invalid label value " + std::to_string(v) + " at index " +
                  std::to_string(i));
  }
}

std::size_t LabelRaster::count_labeled() const {
  return size() - count(kUnlabeled);
}

std::size_t LabelRaster::count(std::uint8_t value) const {
  return static_cast<std::size_t>(
      std::count(data().begin(), data().end(), value));
}

// --- MultiSpectralImage ----------------------------------------------------

MultiSpectralImage::MultiSpectralImage(int bands, int height, int width,
                                       std::vector<std::string> band_names)
    : bands_(bands), height_(height), width_(width),
      band_names_(std::move(band_names)) {
  if (bands < 0 || height < 0 || width < 0)
    throw Error("negative image extent");
  if (band_names_.empty()) {
    if (bands == static_cast<int>(default_band_names().size()))
      band_names_ = default_band_names();
    else
      for (int b = 0; b < bands; ++b) band_names_.push_back("B" + std::to_string(b));
  }
  if (static_cast<int>(band_names_.size()) != bands)
    throw Error("band_names has " + std::to_string(band_names_.size()) +
                " entries for " + std::to_string(bands) + " bands");
  data_.assign(static_cast<std::size_t>(bands) * height * width, 0.0f);
}

int MultiSpectralImage::band_index(std::string_view name) const {
  for (std::size_t i = 0; i < band_names_.size(); ++i)
    if (band_names_[i] == name) return static_cast<int>(i);
  throw Error("missing band: " + std::string(name));
}

bool MultiSpectralImage::has_band(std::string_view name) const {
  return std::find(band_names_.begin(), band_names_.end(), name) !=
         band_names_.end();
}

void MultiSpectralImage::validate_finite() const {
  for (std::size_t i = 0; i < data_.size(); ++i)
    if (!std::isfinite(data_[i]))
      throw Error("non-finite reflectance at index " + std::to_string(i));
}

void MultiSpectralImage::validate_spectral() const {
  if (bands_ < 4) throw Error("spectral image needs at least 4 bands");
  for (auto name : {"Red", "Green", "NIR"}) band_index(name);
}

const std::vector<std::string>& default_band_names() {
  static const std::vector<std::string> names{
      "Coastal",  "Blue",     "Green",    "Red",       "RedEdge1",
      "RedEdge2", "RedEdge3", "NIR",      "NarrowNIR", "WaterVapour",
      "SWIR1",    "SWIR2"};
  return names;
}

// --- ProbabilityMap --------------------------------------------------------

LabelRaster ProbabilityMap::argmax() const {
  LabelRaster out(height_, width_);
  for (int r = 0; r < height_; ++r)
    for (int c = 0; c < width_; ++c) {
      int best = 0;
      for (int k = 1; k < kNumTrainableClasses; ++k)
        if (at(k, r, c) > at(best, r, c)) best = k;
      out(r, c) = static_cast<std::uint8_t>(best);
    }
  return out;
}

Grid<double> ProbabilityMap::max_prob() const {
  Grid<double> out(height_, width_);
  for (int r = 0; r < height_; ++r)
    for (int c = 0; c < width_; ++c) {
      double m = at(0, r, c);
      for (int k = 1; k < kNumTrainableClasses; ++k) m = std::max(m, at(k, r, c));
      out(r, c) = m;
    }
  return out;
}

void ProbabilityMap::validate(double tol) const {
  for (int r = 0; r < height_; ++r)
    for (int c = 0; c < width_; ++c) {
      double s = 0.0;
      for (int k = 0; k < kNumTrainableClasses; ++k) {
        double p = at(k, r, c);
        if (!(p >= 0.0 && p <= 1.0)) throw Error("probability out of [0,1]");
        s += p;
      }
      if (std::abs(s - 1.0) > tol)
        throw Error("probabilities at (" + std::to_string(r) + "," +
                    std::to_string(c) + ") sum to " + std::to_string(s));
    }
}

MultiSpectralImage ProbabilityMap::to_image() const {
  std::vector<std::string> names;
  for (int k = 0; k < kNumTrainableClasses; ++k)
    names.emplace_back(class_name(static_cast<FuelClass>(k)));
  MultiSpectralImage img(kNumTrainableClasses, height_, width_, names);
  for (std::size_t i = 0; i < probs_.size(); ++i)
    img.data()[i] = static_cast<float>(probs_[i]);
  return img;
}

// --- File format -----------------------------------------------------------

std::filesystem::path header_path(const std::filesystem::path& p) {
  auto ext = p.extension();
  if (ext == ".json") return p;
  if (ext == ".bin") return std::filesystem::path(p).replace_extension(".json");
  return std::filesystem::path(p.string() + ".json");
}

std::filesystem::path payload_path(const std::filesystem::path& p) {
  return std::filesystem::path(header_path(p)).replace_extension(".bin");
}

RasterHeader read_header(const std::filesystem::path& path) {
  std::ifstream in(header_path(path));
  if (!in) throw Error("missing header: " + header_path(path).string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed header " + header_path(path).string() + ": " +
                e.what());
  }
  RasterHeader h;
  try {
    h.width = j.at("width").get<int>();
    h.height = j.at("height").get<int>();
    h.bands = j.at("bands").get<int>();
    auto dt = j.at("dtype").get<std::string>();
    if (dt == "f32")
      h.dtype = DType::F32;
    else if (dt == "u8")
      h.dtype = DType::U8;
    else
      throw Error("unknown dtype '" + dt + "' in " + header_path(path).string());
    h.band_names = j.value("band_names", std::vector<std::string>{});
    if (j.contains("nodata") && !j["nodata"].is_null())
      h.nodata = j["nodata"].get<double>();
    if (j.contains("georef")) h.georef = j["georef"].dump();
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed header " + header_path(path).string() + ": " +
                e.what());
  }
  if (h.width < 0 || h.height < 0 || h.bands < 1)
    throw Error("malformed header " + header_path(path).string() +
                ": bad extents");
  if (!h.band_names.empty() && static_cast<int>(h.band_names.size()) != h.bands)
    throw Error("malformed header " + header_path(path).string() +
                ": band_names length does not match bands");
  return h;
}

AnyRaster read_raster(const std::filesystem::path& path) {
  RasterHeader h = read_header(path);
  std::vector<char> bytes = read_payload(path);
  std::size_t expected = static_cast<std::size_t>(h.width) * h.height *
                         h.bands * dtype_size(h.dtype);
  if (bytes.size() != expected)
    throw Error("payload length mismatch for " + payload_path(path).string() +
                ": expected " + std::to_string(expected) + " bytes, found " +
                std::to_string(bytes.size()));
  if (h.dtype == DType::U8) {
    if (h.bands != 1)
      throw Error("u8 rasters must be single-band: " +
                  header_path(path).string());
    LabelRaster labels(h.height, h.width);
    std::memcpy(labels.data().data(), bytes.data(), bytes.size());
    labels.validate();
    return labels;
  }
  MultiSpectralImage img(h.bands, h.height, h.width, h.band_names);
  std::memcpy(img.data().data(), bytes.data(), bytes.size());
  return img;
}

MultiSpectralImage read_image(const std::filesystem::path& path) {
  auto r = read_raster(path);
  if (auto* img = std::get_if<MultiSpectralImage>(&r)) return std::move(*img);
  throw Error("expected an f32 image: " + header_path(path).string());
}

LabelRaster read_labels(const std::filesystem::path& path) {
  auto r = read_raster(path);
  if (auto* l = std::get_if<LabelRaster>(&r)) return std::move(*l);
  throw Error("expected a u8 label raster: " + header_path(path).string());
}

void write_raster(const MultiSpectralImage& image,
                  const std::filesystem::path& path,
                  std::optional<std::string> georef) {
  image.validate_finite();
  RasterHeader h{image.width(), image.height(), image.bands(), DType::F32,
                 image.band_names(), std::nullopt, std::move(georef)};
  ensure_parent(path);
  write_header(h, path);
  write_payload(path, image.data().data(), image.data().size() * sizeof(float));
}

void write_raster(const LabelRaster& labels, const std::filesystem::path& path,
                  std::optional<std::string> georef) {
  labels.validate();
  RasterHeader h{labels.width(), labels.height(), 1, DType::U8, {"class"},
                 static_cast<double>(kUnlabeled), std::move(georef)};
  ensure_parent(path);
  write_header(h, path);
  write_payload(path, labels.data().data(), labels.size());
}

// --- Tiling ----------------------------------------------------------------

std::vector<TileOffset> tile_offsets(int height, int width, int tile_size,
                                     int stride) {
  if (tile_size <= 0) throw Error("tile_size must be positive");
  if (stride <= 0) throw Error("stride must be positive");
  if (tile_size > std::min(height, width))
    throw Error("tile_size " + std::to_string(tile_size) +
                " exceeds raster extent " + std::to_string(height) + "x" +
                std::to_string(width));
  auto axis = [&](int extent) {
    std::vector<int> pos{0};
    while (pos.back() + tile_size < extent)
      pos.push_back(std::min(pos.back() + stride, extent - tile_size));
    return pos;
  };
  std::vector<TileOffset> out;
  for (int r : axis(height))
    for (int c : axis(width)) out.push_back({r, c});
  return out;
}

LabelRaster crop(const LabelRaster& g, int row, int col, int h, int w) {
  return LabelRaster(crop(static_cast<const Grid<std::uint8_t>&>(g), row, col,
                          h, w));
}

MultiSpectralImage crop(const MultiSpectralImage& img, int row, int col, int h,
                        int w) {
  if (row < 0 || col < 0 || row + h > img.height() || col + w > img.width())
    throw Error("crop window outside image");
  MultiSpectralImage out(img.bands(), h, w, img.band_names());
  for (int b = 0; b < img.bands(); ++b)
    for (int r = 0; r < h; ++r)
      std::memcpy(out.band(b) + static_cast<std::size_t>(r) * w,
                  img.band(b) + static_cast<std::size_t>(row + r) * img.width() + col,
                  sizeof(float) * w);
  return out;
}

std::vector<Tile<MultiSpectralImage>> tile(const MultiSpectralImage& img,
                                           int tile_size, int stride) {
  std::vector<Tile<MultiSpectralImage>> out;
  for (auto o : tile_offsets(img.height(), img.width(), tile_size, stride))
    out.push_back({o.row, o.col, crop(img, o.row, o.col, tile_size, tile_size)});
  return out;
}

std::vector<Tile<LabelRaster>> tile(const LabelRaster& labels, int tile_size,
                                    int stride) {
  std::vector<Tile<LabelRaster>> out;
  for (auto o : tile_offsets(labels.height(), labels.width(), tile_size, stride))
    out.push_back(
        {o.row, o.col, crop(labels, o.row, o.col, tile_size, tile_size)});
  return out;
}

Grid<double> normalized_difference(const MultiSpectralImage& img,
                                   std::string_view band_a,
                                   std::string_view band_b) {
  const float* a = img.band(img.band_index(band_a));
  const float* b = img.band(img.band_index(band_b));
  Grid<double> out(img.height(), img.width());
  for (std::size_t i = 0; i < img.plane_size(); ++i) {
    double sa = a[i], sb = b[i];
    double den = sa + sb;
    out[i] = std::abs(den) < 1e-12 ? 0.0 : (sa - sb) / den;
  }
  return out;
}

}  // namespace spada
