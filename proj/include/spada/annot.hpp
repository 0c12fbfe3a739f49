#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include <json.hpp>

#include "spada/raster.hpp"

namespace spada {

// ---------------------------------------------------------------------------
// Class mapping (CLC / LUCAS -> fuel classes)
// ---------------------------------------------------------------------------

enum class SourceScheme { CLC, LUCAS };

/// Integer source-id raster (e.g. CLC codes); kSourceNoData marks no data.
using SourceIdRaster = Grid<int>;
inline constexpr int kSourceNoData = -1;

struct MappingTarget {
  FuelClass fuel;
  /// Set for LUCAS 4: the point is "forest", either Broadleaves or Coniferous.
  bool forest_superclass = false;
};

class ClassMapping {
 public:
  ClassMapping(SourceScheme scheme, std::map<int, MappingTarget> entries)
      : scheme_(scheme), entries_(std::move(entries)) {}

  /// The built-in fuel-map aggregation tables.
  static const ClassMapping& clc();
  static const ClassMapping& lucas();
  /// {"scheme": "CLC"|"LUCAS", "entries": {"<id>": "<FuelClass name>"}}.
  /// "Forest" names the Broadleaves/Coniferous super-class.
  static ClassMapping from_json(const nlohmann::json& j);

  SourceScheme scheme() const { return scheme_; }
  const std::map<int, MappingTarget>& entries() const { return entries_; }
  std::optional<MappingTarget> lookup(int source_id) const;

 private:
  SourceScheme scheme_;
  std::map<int, MappingTarget> entries_;
};

/// Reads a single-band f32 raster of source ids; header nodata -> kSourceNoData.
SourceIdRaster read_source_ids(const std::filesystem::path& path);

/// Maps source ids to fuel classes. Throws listing every unmapped id together
/// with its pixel count.
LabelRaster remap(const SourceIdRaster& source, const ClassMapping& mapping);

// ---------------------------------------------------------------------------
// Spectral filtering
// ---------------------------------------------------------------------------

struct IndexBounds {
  std::optional<double> ndvi_min, ndvi_max, ndwi_min, ndwi_max;
  bool empty() const { return !ndvi_min && !ndvi_max && !ndwi_min && !ndwi_max; }
};

struct SpectralFilterConfig {
  std::map<FuelClass, IndexBounds> bounds;

  /// Vegetation ndvi_min 0.3, Water ndwi_min 0.0, Bare/Artificial ndvi_max 0.3.
  static SpectralFilterConfig defaults();
  /// {"Water": {"ndwi_min": 0.0}, ...}
  static SpectralFilterConfig from_json(const nlohmann::json& j);
  void validate() const;
};

/// Unlabels pixels whose class predicate rejects their NDVI/NDWI.
LabelRaster spectral_filter(const LabelRaster& labels,
                            const MultiSpectralImage& image,
                            const SpectralFilterConfig& cfg);

// ---------------------------------------------------------------------------
// Morphology
// ---------------------------------------------------------------------------

/// Zhang-Suen thinning of a binary mask (nonzero = foreground). Pixels
/// outside the grid count as background.
Grid<std::uint8_t> thin_mask(const Grid<std::uint8_t>& mask);

/// Per-class thinning; removed pixels become kUnlabeled.
LabelRaster skeletonize(const LabelRaster& labels);

/// Per-class Euclidean-disk dilation. A pixel reached by several classes takes
/// the class of its nearest source pixel, ties going to the lower class id.
LabelRaster buffer(const LabelRaster& labels, int radius);

/// Binary Euclidean-disk dilation, used as a reference envelope.
Grid<std::uint8_t> dilate_mask(const Grid<std::uint8_t>& mask, int radius);

/// Replaces `classes` in base by the patch: patch pixels of those classes are
/// written, base pixels of those classes without patch support are unlabeled.
LabelRaster overlay(const LabelRaster& base, const LabelRaster& patch,
                    const std::set<FuelClass>& classes);

/// Dominant-leaf-type codes (HRL DLT convention).
enum class LeafType : std::uint8_t { None = 0, Broadleaf = 1, Coniferous = 2 };

/// Reassigns wooded pixels per leaf type; 0 and kUnlabeled carry no info.
LabelRaster split_forest(const LabelRaster& labels,
                         const Grid<std::uint8_t>& leaf_type);

// ---------------------------------------------------------------------------
// Point annotations
// ---------------------------------------------------------------------------

struct PointAnnotation {
  int row;
  int col;
  FuelClass fuel_class;
  bool forest_superclass = false;
};

struct PointRaster {
  LabelRaster labels;
  /// 1 where the point is a forest super-class point (stored as Broadleaves).
  Grid<std::uint8_t> superclass;
};

/// LUCAS-coded CSV `row,col,lucas_id` (header line optional).
std::vector<PointAnnotation> read_points_csv(const std::filesystem::path& path,
                                             const ClassMapping& mapping =
                                                 ClassMapping::lucas());

PointRaster rasterize_points(const std::vector<PointAnnotation>& points,
                             int height, int width);

// ---------------------------------------------------------------------------
// End-to-end scribble construction
// ---------------------------------------------------------------------------

struct ScribbleConfig {
  SpectralFilterConfig filter = SpectralFilterConfig::defaults();
  bool apply_filter = true;
  bool skeletonize = true;
  int buffer_radius = 5;
  std::set<FuelClass> overlay_classes{FuelClass::Artificial};
  /// Paste the urban patch before thinning instead of after buffering.
  bool overlay_before_skeleton = false;

  static ScribbleConfig from_json(const nlohmann::json& j);
};

/// remap -> spectral_filter -> skeletonize -> buffer -> overlay -> split_forest.
/// `ua` (fuel-coded urban patch) and `hrl` (leaf type) are optional.
LabelRaster build_scribbles(const SourceIdRaster& clc,
                            const MultiSpectralImage& image,
                            const LabelRaster* ua,
                            const Grid<std::uint8_t>* hrl,
                            const ScribbleConfig& cfg,
                            const ClassMapping& mapping = ClassMapping::clc());

// ---------------------------------------------------------------------------
// Train / validation split
// ---------------------------------------------------------------------------

/// Seeded shuffle, then the first ceil(fraction * n) items go to training.
template <class T>
std::pair<std::vector<T>, std::vector<T>> split_train_val(std::vector<T> items,
                                                          double fraction,
                                                          std::uint64_t seed) {
  if (items.empty()) throw Error("split_train_val: empty tile list");
  if (!(fraction > 0.0 && fraction < 1.0))
    throw Error("split_train_val: fraction must lie in (0,1)");
  std::mt19937_64 rng(seed);
  for (std::size_t i = items.size() - 1; i > 0; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(items[i], items[j]);
  }
  // Tolerate representation error in fraction * n.
  double raw = fraction * static_cast<double>(items.size());
  auto n_train = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  n_train = std::min(n_train, items.size());
  std::vector<T> train(std::make_move_iterator(items.begin()),
                       std::make_move_iterator(items.begin() + n_train));
  std::vector<T> val(std::make_move_iterator(items.begin() + n_train),
                     std::make_move_iterator(items.end()));
  return {std::move(train), std::move(val)};
}

}  // namespace spada
