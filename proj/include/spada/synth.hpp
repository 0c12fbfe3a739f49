#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "spada/annot.hpp"
#include "spada/raster.hpp"

namespace spada {

using Signature = std::array<double, 12>;

/// Synthetic Voronoi scene generator standing in for real imagery.
struct SynthConfig {
  std::uint64_t seed = 0;
  int n_scenes = 1;
  int height = 128;
  int width = 128;
  int n_regions = 12;
  double noise_sigma = 0.05;
  /// Per-region multiplicative brightness spread (uniform in [1-j, 1+j]).
  double region_gain_jitter = 0.0;
  /// Mean reflectance per trainable class over default_band_names().
  std::array<Signature, kNumTrainableClasses> signatures = default_signatures();
  int n_points = 20;
  bool skeletonize = true;
  int buffer_radius = 5;
  /// Skeleton pixels closer than this to another class are dropped.
  int scribble_min_depth = 16;

  static std::array<Signature, kNumTrainableClasses> default_signatures();
  static SynthConfig from_json(const nlohmann::json& j);
  void validate() const;
};

struct SynthScene {
  MultiSpectralImage image;
  LabelRaster dense;
  LabelRaster scribbles;
  LabelRaster points;
  std::vector<PointAnnotation> point_list;
  /// Source-style layers for exercising the preparation pipeline.
  SourceIdRaster clc;
  LabelRaster urban;
  Grid<std::uint8_t> leaf_type;
};

SynthScene synth_scene(const SynthConfig& cfg, std::uint64_t seed);

/// Scene i uses seed cfg.seed + i.
std::vector<SynthScene> synth_dataset(const SynthConfig& cfg);

/// Representative CLC / LUCAS codes per fuel class (LUCAS: 0 = none).
int representative_clc(FuelClass c);
int representative_lucas(FuelClass c);

/// Writes image, dense, scribbles, points, clc, urban, leaf_type rasters and
/// points.csv into `dir`.
void write_scene(const SynthScene& scene, const std::filesystem::path& dir);

}  // namespace spada
