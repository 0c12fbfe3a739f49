#include "spada/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <random>

namespace spada {

std::array<Signature, kNumTrainableClasses> SynthConfig::default_signatures() {
  // Coastal Blue Green Red RE1 RE2 RE3 NIR NNIR WV SWIR1 SWIR2
  return {{
      {0.10, 0.11, 0.13, 0.15, 0.16, 0.17, 0.18, 0.19, 0.19, 0.17, 0.22, 0.20},  // Artificial
      {0.12, 0.14, 0.18, 0.24, 0.26, 0.27, 0.28, 0.29, 0.30, 0.28, 0.36, 0.32},  // Bare
      {0.05, 0.06, 0.08, 0.07, 0.12, 0.18, 0.21, 0.23, 0.24, 0.20, 0.14, 0.08},  // Wetlands
      {0.07, 0.08, 0.07, 0.04, 0.03, 0.02, 0.02, 0.02, 0.02, 0.01, 0.01, 0.01},  // Water
      {0.04, 0.05, 0.09, 0.07, 0.14, 0.26, 0.31, 0.33, 0.34, 0.30, 0.26, 0.16},  // Grassland
      {0.05, 0.06, 0.10, 0.08, 0.17, 0.32, 0.38, 0.41, 0.42, 0.37, 0.28, 0.18},  // Agricultural
      {0.03, 0.04, 0.07, 0.04, 0.10, 0.28, 0.35, 0.38, 0.39, 0.34, 0.20, 0.10},  // Broadleaves
      {0.02, 0.03, 0.05, 0.03, 0.07, 0.19, 0.23, 0.25, 0.26, 0.22, 0.13, 0.07},  // Coniferous
      {0.04, 0.05, 0.07, 0.07, 0.11, 0.19, 0.22, 0.24, 0.25, 0.22, 0.20, 0.12},  // Shrubs
  }};
}

void SynthConfig::validate() const {
  if (n_regions < 1) throw Error("synth: n_regions must be >= 1");
  if (!(noise_sigma >= 0.0)) throw Error("synth: noise_sigma must be >= 0");
  if (!(region_gain_jitter >= 0.0 && region_gain_jitter < 1.0))
    throw Error("synth: region_gain_jitter must lie in [0,1)");
  if (height < 1 || width < 1 || n_scenes < 1)
    throw Error("synth: extents and scene count must be positive");
  if (n_points < 0 || buffer_radius < 0 || scribble_min_depth < 0)
    throw Error("synth: negative degradation parameter");
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c;
  c.seed = j.value("seed", c.seed);
  c.n_scenes = j.value("n_scenes", c.n_scenes);
  c.height = j.value("height", c.height);
  c.width = j.value("width", c.width);
  c.n_regions = j.value("n_regions", c.n_regions);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  c.region_gain_jitter = j.value("region_gain_jitter", c.region_gain_jitter);
  c.n_points = j.value("n_points", c.n_points);
  c.skeletonize = j.value("skeletonize", c.skeletonize);
  c.buffer_radius = j.value("buffer_radius", c.buffer_radius);
  c.scribble_min_depth = j.value("scribble_min_depth", c.scribble_min_depth);
  if (j.contains("signatures")) {
    for (const auto& [name, sig] : j["signatures"].items()) {
      auto cls = class_from_name(name);
      if (!cls || !is_trainable(id(*cls)))
        throw Error("synth: unknown signature class '" + name + "'");
      c.signatures[id(*cls)] = sig.get<Signature>();
    }
  }
  c.validate();
  return c;
}

int representative_clc(FuelClass c) {
  switch (c) {
    case FuelClass::Artificial: return 111;
    case FuelClass::Bare: return 332;
    case FuelClass::Wetlands: return 411;
    case FuelClass::Water: return 512;
    case FuelClass::Grassland: return 321;
    case FuelClass::Agricultural: return 221;
    case FuelClass::Broadleaves: return 311;
    case FuelClass::Coniferous: return 312;
    case FuelClass::Shrubs: return 323;
    case FuelClass::Ignored: return 999;
  }
  return 999;
}

int representative_lucas(FuelClass c) {
  switch (c) {
    case FuelClass::Artificial: return 7;
    case FuelClass::Bare: return 6;
    case FuelClass::Water: return 8;
    case FuelClass::Grassland: return 3;
    case FuelClass::Agricultural: return 1;
    case FuelClass::Broadleaves:
    case FuelClass::Coniferous: return 4;
    case FuelClass::Shrubs: return 5;
    default: return 0;
  }
}

namespace {

LabelRaster voronoi_classes(const SynthConfig& cfg, std::mt19937_64& rng,
                            std::vector<int>* region_of) {
  std::uniform_real_distribution<double> ur(0.0, cfg.height);
  std::uniform_real_distribution<double> uc(0.0, cfg.width);
  std::vector<std::pair<double, double>> seeds(cfg.n_regions);
  for (auto& s : seeds) s = {ur(rng), uc(rng)};
  std::array<std::uint8_t, kNumTrainableClasses> perm;
  for (int k = 0; k < kNumTrainableClasses; ++k) perm[k] = static_cast<std::uint8_t>(k);
  std::shuffle(perm.begin(), perm.end(), rng);

  LabelRaster dense(cfg.height, cfg.width);
  region_of->assign(dense.size(), 0);
  for (int r = 0; r < cfg.height; ++r)
    for (int c = 0; c < cfg.width; ++c) {
      int best = 0;
      double bd = std::numeric_limits<double>::max();
      for (int k = 0; k < cfg.n_regions; ++k) {
        double dr = r + 0.5 - seeds[k].first, dc = c + 0.5 - seeds[k].second;
        double d = dr * dr + dc * dc;
        if (d < bd) {
          bd = d;
          best = k;
        }
      }
      (*region_of)[static_cast<std::size_t>(r) * cfg.width + c] = best;
      dense(r, c) = perm[best % kNumTrainableClasses];
    }
  return dense;
}

// Drops labeled pixels that have a differently-labeled pixel within depth-1.
LabelRaster prune_shallow(const LabelRaster& skeleton, const LabelRaster& dense,
                          int depth) {
  if (depth <= 1) return skeleton;
  LabelRaster out = skeleton;
  const int reach = depth - 1;
  for (int r = 0; r < skeleton.height(); ++r)
    for (int c = 0; c < skeleton.width(); ++c) {
      if (skeleton(r, c) == kUnlabeled) continue;
      bool shallow = false;
      for (int dr = -reach; dr <= reach && !shallow; ++dr)
        for (int dc = -reach; dc <= reach && !shallow; ++dc) {
          if (dr * dr + dc * dc > reach * reach) continue;
          int rr = r + dr, cc = c + dc;
          if (dense.in_bounds(rr, cc) && dense(rr, cc) != dense(r, c)) shallow = true;
        }
      if (shallow) out(r, c) = kUnlabeled;
    }
  return out;
}

}  // namespace

SynthScene synth_scene(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  SynthScene s;
  std::vector<int> region_of;
  s.dense = voronoi_classes(cfg, rng, &region_of);

  std::uniform_real_distribution<double> gain_dist(1.0 - cfg.region_gain_jitter,
                                                   1.0 + cfg.region_gain_jitter);
  std::vector<double> gains(cfg.n_regions);
  for (double& g : gains) g = gain_dist(rng);

  const auto& names = default_band_names();
  s.image = MultiSpectralImage(static_cast<int>(names.size()), cfg.height,
                               cfg.width, names);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int b = 0; b < s.image.bands(); ++b)
    for (std::size_t i = 0; i < s.image.plane_size(); ++i) {
      double mean = cfg.signatures[s.dense[i]][b] * gains[region_of[i]];
      s.image.band(b)[i] = static_cast<float>(mean + cfg.noise_sigma * noise(rng));
    }

  LabelRaster core = cfg.skeletonize ? skeletonize(s.dense) : s.dense;
  core = prune_shallow(core, s.dense, cfg.scribble_min_depth);
  s.scribbles = buffer(core, cfg.buffer_radius);

  std::uniform_int_distribution<int> pr(0, cfg.height - 1), pc(0, cfg.width - 1);
  s.points = LabelRaster(cfg.height, cfg.width);
  for (int k = 0; k < cfg.n_points; ++k) {
    int r = pr(rng), c = pc(rng);
    auto cls = static_cast<FuelClass>(s.dense(r, c));
    s.points(r, c) = id(cls);
    s.point_list.push_back({r, c, cls, false});
  }

  s.clc = SourceIdRaster(cfg.height, cfg.width);
  s.urban = LabelRaster(cfg.height, cfg.width);
  s.leaf_type = Grid<std::uint8_t>(cfg.height, cfg.width, 0);
  for (std::size_t i = 0; i < s.dense.size(); ++i) {
    auto cls = static_cast<FuelClass>(s.dense[i]);
    s.clc[i] = representative_clc(cls);
    if (cls == FuelClass::Artificial) s.urban[i] = id(cls);
    if (cls == FuelClass::Broadleaves)
      s.leaf_type[i] = static_cast<std::uint8_t>(LeafType::Broadleaf);
    if (cls == FuelClass::Coniferous)
      s.leaf_type[i] = static_cast<std::uint8_t>(LeafType::Coniferous);
  }
  return s;
}

std::vector<SynthScene> synth_dataset(const SynthConfig& cfg) {
  std::vector<SynthScene> out;
  for (int i = 0; i < cfg.n_scenes; ++i)
    out.push_back(synth_scene(cfg, cfg.seed + static_cast<std::uint64_t>(i)));
  return out;
}

void write_scene(const SynthScene& scene, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_raster(scene.image, dir / "image");
  write_raster(scene.dense, dir / "dense");
  write_raster(scene.scribbles, dir / "scribbles");
  write_raster(scene.points, dir / "points");
  write_raster(scene.urban, dir / "urban");
  write_raster(LabelRaster(scene.leaf_type), dir / "leaf_type");

  MultiSpectralImage clc(1, scene.clc.height(), scene.clc.width(), {"clc"});
  for (std::size_t i = 0; i < scene.clc.size(); ++i)
    clc.data()[i] = static_cast<float>(scene.clc[i]);
  write_raster(clc, dir / "clc");

  std::ofstream csv(dir / "points.csv");
  csv << "row,col,lucas_id\n";
  for (const auto& p : scene.point_list) {
    int code = representative_lucas(p.fuel_class);
    if (code != 0) csv << p.row << ',' << p.col << ',' << code << '\n';
  }
  if (!csv) throw Error("cannot write " + (dir / "points.csv").string());
}

}  // namespace spada
