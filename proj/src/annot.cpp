#include "spada/annot.hpp"

#include <array>
#include <bit>
#include <limits>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace spada {

namespace {

std::map<int, MappingTarget> entries_for(
    std::initializer_list<std::pair<FuelClass, std::initializer_list<int>>>
        rows) {
  std::map<int, MappingTarget> out;
  for (const auto& [fuel, ids] : rows)
    for (int sid : ids) {
      if (!out.emplace(sid, MappingTarget{fuel, false}).second)
        throw Error("duplicate source id " + std::to_string(sid));
    }
  return out;
}

FuelClass parse_class(const std::string& name) {
  auto c = class_from_name(name);
  if (!c) throw Error("unknown fuel class '" + name + "'");
  return *c;
}

std::optional<double> opt_double(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

void require_same_shape(int h1, int w1, int h2, int w2, const char* op) {
  if (h1 != h2 || w1 != w2)
    throw Error(std::string(op) + ": shape mismatch " + std::to_string(h1) +
                "x" + std::to_string(w1) + " vs " + std::to_string(h2) + "x" +
                std::to_string(w2));
}

// Zhang-Suen neighbour bits, clockwise from north:
// bit0=P2(N) bit1=P3(NE) bit2=P4(E) bit3=P5(SE) bit4=P6(S) bit5=P7(SW)
// bit6=P8(W) bit7=P9(NW).
constexpr std::array<int, 8> kDr{-1, -1, 0, 1, 1, 1, 0, -1};
constexpr std::array<int, 8> kDc{0, 1, 1, 1, 0, -1, -1, -1};

struct ThinningTables {
  std::array<bool, 256> first{};
  std::array<bool, 256> second{};
};

const ThinningTables& thinning_tables() {
  static const ThinningTables tables = [] {
    ThinningTables t;
    for (int code = 0; code < 256; ++code) {
      auto p = [code](int k) { return (code >> k) & 1; };
      int b = std::popcount(static_cast<unsigned>(code));
      int a = 0;
      for (int k = 0; k < 8; ++k) a += (p(k) == 0 && p((k + 1) % 8) == 1);
      bool base = b >= 2 && b <= 6 && a == 1;
      int n = p(0), e = p(2), s = p(4), w = p(6);
      t.first[code] = base && n * e * s == 0 && e * s * w == 0;
      t.second[code] = base && n * e * w == 0 && n * s * w == 0;
    }
    return t;
  }();
  return tables;
}

}  // namespace

// --- ClassMapping ----------------------------------------------------------

const ClassMapping& ClassMapping::clc() {
  using F = FuelClass;
  static const ClassMapping m(
      SourceScheme::CLC,
      entries_for({
          {F::Artificial, {111, 112, 121, 122, 123, 124, 131, 132, 133, 142}},
          {F::Bare, {331, 332, 335}},
          {F::Wetlands, {411, 412, 421, 422, 423}},
          {F::Water, {511, 512, 521, 522, 523}},
          {F::Grassland, {211, 231, 321}},
          {F::Agricultural, {212, 213, 221, 222, 223, 241, 242, 243, 244}},
          {F::Broadleaves, {311}},
          {F::Coniferous, {312}},
          {F::Shrubs, {322, 323, 324, 333}},
          {F::Ignored, {141, 313, 334, 999}},
      }));
  return m;
}

const ClassMapping& ClassMapping::lucas() {
  using F = FuelClass;
  static const ClassMapping m = [] {
    auto e = entries_for({
        {F::Artificial, {7}},
        {F::Bare, {6}},
        {F::Water, {8, 9}},
        {F::Grassland, {3}},
        {F::Agricultural, {1, 2}},
        {F::Broadleaves, {4}},
        {F::Shrubs, {5}},
    });
    e.at(4).forest_superclass = true;
    return ClassMapping(SourceScheme::LUCAS, std::move(e));
  }();
  return m;
}

ClassMapping ClassMapping::from_json(const nlohmann::json& j) {
  auto scheme_name = j.at("scheme").get<std::string>();
  SourceScheme scheme;
  if (scheme_name == "CLC")
    scheme = SourceScheme::CLC;
  else if (scheme_name == "LUCAS")
    scheme = SourceScheme::LUCAS;
  else
    throw Error("unknown mapping scheme '" + scheme_name + "'");
  std::map<int, MappingTarget> entries;
  for (const auto& [key, value] : j.at("entries").items()) {
    int sid = std::stoi(key);
    auto name = value.get<std::string>();
    MappingTarget t = name == "Forest"
                          ? MappingTarget{FuelClass::Broadleaves, true}
                          : MappingTarget{parse_class(name), false};
    entries.emplace(sid, t);
  }
  return ClassMapping(scheme, std::move(entries));
}

std::optional<MappingTarget> ClassMapping::lookup(int source_id) const {
  auto it = entries_.find(source_id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

SourceIdRaster read_source_ids(const std::filesystem::path& path) {
  RasterHeader h = read_header(path);
  if (h.dtype != DType::F32 || h.bands != 1)
    throw Error("source-id raster must be single-band f32: " +
                header_path(path).string());
  MultiSpectralImage img = read_image(path);
  SourceIdRaster out(img.height(), img.width());
  const float* v = img.band(0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (h.nodata && (v[i] == *h.nodata || (std::isnan(v[i]) && std::isnan(*h.nodata)))) {
      out[i] = kSourceNoData;
      continue;
    }
    if (!std::isfinite(v[i]) || std::floor(v[i]) != v[i])
      throw Error("non-integer source id at index " + std::to_string(i));
    out[i] = static_cast<int>(v[i]);
  }
  return out;
}

LabelRaster remap(const SourceIdRaster& source, const ClassMapping& mapping) {
  LabelRaster out(source.height(), source.width());
  std::map<int, std::size_t> unmapped;
  for (std::size_t i = 0; i < source.size(); ++i) {
    int sid = source[i];
    if (sid == kSourceNoData) continue;
    auto t = mapping.lookup(sid);
    if (!t) {
      ++unmapped[sid];
      continue;
    }
    out[i] = id(t->fuel);
  }
  if (!unmapped.empty()) {
    std::ostringstream msg;
    msg << "unmapped source ids:";
    for (auto [sid, n] : unmapped) msg << ' ' << sid << " (" << n << " px)";
    throw Error(msg.str());
  }
  return out;
}

// --- Spectral filter -------------------------------------------------------

SpectralFilterConfig SpectralFilterConfig::defaults() {
  SpectralFilterConfig cfg;
  for (auto c : {FuelClass::Grassland, FuelClass::Agricultural,
                 FuelClass::Broadleaves, FuelClass::Coniferous,
                 FuelClass::Shrubs})
    cfg.bounds[c].ndvi_min = 0.3;
  cfg.bounds[FuelClass::Water].ndwi_min = 0.0;
  cfg.bounds[FuelClass::Bare].ndvi_max = 0.3;
  cfg.bounds[FuelClass::Artificial].ndvi_max = 0.3;
  return cfg;
}

SpectralFilterConfig SpectralFilterConfig::from_json(const nlohmann::json& j) {
  SpectralFilterConfig cfg;
  for (const auto& [name, b] : j.items()) {
    IndexBounds bounds{opt_double(b, "ndvi_min"), opt_double(b, "ndvi_max"),
                       opt_double(b, "ndwi_min"), opt_double(b, "ndwi_max")};
    cfg.bounds[parse_class(name)] = bounds;
  }
  cfg.validate();
  return cfg;
}

void SpectralFilterConfig::validate() const {
  auto check = [](const std::optional<double>& lo,
                  const std::optional<double>& hi, FuelClass c) {
    for (const auto& v : {lo, hi})
      if (v && (*v < -1.0 || *v > 1.0))
        throw Error("spectral bound outside [-1,1] for " +
                    std::string(class_name(c)));
    if (lo && hi && *lo > *hi)
      throw Error("spectral bound min > max for " + std::string(class_name(c)));
  };
  for (const auto& [c, b] : bounds) {
    check(b.ndvi_min, b.ndvi_max, c);
    check(b.ndwi_min, b.ndwi_max, c);
  }
}

LabelRaster spectral_filter(const LabelRaster& labels,
                            const MultiSpectralImage& image,
                            const SpectralFilterConfig& cfg) {
  require_same_shape(labels.height(), labels.width(), image.height(),
                     image.width(), "spectral_filter");
  cfg.validate();
  LabelRaster out = labels;
  bool any = false;
  for (const auto& [c, b] : cfg.bounds) any |= !b.empty();
  if (!any) return out;

  Grid<double> vi = ndvi(image);
  Grid<double> wi = ndwi(image);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint8_t v = out[i];
    if (!is_fuel_class(v)) continue;
    auto it = cfg.bounds.find(static_cast<FuelClass>(v));
    if (it == cfg.bounds.end()) continue;
    const IndexBounds& b = it->second;
    bool keep = (!b.ndvi_min || vi[i] >= *b.ndvi_min) &&
                (!b.ndvi_max || vi[i] <= *b.ndvi_max) &&
                (!b.ndwi_min || wi[i] >= *b.ndwi_min) &&
                (!b.ndwi_max || wi[i] <= *b.ndwi_max);
    if (!keep) out[i] = kUnlabeled;
  }
  return out;
}

// --- Morphology ------------------------------------------------------------

Grid<std::uint8_t> thin_mask(const Grid<std::uint8_t>& mask) {
  const int h = mask.height(), w = mask.width();
  Grid<std::uint8_t> img(h, w, 0);
  for (std::size_t i = 0; i < mask.size(); ++i) img[i] = mask[i] ? 1 : 0;

  const auto& tables = thinning_tables();
  auto code_at = [&](int r, int c) {
    int code = 0;
    for (int k = 0; k < 8; ++k) {
      int rr = r + kDr[k], cc = c + kDc[k];
      if (img.in_bounds(rr, cc) && img(rr, cc)) code |= 1 << k;
    }
    return code;
  };

  std::vector<std::size_t> doomed;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto* table : {&tables.first, &tables.second}) {
      doomed.clear();
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
          if (img(r, c) && (*table)[code_at(r, c)])
            doomed.push_back(static_cast<std::size_t>(r) * w + c);
      for (auto i : doomed) img[i] = 0;
      changed |= !doomed.empty();
    }
  }
  return img;
}

LabelRaster skeletonize(const LabelRaster& labels) {
  LabelRaster out(labels.height(), labels.width());
  Grid<std::uint8_t> mask(labels.height(), labels.width(), 0);
  for (std::uint8_t c = 0; c < kNumFuelClasses; ++c) {
    bool present = false;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      mask[i] = labels[i] == c;
      present |= mask[i] != 0;
    }
    if (!present) continue;
    Grid<std::uint8_t> thin = thin_mask(mask);
    for (std::size_t i = 0; i < thin.size(); ++i)
      if (thin[i]) out[i] = c;
  }
  return out;
}

namespace {

struct DiskOffset {
  int dr, dc, d2;
};

std::vector<DiskOffset> disk(int radius) {
  std::vector<DiskOffset> out;
  for (int dr = -radius; dr <= radius; ++dr)
    for (int dc = -radius; dc <= radius; ++dc)
      if (dr * dr + dc * dc <= radius * radius)
        out.push_back({dr, dc, dr * dr + dc * dc});
  return out;
}

}  // namespace

LabelRaster buffer(const LabelRaster& labels, int radius) {
  if (radius < 0) throw Error("buffer radius must be non-negative");
  if (radius == 0) return labels;
  const int h = labels.height(), w = labels.width();
  const auto offsets = disk(radius);
  constexpr int kFar = std::numeric_limits<int>::max();
  Grid<int> best_d2(h, w, kFar);
  LabelRaster out(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      std::uint8_t cls = labels(r, c);
      if (cls == kUnlabeled) continue;
      for (const auto& o : offsets) {
        int rr = r + o.dr, cc = c + o.dc;
        if (!labels.in_bounds(rr, cc)) continue;
        int& bd = best_d2(rr, cc);
        std::uint8_t& bc = out(rr, cc);
        if (o.d2 < bd || (o.d2 == bd && cls < bc)) {
          bd = o.d2;
          bc = cls;
        }
      }
    }
  return out;
}

Grid<std::uint8_t> dilate_mask(const Grid<std::uint8_t>& mask, int radius) {
  if (radius < 0) throw Error("dilation radius must be non-negative");
  const auto offsets = disk(radius);
  Grid<std::uint8_t> out(mask.height(), mask.width(), 0);
  for (int r = 0; r < mask.height(); ++r)
    for (int c = 0; c < mask.width(); ++c) {
      if (!mask(r, c)) continue;
      for (const auto& o : offsets)
        if (out.in_bounds(r + o.dr, c + o.dc)) out(r + o.dr, c + o.dc) = 1;
    }
  return out;
}

LabelRaster overlay(const LabelRaster& base, const LabelRaster& patch,
                    const std::set<FuelClass>& classes) {
  require_same_shape(base.height(), base.width(), patch.height(),
                     patch.width(), "overlay");
  auto selected = [&](std::uint8_t v) {
    return is_fuel_class(v) && classes.count(static_cast<FuelClass>(v)) > 0;
  };
  LabelRaster out = base;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (selected(patch[i]))
      out[i] = patch[i];
    else if (selected(base[i]))
      out[i] = kUnlabeled;
  }
  return out;
}

LabelRaster split_forest(const LabelRaster& labels,
                         const Grid<std::uint8_t>& leaf_type) {
  require_same_shape(labels.height(), labels.width(), leaf_type.height(),
                     leaf_type.width(), "split_forest");
  LabelRaster out = labels;
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint8_t lt = leaf_type[i];
    if (lt != static_cast<std::uint8_t>(LeafType::None) &&
        lt != static_cast<std::uint8_t>(LeafType::Broadleaf) &&
        lt != static_cast<std::uint8_t>(LeafType::Coniferous) &&
        lt != kUnlabeled)
      throw Error("invalid leaf type code " + std::to_string(lt));
    bool wooded = out[i] == id(FuelClass::Broadleaves) ||
                  out[i] == id(FuelClass::Coniferous);
    if (!wooded) continue;
    if (lt == static_cast<std::uint8_t>(LeafType::Broadleaf))
      out[i] = id(FuelClass::Broadleaves);
    else if (lt == static_cast<std::uint8_t>(LeafType::Coniferous))
      out[i] = id(FuelClass::Coniferous);
  }
  return out;
}

// --- Points ----------------------------------------------------------------

std::vector<PointAnnotation> read_points_csv(const std::filesystem::path& path,
                                             const ClassMapping& mapping) {
  std::ifstream in(path);
  if (!in) throw Error("missing points file: " + path.string());
  std::vector<PointAnnotation> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    for (char& ch : line)
      if (ch == ',') ch = ' ';
    std::istringstream fields(line);
    long long row, col, sid;
    if (!(fields >> row >> col >> sid)) {
      if (lineno == 1) continue;  // header
      throw Error(path.string() + ":" + std::to_string(lineno) +
                  ": expected row,col,lucas_id");
    }
    auto t = mapping.lookup(static_cast<int>(sid));
    if (!t)
      throw Error(path.string() + ":" + std::to_string(lineno) +
                  ": unmapped source id " + std::to_string(sid));
    out.push_back({static_cast<int>(row), static_cast<int>(col), t->fuel,
                   t->forest_superclass});
  }
  return out;
}

PointRaster rasterize_points(const std::vector<PointAnnotation>& points,
                             int height, int width) {
  PointRaster out{LabelRaster(height, width), Grid<std::uint8_t>(height, width, 0)};
  for (const auto& p : points) {
    if (!out.labels.in_bounds(p.row, p.col))
      throw Error("point (" + std::to_string(p.row) + "," +
                  std::to_string(p.col) + ") outside " + std::to_string(height) +
                  "x" + std::to_string(width) + " raster");
    if (!is_fuel_class(id(p.fuel_class)))
      throw Error("invalid point class");
    auto& cur = out.labels(p.row, p.col);
    auto& flag = out.superclass(p.row, p.col);
    std::uint8_t cls = p.forest_superclass ? id(FuelClass::Broadleaves)
                                           : id(p.fuel_class);
    std::uint8_t fl = p.forest_superclass ? 1 : 0;
    if (cur != kUnlabeled && (cur != cls || flag != fl))
      throw Error("conflicting points at (" + std::to_string(p.row) + "," +
                  std::to_string(p.col) + ")");
    cur = cls;
    flag = fl;
  }
  return out;
}

// --- Pipeline --------------------------------------------------------------

ScribbleConfig ScribbleConfig::from_json(const nlohmann::json& j) {
  ScribbleConfig cfg;
  if (j.contains("filter")) cfg.filter = SpectralFilterConfig::from_json(j["filter"]);
  cfg.apply_filter = j.value("apply_filter", cfg.apply_filter);
  cfg.skeletonize = j.value("skeletonize", cfg.skeletonize);
  cfg.buffer_radius = j.value("buffer_radius", cfg.buffer_radius);
  cfg.overlay_before_skeleton =
      j.value("overlay_before_skeleton", cfg.overlay_before_skeleton);
  if (j.contains("overlay_classes")) {
    cfg.overlay_classes.clear();
    for (const auto& n : j["overlay_classes"])
      cfg.overlay_classes.insert(parse_class(n.get<std::string>()));
  }
  if (cfg.buffer_radius < 0) throw Error("buffer_radius must be non-negative");
  return cfg;
}

LabelRaster build_scribbles(const SourceIdRaster& clc,
                            const MultiSpectralImage& image,
                            const LabelRaster* ua,
                            const Grid<std::uint8_t>* hrl,
                            const ScribbleConfig& cfg,
                            const ClassMapping& mapping) {
  LabelRaster labels = remap(clc, mapping);
  if (cfg.apply_filter) labels = spectral_filter(labels, image, cfg.filter);
  if (ua && cfg.overlay_before_skeleton)
    labels = overlay(labels, *ua, cfg.overlay_classes);
  if (cfg.skeletonize) labels = skeletonize(labels);
  labels = buffer(labels, cfg.buffer_radius);
  if (ua && !cfg.overlay_before_skeleton)
    labels = overlay(labels, *ua, cfg.overlay_classes);
  if (hrl) labels = split_forest(labels, *hrl);
  return labels;
}

}  // namespace spada
