#include "spada/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "spada/annot.hpp"
#include "spada/metrics.hpp"
#include "spada/net.hpp"
#include "spada/render.hpp"
#include "spada/selftrain.hpp"
#include "spada/synth.hpp"

namespace spada::cli {

namespace fs = std::filesystem;

namespace {

nlohmann::json load_config(const fs::path& path) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream in(path);
  if (!in) throw Error("cannot read config " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed config " + path.string() + ": " + e.what());
  }
}

fs::path resolve(const fs::path& p, const fs::path& config) {
  if (p.is_absolute() || config.empty()) return p;
  return config.parent_path() / p;
}

bool raster_exists(const fs::path& p) { return fs::exists(header_path(p)); }

Scene load_scene(const fs::path& dir) {
  Scene s;
  s.name = dir.filename().string();
  s.image = read_image(dir / "image");
  s.scribbles = read_labels(dir / "scribbles");
  if (raster_exists(dir / "points")) s.points = read_labels(dir / "points");
  if (raster_exists(dir / "dense")) s.dense = read_labels(dir / "dense");
  return s;
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace

void cmd_synth(const GlobalOptions& g) {
  nlohmann::json j = load_config(g.config);
  SynthConfig cfg = SynthConfig::from_json(j.contains("synth") ? j["synth"] : j);
  if (g.seed) cfg.seed = *g.seed;
  auto scenes = synth_dataset(cfg);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%03zu", i);
    write_scene(scenes[i], g.out / name);
  }
}

void cmd_prepare(const GlobalOptions& g, const PrepareArgs& a) {
  nlohmann::json j = load_config(g.config);
  ScribbleConfig cfg = ScribbleConfig::from_json(j.contains("prepare") ? j["prepare"] : j);
  std::optional<ClassMapping> mapping;
  if (j.contains("clc_mapping")) mapping = ClassMapping::from_json(j["clc_mapping"]);

  MultiSpectralImage image = read_image(a.image);
  SourceIdRaster clc = read_source_ids(a.clc);
  std::optional<LabelRaster> urban;
  std::optional<Grid<std::uint8_t>> leaf;
  if (!a.urban.empty()) urban = read_labels(a.urban);
  if (!a.leaf.empty()) leaf = read_labels(a.leaf);
  LabelRaster scribbles =
      build_scribbles(clc, image, urban ? &*urban : nullptr, leaf ? &*leaf : nullptr,
                      cfg, mapping ? *mapping : ClassMapping::clc());
  fs::create_directories(g.out);
  write_raster(scribbles, g.out / "scribbles");
  if (!a.points.empty()) {
    PointRaster pr = rasterize_points(read_points_csv(a.points), image.height(),
                                      image.width());
    write_raster(pr.labels, g.out / "points");
    write_raster(LabelRaster(pr.superclass), g.out / "points_superclass");
  }
}

void cmd_train(const GlobalOptions& g) {
  if (g.config.empty()) throw Error("train requires --config");
  nlohmann::json j = load_config(g.config);
  nlohmann::json tj = j.value("train", nlohmann::json::object());
  if (g.seed) tj["seed"] = *g.seed;
  TrainConfig cfg = TrainConfig::from_json(tj);

  const nlohmann::json data = j.value("data", nlohmann::json::object());
  std::vector<fs::path> train_dirs, val_dirs;
  if (data.contains("train")) {
    for (const auto& p : data["train"]) train_dirs.push_back(resolve(p.get<std::string>(), g.config));
    for (const auto& p : data.value("val", nlohmann::json::array()))
      val_dirs.push_back(resolve(p.get<std::string>(), g.config));
  } else {
    fs::path root = resolve(data.at("scenes_dir").get<std::string>(), g.config);
    std::vector<fs::path> all;
    for (const auto& e : fs::directory_iterator(root))
      if (e.is_directory() && raster_exists(e.path() / "image")) all.push_back(e.path());
    std::sort(all.begin(), all.end());
    if (all.empty()) throw Error("no scenes found under " + root.string());
    double fraction = data.value("train_fraction", 0.9);
    if (all.size() == 1) {
      train_dirs = all;
    } else {
      std::tie(train_dirs, val_dirs) = split_train_val(all, fraction, cfg.seed);
    }
  }
  std::vector<Scene> train_set, val_set;
  for (const auto& d : train_dirs) train_set.push_back(load_scene(d));
  for (const auto& d : val_dirs) val_set.push_back(load_scene(d));

  fs::create_directories(g.out);
  nlohmann::json resolved{{"train", cfg.to_json()}, {"data", {{"train", nlohmann::json::array()}, {"val", nlohmann::json::array()}}}};
  for (const auto& d : train_dirs) resolved["data"]["train"].push_back(d.string());
  for (const auto& d : val_dirs) resolved["data"]["val"].push_back(d.string());
  write_json(resolved, g.out / "config.resolved.json");

  TrainResult r = train(train_set, val_set, cfg, [](const MetricsRow& row) {
    if (row.val_miou)
      std::cerr << "iter " << row.iter + 1 << " lr " << row.lr << " L_S "
                << row.loss_s << " L_P " << row.loss_p << " val_mIoU "
                << *row.val_miou << '\n';
  });
  save_checkpoint(r.student, g.out / "checkpoints" / "student", cfg.total_iters);
  save_checkpoint(r.teacher, g.out / "checkpoints" / "teacher", cfg.total_iters);
  write_metrics_csv(r.log, g.out / "metrics.csv");
}

void cmd_infer(const GlobalOptions& g, const InferArgs& a) {
  SegModel model = load_checkpoint(a.checkpoint);
  MultiSpectralImage image = read_image(a.image);
  InferOptions opts;
  opts.tile_size = a.tile_size;
  opts.tta = a.tta;
  ProbabilityMap probs = infer(model, image, opts);
  LabelRaster pred = probs.argmax();
  fs::create_directories(g.out);
  write_raster(pred, g.out / "pred");
  write_raster(probs.to_image(), g.out / "probs");
  write_png(render_labels(pred, &image), g.out / "pred.png");
}

void cmd_eval(const GlobalOptions& g, const EvalArgs& a) {
  EvalReport report = evaluate_run(a.pred, a.gt_points, a.gt_dense);
  fs::create_directories(g.out);
  write_report(report, g.out / "report.json", g.out / "report.csv");
  std::cout << report_json(report).dump(2) << '\n';
}

}  // namespace spada::cli
