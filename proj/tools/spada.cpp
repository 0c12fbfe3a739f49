// Command-line entry point: synth, prepare, train, infer, eval.

#include <CLI11.hpp>
#include <exception>
#include <iostream>
#include <json.hpp>
#include <malloc.h>
#include <string>

#include "spada/commands.hpp"

int main(int argc, char** argv) {
  using namespace spada::cli;
  // Training reallocates large buffers every step; keep them off mmap.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);

  CLI::App app{"Sparse-annotation land-cover segmentation toolkit"};
  app.require_subcommand(1);

  GlobalOptions global;
  std::string config, out = "out";
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--config", config, "JSON configuration file");
  app.add_option("--out", out, "Output directory");

  auto* synth = app.add_subcommand("synth", "Generate synthetic scenes");

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "Build scribbles and point labels");
  prepare->add_option("--clc", prep.clc, "CLC code raster")->required();
  prepare->add_option("--image", prep.image, "Spectral image")->required();
  prepare->add_option("--urban", prep.urban, "Fuel-coded urban patch raster");
  prepare->add_option("--leaf-type", prep.leaf, "Leaf-type raster (1 broadleaf, 2 coniferous)");
  prepare->add_option("--points", prep.points, "row,col,lucas_id CSV");

  auto* train = app.add_subcommand("train", "Run self-training");

  InferArgs inf;
  auto* infer = app.add_subcommand("infer", "Predict a fuel map");
  infer->add_option("--checkpoint", inf.checkpoint, "Checkpoint directory")->required();
  infer->add_option("--image", inf.image, "Spectral image")->required();
  infer->add_flag("--tta", inf.tta, "Flip test-time augmentation");
  infer->add_option("--tile-size", inf.tile_size, "Inference tile size");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Score predictions against sparse ground truth");
  eval->add_option("--pred", ev.pred, "Prediction raster or directory")->required();
  eval->add_option("--gt-points", ev.gt_points, "Point ground truth (raster, CSV or directory)");
  eval->add_option("--gt-dense", ev.gt_dense, "Dense ground truth (raster or directory)");

  // Global flags are accepted after the subcommand name as well.
  for (auto* sub : {synth, prepare, train, infer, eval}) {
    sub->fallthrough();
  }

  CLI11_PARSE(app, argc, argv);
  global.config = config;
  global.out = out;
  if (seed_opt->count()) global.seed = seed;

  std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "synth") cmd_synth(global);
    else if (command == "prepare") cmd_prepare(global, prep);
    else if (command == "train") cmd_train(global);
    else if (command == "infer") cmd_infer(global, inf);
    else if (command == "eval") cmd_eval(global, ev);
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"status", "error"}, {"command", command},
                                {"message", e.what()}}.dump()
              << '\n';
    return 1;
  }
  return 0;
}
