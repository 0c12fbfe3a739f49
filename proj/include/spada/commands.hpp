#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace spada::cli {

struct GlobalOptions {
  std::filesystem::path config;  // empty: built-in defaults
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = "out";
};

/// Writes out/scene_NNN/ directories. Config: SynthConfig JSON.
void cmd_synth(const GlobalOptions& g);

struct PrepareArgs {
  std::filesystem::path clc;     // f32 CLC-code raster
  std::filesystem::path image;   // spectral image
  std::filesystem::path urban;   // optional fuel-coded urban patch
  std::filesystem::path leaf;    // optional leaf-type raster
  std::filesystem::path points;  // optional row,col,lucas_id CSV
};

/// Writes out/scribbles and, with points, out/points. Config: ScribbleConfig.
void cmd_prepare(const GlobalOptions& g, const PrepareArgs& a);

/// Config: {"data": {...}, "train": TrainConfig}. Writes checkpoints,
/// metrics.csv and the resolved config under out/.
void cmd_train(const GlobalOptions& g);

struct InferArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path image;
  bool tta = false;
  int tile_size = 256;
};

/// Writes out/pred (labels), out/probs (f32 per class) and out/pred.png.
void cmd_infer(const GlobalOptions& g, const InferArgs& a);

struct EvalArgs {
  std::filesystem::path pred;
  std::filesystem::path gt_points;
  std::filesystem::path gt_dense;
};

/// Writes out/report.json and out/report.csv.
void cmd_eval(const GlobalOptions& g, const EvalArgs& a);

}  // namespace spada::cli
