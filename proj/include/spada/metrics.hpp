#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spada/raster.hpp"

namespace spada {

/// Rows are ground truth, columns are predictions, over the trainable classes.
class ConfusionMatrix {
 public:
  static constexpr int kSize = kNumTrainableClasses;

  std::uint64_t& at(int gt, int pred) { return counts_[gt][pred]; }
  std::uint64_t at(int gt, int pred) const { return counts_[gt][pred]; }

  std::uint64_t total() const;
  std::uint64_t tp(int c) const { return counts_[c][c]; }
  std::uint64_t fp(int c) const;
  std::uint64_t fn(int c) const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& o);
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::array<std::array<std::uint64_t, kSize>, kSize> counts_{};
};

/// Tallies pixels where gt is labeled and not Ignored. Where `superclass` is
/// set, a forest prediction (Broadleaves or Coniferous) counts as a hit on
/// the predicted class; any other prediction is charged to the gt row.
void accumulate(ConfusionMatrix& cm, const LabelRaster& pred,
                const LabelRaster& gt,
                const Grid<std::uint8_t>* superclass = nullptr);

struct ClassScores {
  /// Unset where TP + FP + FN = 0.
  std::array<std::optional<double>, kNumTrainableClasses> per_class;
  /// Unweighted mean over the classes that are set, in [0, 1].
  double mean = 0.0;
};

ClassScores iou(const ConfusionMatrix& cm);
ClassScores f1(const ConfusionMatrix& cm);
/// Per-class F1 averaged with ground-truth support as weights.
double weighted_f1(const ConfusionMatrix& cm);

struct SectionReport {
  std::string name;
  ConfusionMatrix dense;
  ConfusionMatrix points;
};

struct EvalReport {
  std::vector<SectionReport> sections;
  ConfusionMatrix dense;   // pooled
  ConfusionMatrix points;  // pooled
};

/// Evaluates every prediction raster in `pred` (a directory of label rasters
/// or a single raster) against same-named files in `gt_points` (label raster
/// or `row,col,lucas_id` CSV, with forest flags from a sibling
/// `<stem>_superclass` raster when present) and `gt_dense`. Either ground
/// truth may be empty; a section lacking both is an error.
EvalReport evaluate_run(const std::filesystem::path& pred,
                        const std::filesystem::path& gt_points,
                        const std::filesystem::path& gt_dense);

/// {per_class: {name: {iou, f1, tp, fp, fn}}, mean_iou, macro_f1, n_pixels,
///  n_points, ...}; scores are percentages.
nlohmann::json report_json(const EvalReport& report);
void write_report(const EvalReport& report, const std::filesystem::path& json_path,
                  const std::filesystem::path& csv_path);

}  // namespace spada
