#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "spada/net.hpp"
#include "spada/raster.hpp"

namespace spada {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct AugmentConfig {
  bool flips = true;
  bool rotations = true;
  int max_shift = 10;
  double blur_prob = 0.5;
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 1.0;
};

struct TrainConfig {
  double lambda = 1.0;
  double tau = 0.968;
  double alpha = 0.999;
  double base_lr = 6e-5;
  double weight_decay = 0.01;
  int warmup_iters = 1500;
  int total_iters = 2000;
  double poly_power = 1.0;
  /// One entry per fuel class; the Ignored entry must be 0.
  std::vector<double> class_weights = default_class_weights();
  /// Recompute class_weights from training scribble frequencies.
  bool auto_class_weights = true;
  bool weighted_point_loss = true;
  /// false trains on scribbles alone (no pseudo-labels, no mixing).
  bool self_training = true;
  /// EMA decay ramps as min(1 - 1/(iter + 1), alpha).
  bool ema_ramp = true;
  std::uint64_t seed = 0;
  int batch_size = 2;
  int tile_size = 64;
  int val_interval = 250;
  AugmentConfig augment;
  Architecture arch;

  static std::vector<double> default_class_weights();
  static TrainConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

// ---------------------------------------------------------------------------
// Pseudo-labels, mixing and loss
// ---------------------------------------------------------------------------

struct PseudoLabels {
  LabelRaster labels;
  Grid<double> confidence;
};

/// Teacher argmax where its max softmax probability reaches tau.
PseudoLabels generate_pseudo_labels(const SegModel& teacher,
                                    const MultiSpectralImage& image, double tau);
PseudoLabels threshold_pseudo_labels(const ProbabilityMap& probs, double tau);

struct MixedTarget {
  LabelRaster labels;
  WeightMap weights;
  /// |I_hat|: surviving pseudo pixels, counted before the scribbles are fused.
  std::size_t n_pseudo = 0;
  /// |I_hat| / |I|.
  double pseudo_weight = 0.0;
};

/// Scribbles over thresholded pseudo-labels. Scribble pixels get weight 1,
/// pseudo-only pixels |I_hat|/|I|, Ignored and unlabeled pixels 0.
MixedTarget mix_labels(const LabelRaster& pseudo, const LabelRaster& scribble);

struct LossResult {
  double total = 0.0;
  double scribble = 0.0;  // L_S
  double point = 0.0;     // L_P
  Mat dlogits;
};

/// total = L_S + lambda * L_P; each term a mean of weighted cross-entropy
/// over its labeled pixels, 0 when it has none.
LossResult loss_seg(const Mat& logits, const MixedTarget& mixed,
                    const LabelRaster& points, const TrainConfig& cfg);

/// Mean-1 normalized inverse frequency over present classes; absent classes
/// and Ignored get 0.
std::vector<double> class_weights_from_frequencies(
    std::span<const LabelRaster> scribbles);

// ---------------------------------------------------------------------------
// Optimisation
// ---------------------------------------------------------------------------

/// Linear warm-up then polynomial decay to 0 at total_iters.
double lr_at(std::int64_t iter, const TrainConfig& cfg);

struct AdamState {
  ParamSet m;
  ParamSet v;
  std::int64_t step = 0;

  explicit AdamState(const SegModel& model);
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

/// AdamW with decoupled weight decay.
void optimizer_step(SegModel& model, const Gradients& grads, AdamState& state,
                    double lr, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Augmentation and inference
// ---------------------------------------------------------------------------

struct AugmentParams {
  bool hflip = false;
  bool vflip = false;
  int rot90 = 0;  // clockwise quarter turns
  int shift_row = 0;
  int shift_col = 0;
  double blur_sigma = 0.0;  // 0: no blur
};

AugmentParams draw_augment(const AugmentConfig& cfg, std::mt19937_64& rng);

/// Output extent after the geometric part of `p`.
std::pair<int, int> augmented_shape(int height, int width, const AugmentParams& p);

/// Flip, rotate then shift; vacated pixels take `fill`.
template <class T>
Grid<T> apply_geometry(const Grid<T>& g, const AugmentParams& p, T fill);
LabelRaster apply_geometry(const LabelRaster& g, const AugmentParams& p);
/// Geometry plus Gaussian blur.
MultiSpectralImage apply_augment(const MultiSpectralImage& img,
                                 const AugmentParams& p);
MultiSpectralImage gaussian_blur(const MultiSpectralImage& img, double sigma);

struct AugmentedSample {
  MultiSpectralImage image;
  std::vector<LabelRaster> labels;
  AugmentParams params;
};

/// Draws parameters from `seed` and applies the same geometry to the image
/// and every label raster; blur touches the image only.
AugmentedSample augment(const MultiSpectralImage& image,
                        std::vector<LabelRaster> labels, std::uint64_t seed,
                        const AugmentConfig& cfg = {});

ProbabilityMap predict_probs(const SegModel& model, const MultiSpectralImage& image);

/// Mean softmax over identity, h-flip, v-flip and 180 degree views.
ProbabilityMap tta_infer(const SegModel& model, const MultiSpectralImage& image);

struct InferOptions {
  int tile_size = 256;
  int overlap = 32;
  bool tta = false;
};

/// Whole-image inference when the image fits one tile, otherwise square
/// tiles with overlap and probability averaging.
ProbabilityMap infer(const SegModel& model, const MultiSpectralImage& image,
                     const InferOptions& opts = {});

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct Scene {
  std::string name;
  MultiSpectralImage image;
  LabelRaster scribbles;
  LabelRaster points;
  /// Dense ground truth, used for validation only.
  std::optional<LabelRaster> dense;
};

struct MetricsRow {
  std::int64_t iter = 0;
  double lr = 0.0;
  double loss_s = 0.0;
  double loss_p = 0.0;
  double pseudo_ratio = 0.0;
  std::optional<double> val_miou;
};

struct TrainResult {
  SegModel student;
  SegModel teacher;
  std::vector<MetricsRow> log;
};

/// mIoU (percent) of `model` against the dense ground truth of `scenes`.
double validate_miou(const SegModel& model, std::span<const Scene> scenes,
                     const InferOptions& opts = {});

using TrainCallback = std::function<void(const MetricsRow&)>;

TrainResult train(std::span<const Scene> train_set, std::span<const Scene> val_set,
                  const TrainConfig& cfg, const TrainCallback& on_row = {});

void write_metrics_csv(const std::vector<MetricsRow>& log,
                       const std::filesystem::path& path);

}  // namespace spada
