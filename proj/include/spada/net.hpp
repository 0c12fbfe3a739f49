#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "spada/raster.hpp"

namespace spada {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);
  std::size_t numel() const { return data.size(); }
  bool operator==(const Tensor&) const = default;
};

struct NamedTensor {
  std::string name;
  Tensor value;
  bool operator==(const NamedTensor&) const = default;
};

/// Ordered named tensors; used both for parameters and their gradients.
using ParamSet = std::vector<NamedTensor>;
using Gradients = ParamSet;

/// Encoder of `widths.size()` levels [conv3x3 -> GELU -> maxpool2x2], a
/// mirrored decoder [upsample2x -> concat skip -> conv3x3 -> GELU] and a
/// 1x1 head producing `num_classes` logits.
struct Architecture {
  int in_bands = 12;
  std::vector<int> widths{16, 32, 64};
  int num_classes = kNumTrainableClasses;

  int levels() const { return static_cast<int>(widths.size()); }
  int divisor() const { return 1 << levels(); }
  bool operator==(const Architecture&) const = default;
};

class SegModel {
 public:
  SegModel(Architecture arch, std::uint64_t seed);

  const Architecture& arch() const { return arch_; }
  std::uint64_t seed() const { return seed_; }
  const ParamSet& params() const { return params_; }
  /// Mutable access invalidates outstanding forward caches.
  ParamSet& mutable_params() {
    ++revision_;
    return params_;
  }
  std::uint64_t revision() const { return revision_; }

  const Tensor& param(const std::string& name) const;
  Tensor& mutable_param(const std::string& name);
  std::size_t num_parameters() const;

  /// Same architecture and same tensor names/shapes.
  bool congruent(const SegModel& other) const;
  bool operator==(const SegModel& o) const {
    return arch_ == o.arch_ && params_ == o.params_;
  }

 private:
  Architecture arch_;
  std::uint64_t seed_;
  ParamSet params_;
  std::uint64_t revision_ = 0;
};

/// Zero-filled tensors congruent with the model's parameters.
Gradients zeros_like(const ParamSet& params);
void require_congruent(const ParamSet& a, const ParamSet& b, const char* what);

/// Activations kept for the backward pass.
struct ForwardCache {
  const SegModel* model = nullptr;
  std::uint64_t revision = 0;
  int height = 0;
  int width = 0;

  struct ConvStage {
    int h = 0, w = 0;
    Mat cols;  // im2col of the stage input
    Mat pre;   // pre-activation
    Mat act;   // GELU output
  };
  struct PoolStage {
    std::vector<std::int32_t> argmax;  // flat source index per output element
    Mat out;
  };

  std::vector<ConvStage> enc;
  std::vector<PoolStage> pool;
  std::vector<ConvStage> dec;
  std::vector<int> dec_up_channels;  // channels coming from below per decoder
  Mat head_in;
  Mat logits;
};

/// Logits as a C x (H*W) matrix.
Mat forward(const SegModel& model, const MultiSpectralImage& image,
            ForwardCache* cache = nullptr);

/// Gradients of the loss w.r.t. every parameter given dLoss/dLogits.
Gradients backward(const SegModel& model, const ForwardCache& cache,
                   const Mat& dlogits);

/// Also returns dLoss/dInput (B x H*W), for input-gradient checks.
Gradients backward(const SegModel& model, const ForwardCache& cache,
                   const Mat& dlogits, Mat* dinput);

/// Per-pixel softmax of a C x (H*W) logit matrix.
ProbabilityMap softmax(const Mat& logits, int height, int width);

/// teacher <- alpha * teacher + (1 - alpha) * student, per tensor.
void ema_update(SegModel& teacher, const SegModel& student, double alpha);

// --- Layer primitives (exposed for per-layer gradient checks) -------------

double gelu(double x);
double gelu_grad(double x);
/// 3x3, zero padding 1. Rows of `cols` are (channel, ky, kx).
Mat im2col3x3(const Mat& input, int h, int w);
Mat col2im3x3(const Mat& cols, int channels, int h, int w);
Mat maxpool2x2(const Mat& input, int h, int w, std::vector<std::int32_t>* argmax);
Mat maxpool2x2_backward(const Mat& dout, const std::vector<std::int32_t>& argmax,
                        int channels, int h, int w);
Mat upsample2x(const Mat& input, int h, int w);
Mat upsample2x_backward(const Mat& dout, int h, int w);

// --- Checkpoints ------------------------------------------------------------

struct CheckpointInfo {
  std::uint64_t seed = 0;
  std::int64_t iteration = 0;
};

/// Writes `dir/manifest.json` and one raw little-endian f64 blob per tensor.
void save_checkpoint(const SegModel& model, const std::filesystem::path& dir,
                     std::int64_t iteration);
SegModel load_checkpoint(const std::filesystem::path& dir,
                         CheckpointInfo* info = nullptr);

}  // namespace spada
