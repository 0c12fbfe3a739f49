#include "spada/selftrain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <json.hpp>

#include "spada/metrics.hpp"

namespace spada {

// --- TrainConfig -----------------------------------------------------------

std::vector<double> TrainConfig::default_class_weights() {
  std::vector<double> w(kNumFuelClasses, 1.0);
  w[id(FuelClass::Ignored)] = 0.0;
  return w;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error("train config: " + m); };
  if (!(lambda >= 0.0)) fail("lambda must be >= 0");
  if (!(tau >= 0.0 && tau <= 1.0)) fail("tau must lie in [0,1]");
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail("alpha must lie in [0,1]");
  if (!(base_lr >= 0.0) || !(weight_decay >= 0.0)) fail("negative lr or decay");
  if (warmup_iters < 0 || total_iters < 0) fail("negative iteration count");
  if (total_iters > 0 && warmup_iters > total_iters)
    fail("warmup_iters exceeds total_iters");
  if (!(poly_power > 0.0)) fail("poly_power must be positive");
  if (class_weights.size() != kNumFuelClasses)
    fail("class_weights needs one entry per fuel class");
  if (class_weights[id(FuelClass::Ignored)] != 0.0)
    fail("class_weights[Ignored] must be 0");
  for (double w : class_weights)
    if (!(w >= 0.0)) fail("class weights must be non-negative");
  if (batch_size < 1) fail("batch_size must be positive");
  if (tile_size < 1 || tile_size % arch.divisor() != 0)
    fail("tile_size must be a positive multiple of " +
         std::to_string(arch.divisor()));
  if (val_interval < 1) fail("val_interval must be positive");
  if (augment.max_shift < 0) fail("augment.max_shift must be >= 0");
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.lambda = j.value("lambda", c.lambda);
  c.tau = j.value("tau", c.tau);
  c.alpha = j.value("alpha", c.alpha);
  c.base_lr = j.value("base_lr", c.base_lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.warmup_iters = j.value("warmup_iters", c.warmup_iters);
  c.total_iters = j.value("total_iters", c.total_iters);
  c.poly_power = j.value("poly_power", c.poly_power);
  c.class_weights = j.value("class_weights", c.class_weights);
  c.auto_class_weights = j.value("auto_class_weights", c.auto_class_weights);
  c.weighted_point_loss = j.value("weighted_point_loss", c.weighted_point_loss);
  c.self_training = j.value("self_training", c.self_training);
  c.ema_ramp = j.value("ema_ramp", c.ema_ramp);
  c.seed = j.value("seed", c.seed);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.tile_size = j.value("tile_size", c.tile_size);
  c.val_interval = j.value("val_interval", c.val_interval);
  if (j.contains("augment")) {
    const auto& a = j["augment"];
    c.augment.flips = a.value("flips", c.augment.flips);
    c.augment.rotations = a.value("rotations", c.augment.rotations);
    c.augment.max_shift = a.value("max_shift", c.augment.max_shift);
    c.augment.blur_prob = a.value("blur_prob", c.augment.blur_prob);
    c.augment.blur_sigma_min = a.value("blur_sigma_min", c.augment.blur_sigma_min);
    c.augment.blur_sigma_max = a.value("blur_sigma_max", c.augment.blur_sigma_max);
  }
  if (j.contains("arch")) {
    const auto& a = j["arch"];
    c.arch.in_bands = a.value("in_bands", c.arch.in_bands);
    c.arch.widths = a.value("widths", c.arch.widths);
  }
  c.validate();
  return c;
}

nlohmann::json TrainConfig::to_json() const {
  return {
      {"lambda", lambda},
      {"tau", tau},
      {"alpha", alpha},
      {"base_lr", base_lr},
      {"weight_decay", weight_decay},
      {"warmup_iters", warmup_iters},
      {"total_iters", total_iters},
      {"poly_power", poly_power},
      {"class_weights", class_weights},
      {"auto_class_weights", auto_class_weights},
      {"weighted_point_loss", weighted_point_loss},
      {"self_training", self_training},
      {"ema_ramp", ema_ramp},
      {"seed", seed},
      {"batch_size", batch_size},
      {"tile_size", tile_size},
      {"val_interval", val_interval},
      {"augment",
       {{"flips", augment.flips},
        {"rotations", augment.rotations},
        {"max_shift", augment.max_shift},
        {"blur_prob", augment.blur_prob},
        {"blur_sigma_min", augment.blur_sigma_min},
        {"blur_sigma_max", augment.blur_sigma_max}}},
      {"arch", {{"in_bands", arch.in_bands}, {"widths", arch.widths}}},
  };
}

// --- Pseudo-labels and mixing ----------------------------------------------

PseudoLabels threshold_pseudo_labels(const ProbabilityMap& probs, double tau) {
  PseudoLabels out{probs.argmax(), probs.max_prob()};
  for (std::size_t i = 0; i < out.labels.size(); ++i)
    if (out.confidence[i] < tau) out.labels[i] = kUnlabeled;
  return out;
}

PseudoLabels generate_pseudo_labels(const SegModel& teacher,
                                    const MultiSpectralImage& image, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw Error("tau must lie in [0,1]");
  return threshold_pseudo_labels(predict_probs(teacher, image), tau);
}

MixedTarget mix_labels(const LabelRaster& pseudo, const LabelRaster& scribble) {
  if (!pseudo.same_shape(scribble))
    throw Error("mix_labels: pseudo-label and scribble shapes differ");
  MixedTarget out;
  out.labels = LabelRaster(scribble.height(), scribble.width());
  out.weights = WeightMap(scribble.height(), scribble.width(), 0.0);
  for (std::size_t i = 0; i < pseudo.size(); ++i) {
    if (pseudo[i] == kUnlabeled) continue;
    if (!is_trainable(pseudo[i]))
      throw Error("mix_labels: pseudo-label value " + std::to_string(pseudo[i]) +
                  " is not a trainable class");
    ++out.n_pseudo;
  }
  out.pseudo_weight = pseudo.empty() ? 0.0
                                     : static_cast<double>(out.n_pseudo) /
                                           static_cast<double>(pseudo.size());
  for (std::size_t i = 0; i < scribble.size(); ++i) {
    std::uint8_t s = scribble[i];
    if (s != kUnlabeled) {
      if (!is_fuel_class(s))
        throw Error("mix_labels: invalid scribble value " + std::to_string(s));
      out.labels[i] = s;
      out.weights[i] = is_trainable(s) ? 1.0 : 0.0;
    } else if (pseudo[i] != kUnlabeled) {
      out.labels[i] = pseudo[i];
      out.weights[i] = out.pseudo_weight;
    }
  }
  return out;
}

// --- Loss ------------------------------------------------------------------

LossResult loss_seg(const Mat& logits, const MixedTarget& mixed,
                    const LabelRaster& points, const TrainConfig& cfg) {
  const int h = mixed.labels.height(), w = mixed.labels.width();
  const Eigen::Index n = static_cast<Eigen::Index>(h) * w;
  if (logits.rows() != kNumTrainableClasses || logits.cols() != n)
    throw Error("loss_seg: logits shape does not match the target");
  if (!mixed.weights.same_shape(mixed.labels))
    throw Error("loss_seg: weight map shape does not match the labels");
  const bool has_points = !points.empty();
  if (has_points && !points.same_shape(mixed.labels))
    throw Error("loss_seg: point raster shape does not match the target");
  if (!logits.allFinite()) throw Error("loss_seg: non-finite logits");
  if (cfg.class_weights.size() != kNumFuelClasses)
    throw Error("loss_seg: class_weights needs one entry per fuel class");

  LossResult out;
  out.dlogits = Mat::Zero(logits.rows(), logits.cols());

  std::size_t n_s = 0, n_p = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    n_s += is_trainable(mixed.labels[i]);
    if (has_points) n_p += is_trainable(points[i]);
  }
  const bool use_points = has_points && n_p > 0 && cfg.lambda > 0.0;

  std::array<double, kNumTrainableClasses> p{};
  // Adds scale * CE(softmax(z_i), cls) to *acc and its gradient to dlogits.
  auto term = [&](Eigen::Index i, int cls, double scale, double* acc) {
    double m = logits(0, i);
    for (int k = 1; k < kNumTrainableClasses; ++k) m = std::max(m, logits(k, i));
    double s = 0.0;
    for (int k = 0; k < kNumTrainableClasses; ++k) {
      p[k] = std::exp(logits(k, i) - m);
      s += p[k];
    }
    *acc += scale * (std::log(s) + m - logits(cls, i));
    for (int k = 0; k < kNumTrainableClasses; ++k)
      out.dlogits(k, i) += scale * (p[k] / s - (k == cls ? 1.0 : 0.0));
  };

  for (Eigen::Index i = 0; i < n; ++i) {
    std::uint8_t c = mixed.labels[i];
    if (is_trainable(c)) {
      double scale = mixed.weights[i] * cfg.class_weights[c] / static_cast<double>(n_s);
      if (scale != 0.0) term(i, c, scale, &out.scribble);
    }
    if (use_points) {
      std::uint8_t pc = points[i];
      if (is_trainable(pc)) {
        double cw = cfg.weighted_point_loss ? cfg.class_weights[pc] : 1.0;
        double scale = cfg.lambda * cw / static_cast<double>(n_p);
        if (scale != 0.0) term(i, pc, scale, &out.point);
      }
    }
  }
  // `point` accumulated lambda-scaled; report the unscaled L_P.
  out.total = out.scribble + out.point;
  if (use_points) out.point /= cfg.lambda;
  return out;
}

std::vector<double> class_weights_from_frequencies(
    std::span<const LabelRaster> scribbles) {
  std::array<double, kNumTrainableClasses> counts{};
  double total = 0.0;
  for (const auto& s : scribbles)
    for (std::size_t i = 0; i < s.size(); ++i)
      if (is_trainable(s[i])) {
        counts[s[i]] += 1.0;
        total += 1.0;
      }
  if (total == 0.0) throw Error("class weights: no labeled pixels");
  constexpr double kFloor = 1e-4;
  std::vector<double> w(kNumFuelClasses, 0.0);
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < kNumTrainableClasses; ++c) {
    if (counts[c] == 0.0) continue;
    w[c] = 1.0 / std::max(counts[c] / total, kFloor);
    sum += w[c];
    ++present;
  }
  for (double& v : w) v *= present / sum;
  return w;
}

// --- Schedule and optimizer ------------------------------------------------

double lr_at(std::int64_t iter, const TrainConfig& cfg) {
  iter = std::clamp<std::int64_t>(iter, 0, cfg.total_iters);
  if (iter < cfg.warmup_iters)
    return cfg.base_lr * static_cast<double>(iter + 1) / cfg.warmup_iters;
  const double span = cfg.total_iters - cfg.warmup_iters;
  if (span <= 0.0) return 0.0;
  const double progress = static_cast<double>(iter - cfg.warmup_iters) / span;
  return cfg.base_lr * std::pow(1.0 - progress, cfg.poly_power);
}

AdamState::AdamState(const SegModel& model)
    : m(zeros_like(model.params())), v(zeros_like(model.params())) {}

void optimizer_step(SegModel& model, const Gradients& grads, AdamState& state,
                    double lr, const TrainConfig& cfg) {
  require_congruent(model.params(), grads, "optimizer_step");
  require_congruent(model.params(), state.m, "optimizer_step");
  ++state.step;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
  const double decay = 1.0 - lr * cfg.weight_decay;
  auto& params = model.mutable_params();
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& theta = params[t].value.data;
    const auto& g = grads[t].value.data;
    auto& m = state.m[t].value.data;
    auto& v = state.v[t].value.data;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i];
      v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      theta[i] = theta[i] * decay - lr * mhat / (std::sqrt(vhat) + kAdamEps);
    }
  }
}

// --- Augmentation ----------------------------------------------------------

AugmentParams draw_augment(const AugmentConfig& cfg, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> quarter(0, 3);
  std::uniform_int_distribution<int> shift(-cfg.max_shift, cfg.max_shift);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  AugmentParams p;
  p.hflip = cfg.flips && coin(rng);
  p.vflip = cfg.flips && coin(rng);
  p.rot90 = cfg.rotations ? quarter(rng) : 0;
  p.shift_row = shift(rng);
  p.shift_col = shift(rng);
  if (unit(rng) < cfg.blur_prob)
    p.blur_sigma = cfg.blur_sigma_min +
                   (cfg.blur_sigma_max - cfg.blur_sigma_min) * unit(rng);
  return p;
}

std::pair<int, int> augmented_shape(int height, int width, const AugmentParams& p) {
  return p.rot90 % 2 ? std::pair{width, height} : std::pair{height, width};
}

namespace {

// Destination of source pixel (r, c) in an h x w grid, before shifting.
std::pair<int, int> map_pixel(int r, int c, int h, int w, const AugmentParams& p) {
  if (p.hflip) c = w - 1 - c;
  if (p.vflip) r = h - 1 - r;
  for (int k = 0; k < p.rot90 % 4; ++k) {
    int nr = c, nc = h - 1 - r;
    r = nr;
    c = nc;
    std::swap(h, w);
  }
  return {r + p.shift_row, c + p.shift_col};
}

}  // namespace

template <class T>
Grid<T> apply_geometry(const Grid<T>& g, const AugmentParams& p, T fill) {
  auto [oh, ow] = augmented_shape(g.height(), g.width(), p);
  Grid<T> out(oh, ow, fill);
  for (int r = 0; r < g.height(); ++r)
    for (int c = 0; c < g.width(); ++c) {
      auto [rr, cc] = map_pixel(r, c, g.height(), g.width(), p);
      if (out.in_bounds(rr, cc)) out(rr, cc) = g(r, c);
    }
  return out;
}

template Grid<double> apply_geometry(const Grid<double>&, const AugmentParams&, double);
template Grid<std::uint8_t> apply_geometry(const Grid<std::uint8_t>&,
                                           const AugmentParams&, std::uint8_t);
template Grid<float> apply_geometry(const Grid<float>&, const AugmentParams&, float);

LabelRaster apply_geometry(const LabelRaster& g, const AugmentParams& p) {
  return LabelRaster(
      apply_geometry(static_cast<const Grid<std::uint8_t>&>(g), p, kUnlabeled));
}

MultiSpectralImage gaussian_blur(const MultiSpectralImage& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
    sum += kernel[k + radius];
  }
  for (double& k : kernel) k /= sum;

  const int h = img.height(), w = img.width();
  MultiSpectralImage out(img.bands(), h, w, img.band_names());
  std::vector<double> tmp(static_cast<std::size_t>(h) * w);
  for (int b = 0; b < img.bands(); ++b) {
    const float* src = img.band(b);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k)
          acc += kernel[k + radius] * src[r * w + std::clamp(c + k, 0, w - 1)];
        tmp[r * w + c] = acc;
      }
    float* dst = out.band(b);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k)
          acc += kernel[k + radius] * tmp[std::clamp(r + k, 0, h - 1) * w + c];
        dst[r * w + c] = static_cast<float>(acc);
      }
  }
  return out;
}

MultiSpectralImage apply_augment(const MultiSpectralImage& img,
                                 const AugmentParams& p) {
  auto [oh, ow] = augmented_shape(img.height(), img.width(), p);
  MultiSpectralImage out(img.bands(), oh, ow, img.band_names());
  for (int b = 0; b < img.bands(); ++b)
    for (int r = 0; r < img.height(); ++r)
      for (int c = 0; c < img.width(); ++c) {
        auto [rr, cc] = map_pixel(r, c, img.height(), img.width(), p);
        if (rr >= 0 && cc >= 0 && rr < oh && cc < ow)
          out.at(b, rr, cc) = img.at(b, r, c);
      }
  return gaussian_blur(out, p.blur_sigma);
}

AugmentedSample augment(const MultiSpectralImage& image,
                        std::vector<LabelRaster> labels, std::uint64_t seed,
                        const AugmentConfig& cfg) {
  for (const auto& l : labels)
    if (!l.same_shape(image.height(), image.width()))
      throw Error("augment: label raster shape differs from image");
  std::mt19937_64 rng(seed);
  AugmentedSample out;
  out.params = draw_augment(cfg, rng);
  out.image = apply_augment(image, out.params);
  for (const auto& l : labels) out.labels.push_back(apply_geometry(l, out.params));
  return out;
}

// --- Inference -------------------------------------------------------------

ProbabilityMap predict_probs(const SegModel& model, const MultiSpectralImage& image) {
  return softmax(forward(model, image), image.height(), image.width());
}

ProbabilityMap tta_infer(const SegModel& model, const MultiSpectralImage& image) {
  const int h = image.height(), w = image.width();
  ProbabilityMap acc(h, w);
  const std::array<AugmentParams, 4> views{
      AugmentParams{}, AugmentParams{.hflip = true}, AugmentParams{.vflip = true},
      AugmentParams{.hflip = true, .vflip = true}};
  for (const auto& v : views) {
    ProbabilityMap pm = predict_probs(model, apply_augment(image, v));
    // Flips are involutions: the same map sends view pixels back.
    for (int k = 0; k < kNumTrainableClasses; ++k)
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
          auto [rr, cc] = map_pixel(r, c, h, w, v);
          acc.at(k, r, c) += pm.at(k, rr, cc);
        }
  }
  for (double& p : acc.data()) p /= static_cast<double>(views.size());
  return acc;
}

ProbabilityMap infer(const SegModel& model, const MultiSpectralImage& image,
                     const InferOptions& opts) {
  const int h = image.height(), w = image.width();
  const int div = model.arch().divisor();
  auto run = [&](const MultiSpectralImage& img) {
    return opts.tta ? tta_infer(model, img) : predict_probs(model, img);
  };
  if (h % div == 0 && w % div == 0 && h <= opts.tile_size && w <= opts.tile_size)
    return run(image);

  int t = std::min(opts.tile_size, std::min(h, w));
  t -= t % div;
  if (t < div)
    throw Error("infer: image " + std::to_string(h) + "x" + std::to_string(w) +
                " is smaller than the network stride " + std::to_string(div));
  const int stride = t > opts.overlap ? t - opts.overlap : std::max(1, t / 2);

  ProbabilityMap acc(h, w);
  Grid<int> hits(h, w, 0);
  for (auto o : tile_offsets(h, w, t, stride)) {
    ProbabilityMap pm = run(crop(image, o.row, o.col, t, t));
    for (int r = 0; r < t; ++r)
      for (int c = 0; c < t; ++c) {
        ++hits(o.row + r, o.col + c);
        for (int k = 0; k < kNumTrainableClasses; ++k)
          acc.at(k, o.row + r, o.col + c) += pm.at(k, r, c);
      }
  }
  for (int k = 0; k < kNumTrainableClasses; ++k)
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) acc.at(k, r, c) /= hits(r, c);
  return acc;
}

// --- Training --------------------------------------------------------------

double validate_miou(const SegModel& model, std::span<const Scene> scenes,
                     const InferOptions& opts) {
  ConfusionMatrix cm;
  for (const auto& s : scenes) {
    if (!s.dense) continue;
    accumulate(cm, infer(model, s.image, opts).argmax(), *s.dense);
  }
  return 100.0 * iou(cm).mean;
}

namespace {

void check_scene(const Scene& s, const TrainConfig& cfg) {
  if (s.image.bands() != cfg.arch.in_bands)
    throw Error("scene " + s.name + ": band count does not match the model");
  if (!s.scribbles.same_shape(s.image.height(), s.image.width()))
    throw Error("scene " + s.name + ": scribble shape differs from image");
  if (!s.points.empty() && !s.points.same_shape(s.image.height(), s.image.width()))
    throw Error("scene " + s.name + ": point raster shape differs from image");
  if (s.image.height() < cfg.tile_size || s.image.width() < cfg.tile_size)
    throw Error("scene " + s.name + ": smaller than tile_size");
}

void add_scaled(Gradients& acc, const Gradients& g, double scale) {
  for (std::size_t t = 0; t < acc.size(); ++t) {
    auto& a = acc[t].value.data;
    const auto& b = g[t].value.data;
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += scale * b[i];
  }
}

}  // namespace

TrainResult train(std::span<const Scene> train_set, std::span<const Scene> val_set,
                  const TrainConfig& cfg_in, const TrainCallback& on_row) {
  TrainConfig cfg = cfg_in;
  cfg.validate();
  if (train_set.empty()) throw Error("train: empty training set");
  for (const auto& s : train_set) check_scene(s, cfg);
  if (cfg.auto_class_weights) {
    std::vector<LabelRaster> scribbles;
    for (const auto& s : train_set) scribbles.push_back(s.scribbles);
    cfg.class_weights = class_weights_from_frequencies(scribbles);
  }

  TrainResult result{SegModel(cfg.arch, cfg.seed), SegModel(cfg.arch, cfg.seed), {}};
  SegModel& student = result.student;
  SegModel& teacher = result.teacher;
  AdamState adam(student);
  std::mt19937_64 rng(cfg.seed);
  const int t = cfg.tile_size;
  bool has_val = false;
  for (const auto& s : val_set) has_val |= s.dense.has_value();

  for (std::int64_t iter = 0; iter < cfg.total_iters; ++iter) {
    MetricsRow row;
    row.iter = iter;
    row.lr = lr_at(iter, cfg);
    Gradients grads = zeros_like(student.params());
    for (int b = 0; b < cfg.batch_size; ++b) {
      const Scene& scene = train_set[rng() % train_set.size()];
      const int r0 = static_cast<int>(rng() % (scene.image.height() - t + 1));
      const int c0 = static_cast<int>(rng() % (scene.image.width() - t + 1));
      MultiSpectralImage image = crop(scene.image, r0, c0, t, t);
      LabelRaster scribble = crop(scene.scribbles, r0, c0, t, t);
      LabelRaster points = scene.points.empty() ? LabelRaster(t, t)
                                                : crop(scene.points, r0, c0, t, t);

      LabelRaster pseudo(t, t);
      if (cfg.self_training)
        pseudo = generate_pseudo_labels(teacher, image, cfg.tau).labels;
      MixedTarget mixed = mix_labels(pseudo, scribble);

      AugmentParams ap = draw_augment(cfg.augment, rng);
      MixedTarget view;
      view.labels = apply_geometry(mixed.labels, ap);
      view.weights = apply_geometry(mixed.weights, ap, 0.0);
      view.n_pseudo = mixed.n_pseudo;
      view.pseudo_weight = mixed.pseudo_weight;
      LabelRaster view_points = apply_geometry(points, ap);
      MultiSpectralImage view_image = apply_augment(image, ap);

      ForwardCache cache;
      Mat logits = forward(student, view_image, &cache);
      LossResult loss = loss_seg(logits, view, view_points, cfg);
      add_scaled(grads, backward(student, cache, loss.dlogits),
                 1.0 / cfg.batch_size);
      row.loss_s += loss.scribble / cfg.batch_size;
      row.loss_p += loss.point / cfg.batch_size;
      row.pseudo_ratio += mixed.pseudo_weight / cfg.batch_size;
    }
    optimizer_step(student, grads, adam, row.lr, cfg);
    double alpha = cfg.alpha;
    if (cfg.ema_ramp)
      alpha = std::min(1.0 - 1.0 / static_cast<double>(iter + 1), cfg.alpha);
    ema_update(teacher, student, alpha);

    if (has_val && ((iter + 1) % cfg.val_interval == 0 || iter + 1 == cfg.total_iters))
      row.val_miou = validate_miou(student, val_set);
    if (on_row) on_row(row);
    result.log.push_back(row);
  }
  return result;
}

void write_metrics_csv(const std::vector<MetricsRow>& log,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "iter,lr,L_S,L_P,pseudo_ratio,val_miou\n";
  out.precision(10);
  for (const auto& r : log) {
    out << r.iter << ',' << r.lr << ',' << r.loss_s << ',' << r.loss_p << ','
        << r.pseudo_ratio << ',';
    if (r.val_miou) out << *r.val_miou;
    out << '\n';
  }
}

}  // namespace spada
