#include "spada/net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <random>

namespace spada {

namespace {

std::string enc_name(int level) { return "enc" + std::to_string(level); }
std::string dec_name(int level) { return "dec" + std::to_string(level); }

int dec_out_channels(const Architecture& a, int level) {
  return level > 1 ? a.widths[level - 2] : a.widths[0];
}

void add_conv(ParamSet& params, const std::string& name, int cout, int cin,
              int k, std::mt19937_64& rng) {
  Tensor w({cout, cin, k, k});
  double bound = std::sqrt(6.0 / (cin * k * k));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : w.data) v = dist(rng);
  params.push_back({name + ".weight", std::move(w)});
  params.push_back({name + ".bias", Tensor({cout})});
}

Eigen::Map<const Mat> as_matrix(const Tensor& t) {
  int rows = t.shape[0];
  int cols = static_cast<int>(t.numel() / rows);
  return {t.data.data(), rows, cols};
}

Eigen::Map<Mat> as_matrix(Tensor& t) {
  int rows = t.shape[0];
  int cols = static_cast<int>(t.numel() / rows);
  return {t.data.data(), rows, cols};
}

Eigen::Map<const Eigen::VectorXd> as_vector(const Tensor& t) {
  return {t.data.data(), static_cast<Eigen::Index>(t.numel())};
}

Mat gelu_of(const Mat& x) {
  return x.unaryExpr([](double v) { return gelu(v); });
}

Mat conv_forward(const Tensor& weight, const Tensor& bias, const Mat& cols) {
  Mat out = as_matrix(weight) * cols;
  out.colwise() += as_vector(bias);
  return out;
}

/// Accumulates weight/bias gradients and returns d(cols).
Mat conv_backward(const Tensor& weight, const Mat& cols, const Mat& dpre,
                  Tensor& dweight, Tensor& dbias) {
  as_matrix(dweight).noalias() += dpre * cols.transpose();
  Eigen::Map<Eigen::VectorXd>(dbias.data.data(), dbias.numel()) +=
      dpre.rowwise().sum();
  return as_matrix(weight).transpose() * dpre;
}

Mat gelu_backward(const Mat& dact, const Mat& pre) {
  return dact.cwiseProduct(pre.unaryExpr([](double v) { return gelu_grad(v); }));
}

}  // namespace

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  data.assign(n, 0.0);
}

// --- SegModel --------------------------------------------------------------

SegModel::SegModel(Architecture arch, std::uint64_t seed)
    : arch_(std::move(arch)), seed_(seed) {
  if (arch_.levels() < 1) throw Error("architecture needs at least one level");
  if (arch_.in_bands < 1 || arch_.num_classes < 1)
    throw Error("architecture needs positive band and class counts");
  for (int w : arch_.widths)
    if (w < 1) throw Error("channel widths must be positive");
  std::mt19937_64 rng(seed);
  int cin = arch_.in_bands;
  for (int l = 1; l <= arch_.levels(); ++l) {
    add_conv(params_, enc_name(l), arch_.widths[l - 1], cin, 3, rng);
    cin = arch_.widths[l - 1];
  }
  for (int l = arch_.levels(); l >= 1; --l)
    add_conv(params_, dec_name(l), dec_out_channels(arch_, l),
             2 * arch_.widths[l - 1], 3, rng);
  add_conv(params_, "head", arch_.num_classes, arch_.widths[0], 1, rng);
}

const Tensor& SegModel::param(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.value;
  throw Error("no parameter named " + name);
}

Tensor& SegModel::mutable_param(const std::string& name) {
  ++revision_;
  for (auto& p : params_)
    if (p.name == name) return p.value;
  throw Error("no parameter named " + name);
}

std::size_t SegModel::num_parameters() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

bool SegModel::congruent(const SegModel& other) const {
  if (!(arch_ == other.arch_) || params_.size() != other.params_.size())
    return false;
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name != other.params_[i].name ||
        params_[i].value.shape != other.params_[i].value.shape)
      return false;
  return true;
}

Gradients zeros_like(const ParamSet& params) {
  Gradients g;
  g.reserve(params.size());
  for (const auto& p : params) g.push_back({p.name, Tensor(p.value.shape)});
  return g;
}

void require_congruent(const ParamSet& a, const ParamSet& b, const char* what) {
  if (a.size() != b.size())
    throw Error(std::string(what) + ": tensor count mismatch");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].name != b[i].name || a[i].value.shape != b[i].value.shape)
      throw Error(std::string(what) + ": shape mismatch at " + a[i].name);
}

// --- Primitives ------------------------------------------------------------

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  constexpr double inv_sqrt_2pi = 0.3989422804014327;
  return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)) +
         x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

Mat im2col3x3(const Mat& input, int h, int w) {
  const int channels = static_cast<int>(input.rows());
  Mat cols = Mat::Zero(channels * 9, static_cast<Eigen::Index>(h) * w);
  for (int c = 0; c < channels; ++c) {
    const double* src = input.row(c).data();
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        double* dst = cols.row(c * 9 + ky * 3 + kx).data();
        const int dy = ky - 1, dx = kx - 1;
        const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          std::memcpy(dst + y * w + x0, src + sy * w + x0 + dx,
                      sizeof(double) * (x1 - x0));
        }
      }
  }
  return cols;
}

Mat col2im3x3(const Mat& cols, int channels, int h, int w) {
  Mat out = Mat::Zero(channels, static_cast<Eigen::Index>(h) * w);
  for (int c = 0; c < channels; ++c) {
    double* dst = out.row(c).data();
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const double* src = cols.row(c * 9 + ky * 3 + kx).data();
        const int dy = ky - 1, dx = kx - 1;
        const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          double* d = dst + sy * w + dx;
          const double* s = src + y * w;
          for (int x = x0; x < x1; ++x) d[x] += s[x];
        }
      }
  }
  return out;
}

Mat maxpool2x2(const Mat& input, int h, int w, std::vector<std::int32_t>* argmax) {
  const int channels = static_cast<int>(input.rows());
  const int oh = h / 2, ow = w / 2;
  Mat out(channels, static_cast<Eigen::Index>(oh) * ow);
  if (argmax) argmax->resize(static_cast<std::size_t>(channels) * oh * ow);
  for (int c = 0; c < channels; ++c) {
    const double* src = input.row(c).data();
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        int best = (2 * y) * w + 2 * x;
        for (int k : {best + 1, best + w, best + w + 1})
          if (src[k] > src[best]) best = k;
        out(c, y * ow + x) = src[best];
        if (argmax)
          (*argmax)[(static_cast<std::size_t>(c) * oh + y) * ow + x] = best;
      }
  }
  return out;
}

Mat maxpool2x2_backward(const Mat& dout, const std::vector<std::int32_t>& argmax,
                        int channels, int h, int w) {
  Mat din = Mat::Zero(channels, static_cast<Eigen::Index>(h) * w);
  const Eigen::Index n = dout.cols();
  for (int c = 0; c < channels; ++c)
    for (Eigen::Index i = 0; i < n; ++i)
      din(c, argmax[c * n + i]) += dout(c, i);
  return din;
}

Mat upsample2x(const Mat& input, int h, int w) {
  const int channels = static_cast<int>(input.rows());
  Mat out(channels, static_cast<Eigen::Index>(4) * h * w);
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < 2 * h; ++y)
      for (int x = 0; x < 2 * w; ++x)
        out(c, y * 2 * w + x) = input(c, (y / 2) * w + x / 2);
  return out;
}

Mat upsample2x_backward(const Mat& dout, int h, int w) {
  const int channels = static_cast<int>(dout.rows());
  Mat din = Mat::Zero(channels, static_cast<Eigen::Index>(h) * w);
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < 2 * h; ++y)
      for (int x = 0; x < 2 * w; ++x)
        din(c, (y / 2) * w + x / 2) += dout(c, y * 2 * w + x);
  return din;
}

// --- Forward / backward ----------------------------------------------------

Mat forward(const SegModel& model, const MultiSpectralImage& image,
            ForwardCache* cache) {
  const Architecture& a = model.arch();
  if (image.bands() != a.in_bands)
    throw Error("forward: image has " + std::to_string(image.bands()) +
                " bands, model expects " + std::to_string(a.in_bands));
  if (image.height() == 0 || image.width() == 0 ||
      image.height() % a.divisor() != 0 || image.width() % a.divisor() != 0)
    throw Error("forward: image extent " + std::to_string(image.height()) +
                "x" + std::to_string(image.width()) +
                " must be positive and divisible by " +
                std::to_string(a.divisor()));

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c = ForwardCache{};
  c.model = &model;
  c.revision = model.revision();
  c.height = image.height();
  c.width = image.width();

  int h = image.height(), w = image.width();
  Mat x(image.bands(), static_cast<Eigen::Index>(h) * w);
  for (int b = 0; b < image.bands(); ++b)
    for (std::size_t i = 0; i < image.plane_size(); ++i)
      x(b, static_cast<Eigen::Index>(i)) = image.band(b)[i];

  const auto& params = model.params();
  std::size_t pi = 0;
  for (int l = 1; l <= a.levels(); ++l) {
    ForwardCache::ConvStage st;
    st.h = h;
    st.w = w;
    st.cols = im2col3x3(x, h, w);
    st.pre = conv_forward(params[pi].value, params[pi + 1].value, st.cols);
    st.act = gelu_of(st.pre);
    pi += 2;
    ForwardCache::PoolStage ps;
    ps.out = maxpool2x2(st.act, h, w, &ps.argmax);
    h /= 2;
    w /= 2;
    x = ps.out;
    c.enc.push_back(std::move(st));
    c.pool.push_back(std::move(ps));
  }
  for (int l = a.levels(); l >= 1; --l) {
    Mat up = upsample2x(x, h, w);
    h *= 2;
    w *= 2;
    const Mat& skip = c.enc[l - 1].act;
    Mat cat(up.rows() + skip.rows(), up.cols());
    cat << up, skip;
    c.dec_up_channels.push_back(static_cast<int>(up.rows()));
    ForwardCache::ConvStage st;
    st.h = h;
    st.w = w;
    st.cols = im2col3x3(cat, h, w);
    st.pre = conv_forward(params[pi].value, params[pi + 1].value, st.cols);
    st.act = gelu_of(st.pre);
    pi += 2;
    x = st.act;
    c.dec.push_back(std::move(st));
  }
  c.head_in = x;
  c.logits = conv_forward(params[pi].value, params[pi + 1].value, x);
  return c.logits;
}

Gradients backward(const SegModel& model, const ForwardCache& cache,
                   const Mat& dlogits) {
  return backward(model, cache, dlogits, nullptr);
}

Gradients backward(const SegModel& model, const ForwardCache& cache,
                   const Mat& dlogits, Mat* dinput) {
  if (cache.model != &model || cache.revision != model.revision())
    throw Error("backward: stale forward cache");
  if (dlogits.rows() != cache.logits.rows() ||
      dlogits.cols() != cache.logits.cols())
    throw Error("backward: upstream gradient shape mismatch");

  const Architecture& a = model.arch();
  const auto& params = model.params();
  Gradients grads = zeros_like(params);
  const int levels = a.levels();
  std::size_t pi = params.size() - 2;  // head

  Mat d = conv_backward(params[pi].value, cache.head_in, dlogits,
                        grads[pi].value, grads[pi + 1].value);

  std::vector<Mat> dskip(levels);
  for (int s = levels - 1; s >= 0; --s) {
    pi -= 2;
    const int level = levels - s;
    const auto& st = cache.dec[s];
    Mat dpre = gelu_backward(d, st.pre);
    Mat dcols = conv_backward(params[pi].value, st.cols, dpre, grads[pi].value,
                              grads[pi + 1].value);
    const int up_ch = cache.dec_up_channels[s];
    const int skip_ch = static_cast<int>(cache.enc[level - 1].act.rows());
    Mat dcat = col2im3x3(dcols, up_ch + skip_ch, st.h, st.w);
    dskip[level - 1] = dcat.bottomRows(skip_ch);
    d = upsample2x_backward(dcat.topRows(up_ch), st.h / 2, st.w / 2);
  }
  for (int l = levels; l >= 1; --l) {
    pi -= 2;
    const auto& st = cache.enc[l - 1];
    Mat dact = maxpool2x2_backward(d, cache.pool[l - 1].argmax,
                                   static_cast<int>(st.act.rows()), st.h, st.w);
    dact += dskip[l - 1];
    Mat dpre = gelu_backward(dact, st.pre);
    Mat dcols = conv_backward(params[pi].value, st.cols, dpre, grads[pi].value,
                              grads[pi + 1].value);
    d = col2im3x3(dcols, static_cast<int>(st.cols.rows() / 9), st.h, st.w);
  }
  if (dinput) *dinput = std::move(d);
  return grads;
}

ProbabilityMap softmax(const Mat& logits, int height, int width) {
  if (logits.rows() != kNumTrainableClasses ||
      logits.cols() != static_cast<Eigen::Index>(height) * width)
    throw Error("softmax: logits shape mismatch");
  ProbabilityMap pm(height, width);
  auto& out = pm.data();
  const Eigen::Index n = logits.cols();
  for (Eigen::Index i = 0; i < n; ++i) {
    double m = logits(0, i);
    for (int k = 1; k < kNumTrainableClasses; ++k) m = std::max(m, logits(k, i));
    double s = 0.0;
    for (int k = 0; k < kNumTrainableClasses; ++k) {
      double e = std::exp(logits(k, i) - m);
      out[k * n + i] = e;
      s += e;
    }
    for (int k = 0; k < kNumTrainableClasses; ++k) out[k * n + i] /= s;
  }
  return pm;
}

void ema_update(SegModel& teacher, const SegModel& student, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("ema alpha must lie in [0,1]");
  if (!teacher.congruent(student)) throw Error("ema_update: models not congruent");
  auto& tp = teacher.mutable_params();
  const auto& sp = student.params();
  const double beta = 1.0 - alpha;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    auto& t = tp[i].value.data;
    const auto& s = sp[i].value.data;
    for (std::size_t j = 0; j < t.size(); ++j) t[j] = alpha * t[j] + beta * s[j];
  }
}

// --- Checkpoints -----------------------------------------------------------

void save_checkpoint(const SegModel& model, const std::filesystem::path& dir,
                     std::int64_t iteration) {
  std::filesystem::create_directories(dir);
  nlohmann::json m;
  m["architecture"] = {{"in_bands", model.arch().in_bands},
                       {"widths", model.arch().widths},
                       {"num_classes", model.arch().num_classes}};
  m["seed"] = model.seed();
  m["iteration"] = iteration;
  m["dtype"] = "f64";
  m["tensors"] = nlohmann::json::array();
  for (const auto& p : model.params()) {
    std::string file = p.name + ".bin";
    m["tensors"].push_back({{"name", p.name}, {"shape", p.value.shape}, {"file", file}});
    std::ofstream out(dir / file, std::ios::binary);
    out.write(reinterpret_cast<const char*>(p.value.data.data()),
              static_cast<std::streamsize>(p.value.numel() * sizeof(double)));
    if (!out) throw Error("cannot write tensor blob " + (dir / file).string());
  }
  std::ofstream out(dir / "manifest.json");
  out << m.dump(2) << '\n';
  if (!out) throw Error("cannot write checkpoint manifest in " + dir.string());
}

SegModel load_checkpoint(const std::filesystem::path& dir, CheckpointInfo* info) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error("missing checkpoint manifest in " + dir.string());
  nlohmann::json m;
  try {
    in >> m;
    Architecture a;
    a.in_bands = m.at("architecture").at("in_bands").get<int>();
    a.widths = m.at("architecture").at("widths").get<std::vector<int>>();
    a.num_classes = m.at("architecture").at("num_classes").get<int>();
    auto seed = m.at("seed").get<std::uint64_t>();
    if (m.value("dtype", "f64") != "f64")
      throw Error("unsupported checkpoint dtype");
    SegModel model(a, seed);
    auto& params = model.mutable_params();
    const auto& tensors = m.at("tensors");
    if (tensors.size() != params.size())
      throw Error("checkpoint tensor count mismatch in " + dir.string());
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& t = tensors[i];
      if (t.at("name").get<std::string>() != params[i].name ||
          t.at("shape").get<std::vector<int>>() != params[i].value.shape)
        throw Error("checkpoint tensor " + params[i].name + " does not match");
      auto path = dir / t.at("file").get<std::string>();
      std::ifstream blob(path, std::ios::binary);
      std::vector<char> bytes{std::istreambuf_iterator<char>(blob),
                              std::istreambuf_iterator<char>()};
      if (bytes.size() != params[i].value.numel() * sizeof(double))
        throw Error("payload length mismatch for " + path.string());
      std::memcpy(params[i].value.data.data(), bytes.data(), bytes.size());
    }
    if (info) {
      info->seed = seed;
      info->iteration = m.at("iteration").get<std::int64_t>();
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed checkpoint manifest in " + dir.string() + ": " +
                e.what());
  }
}

}  // namespace spada
