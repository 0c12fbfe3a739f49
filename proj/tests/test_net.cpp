#include <doctest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "spada/net.hpp"
#include "support.hpp"

using namespace spada;
using spada::test::TempDir;

namespace {

Architecture small_arch() {
  Architecture a;
  a.widths = {4, 6};
  return a;
}

void zero_head(SegModel& m) {
  for (auto& v : m.mutable_param("head.weight").data) v = 0.0;
  for (auto& v : m.mutable_param("head.bias").data) v = 0.0;
}

Mat random_mat(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

double dot(const Mat& a, const Mat& b) { return (a.array() * b.array()).sum(); }

// Smooth scalar of the logits: <R, z> + 0.25 * |z|^2.
struct Probe {
  Mat r;
  double value(const Mat& z) const { return dot(r, z) + 0.25 * z.squaredNorm(); }
  Mat grad(const Mat& z) const { return r + 0.5 * z; }
};

}  // namespace

TEST_CASE("parameter layout") {
  SegModel m(Architecture{}, 0);
  const auto& p = m.params();
  REQUIRE(p.size() == 14);
  CHECK(p.front().name == "enc1.weight");
  CHECK(p[6].name == "dec3.weight");
  CHECK(p.back().name == "head.bias");
  CHECK(m.param("enc1.weight").shape == std::vector<int>{16, 12, 3, 3});
  CHECK(m.param("dec3.weight").shape == std::vector<int>{32, 128, 3, 3});
  CHECK(m.param("dec1.weight").shape == std::vector<int>{16, 32, 3, 3});
  CHECK(m.param("head.weight").shape == std::vector<int>{9, 16, 1, 1});
  for (double b : m.param("enc2.bias").data) CHECK(b == 0.0);
  double bound = std::sqrt(6.0 / (12 * 9));
  for (double v : m.param("enc1.weight").data) CHECK(std::abs(v) <= bound);
  CHECK_THROWS_AS(m.param("enc9.weight"), Error);
}

TEST_CASE("zero head gives a uniform distribution") {
  std::mt19937_64 rng(1);
  SegModel m(Architecture{}, 3);
  zero_head(m);
  auto img = test::random_image(12, 16, 16, rng);
  ProbabilityMap p = softmax(forward(m, img), 16, 16);
  for (double v : p.data()) CHECK(v == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("forward shape and determinism") {
  std::mt19937_64 rng(2);
  auto img = test::random_image(12, 64, 64, rng);
  SegModel a(Architecture{}, 42), b(Architecture{}, 42), c(Architecture{}, 43);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  Mat la = forward(a, img), lb = forward(b, img);
  CHECK(la.rows() == 9);
  CHECK(la.cols() == 64 * 64);
  CHECK(la == lb);
  CHECK(la.allFinite());
  CHECK_NOTHROW(softmax(la, 64, 64).validate());
}

TEST_CASE("forward rejects bad shapes") {
  std::mt19937_64 rng(2);
  SegModel m(Architecture{}, 0);
  CHECK_THROWS_AS(forward(m, test::random_image(12, 12, 16, rng)), Error);
  CHECK_THROWS_AS(forward(m, test::random_image(4, 16, 16, rng)), Error);
}

TEST_CASE("backward is linear in the upstream gradient") {
  std::mt19937_64 rng(4);
  SegModel m(small_arch(), 5);
  auto img = test::random_image(12, 8, 8, rng);
  ForwardCache cache;
  Mat z = forward(m, img, &cache);
  Gradients g0 = backward(m, cache, Mat::Zero(z.rows(), z.cols()));
  for (const auto& t : g0)
    for (double v : t.value.data) CHECK(v == 0.0);
  Mat d = random_mat(z.rows(), z.cols(), rng);
  Gradients g1 = backward(m, cache, d), g2 = backward(m, cache, 2.0 * d);
  for (std::size_t t = 0; t < g1.size(); ++t)
    for (std::size_t k = 0; k < g1[t].value.numel(); ++k)
      CHECK(g2[t].value.data[k] == doctest::Approx(2.0 * g1[t].value.data[k]).epsilon(1e-12));
}

TEST_CASE("stale cache is refused") {
  std::mt19937_64 rng(4);
  SegModel m(small_arch(), 5), other(small_arch(), 5);
  auto img = test::random_image(12, 8, 8, rng);
  ForwardCache cache;
  Mat z = forward(m, img, &cache);
  Mat d = Mat::Ones(z.rows(), z.cols());
  CHECK_THROWS_AS(backward(other, cache, d), Error);
  m.mutable_param("enc1.bias").data[0] += 1.0;
  CHECK_THROWS_AS(backward(m, cache, d), Error);
  CHECK_THROWS_AS(backward(m, ForwardCache{}, d), Error);
}

TEST_CASE("gelu derivative") {
  for (double x = -6.0; x <= 6.0; x += 0.37) {
    double h = 1e-5;
    double fd = (gelu(x + h) - gelu(x - h)) / (2 * h);
    CHECK(gelu_grad(x) == doctest::Approx(fd).epsilon(1e-8));
  }
  CHECK(gelu(0.0) == 0.0);
  CHECK(gelu(10.0) == doctest::Approx(10.0));
}

TEST_CASE("layer adjoints") {
  std::mt19937_64 rng(6);
  const int c = 3, h = 6, w = 8;
  Mat x = random_mat(c, h * w, rng);

  // im2col is linear, so col2im must be its exact adjoint.
  Mat cols = im2col3x3(x, h, w);
  CHECK(cols.rows() == c * 9);
  Mat y = random_mat(cols.rows(), cols.cols(), rng);
  CHECK(dot(cols, y) == doctest::Approx(dot(x, col2im3x3(y, c, h, w))).epsilon(1e-12));
  // Centre tap reproduces the input; a corner tap reads the zero padding.
  CHECK(cols.row(4) == x.row(0));
  CHECK(cols(0, 0) == 0.0);

  Mat up = upsample2x(x, h, w);
  Mat u = random_mat(up.rows(), up.cols(), rng);
  CHECK(dot(up, u) == doctest::Approx(dot(x, upsample2x_backward(u, h, w))).epsilon(1e-12));

  std::vector<std::int32_t> arg;
  Mat pooled = maxpool2x2(x, h, w, &arg);
  CHECK(pooled.cols() == (h / 2) * (w / 2));
  for (int ch = 0; ch < c; ++ch)
    for (int r = 0; r < h / 2; ++r)
      for (int q = 0; q < w / 2; ++q) {
        double best = -1e300;
        for (int dr = 0; dr < 2; ++dr)
          for (int dq = 0; dq < 2; ++dq)
            best = std::max(best, x(ch, (2 * r + dr) * w + 2 * q + dq));
        CHECK(pooled(ch, r * (w / 2) + q) == best);
      }
  Mat v = random_mat(pooled.rows(), pooled.cols(), rng);
  CHECK(dot(pooled, v) ==
        doctest::Approx(dot(x, maxpool2x2_backward(v, arg, c, h, w))).epsilon(1e-12));
}

TEST_CASE("parameter gradients match finite differences") {
  std::mt19937_64 rng(9);
  int passed = 0;
  for (int attempt = 0; attempt < 40 && passed < 5; ++attempt) {
    SegModel m(Architecture{}, 100 + attempt);
    auto img = test::random_image(12, 8, 8, rng, -1.0f, 1.0f);
    Probe probe{random_mat(9, 64, rng)};
    ForwardCache cache;
    Mat z = forward(m, img, &cache);
    Gradients g = backward(m, cache, probe.grad(z));
    auto loss = [&](const SegModel& mm, ForwardCache& c) {
      return probe.value(forward(mm, img, &c));
    };
    auto res = test::check_param_gradients(m, g, loss, cache, 12, rng);
    if (res.kink_crossed) continue;
    INFO(res.worst);
    CHECK(res.max_rel_error < 1e-4);
    ++passed;
  }
  CHECK(passed == 5);
}

TEST_CASE("input gradient matches finite differences") {
  std::mt19937_64 rng(10);
  SegModel m(small_arch(), 3);
  auto img = test::random_image(12, 8, 8, rng, -1.0f, 1.0f);
  Probe probe{random_mat(9, 64, rng)};
  ForwardCache cache;
  Mat z = forward(m, img, &cache);
  Mat dx;
  backward(m, cache, probe.grad(z), &dx);
  REQUIRE(dx.rows() == 12);
  // float storage limits the step to values exactly representable.
  const float h = 1.0f / 1024.0f;
  std::vector<double> analytic, numeric;
  for (int k = 0; k < 40; ++k) {
    int b = k % 12, i = (k * 7) % 64;
    float orig = img.band(b)[i];
    img.band(b)[i] = orig + h;
    double fp = probe.value(forward(m, img));
    img.band(b)[i] = orig - h;
    double fm = probe.value(forward(m, img));
    img.band(b)[i] = orig;
    analytic.push_back(dx(b, i));
    numeric.push_back((fp - fm) / (2.0 * (double(orig + h) - double(orig))));
  }
  CHECK(test::relative_error(analytic, numeric) < 1e-4);
}

TEST_CASE("ema update") {
  SegModel teacher(small_arch(), 1), student(small_arch(), 2);
  SegModel t0 = teacher;
  ema_update(teacher, student, 1.0);
  CHECK(teacher == t0);
  ema_update(teacher, student, 0.0);
  CHECK(teacher == student);

  SegModel a(small_arch(), 1), b(small_arch(), 1);
  a.mutable_param("head.bias").data[0] = 2.0;
  b.mutable_param("head.bias").data[0] = 4.0;
  ema_update(a, b, 0.5);
  CHECK(a.param("head.bias").data[0] == 3.0);
  CHECK(b.param("head.bias").data[0] == 4.0);

  CHECK_THROWS_AS(ema_update(a, b, 1.5), Error);
  CHECK_THROWS_AS(ema_update(a, SegModel(Architecture{}, 0), 0.5), Error);
}

TEST_CASE("checkpoint round trip") {
  TempDir dir;
  SegModel m(small_arch(), 77);
  m.mutable_param("dec1.bias").data[1] = -0.125;
  save_checkpoint(m, dir / "ckpt", 123);
  CheckpointInfo info;
  SegModel back = load_checkpoint(dir / "ckpt", &info);
  CHECK(back == m);
  CHECK(info.seed == 77);
  CHECK(info.iteration == 123);
  CHECK(back.arch() == m.arch());
  CHECK_THROWS_AS(load_checkpoint(dir / "missing"), Error);
}
