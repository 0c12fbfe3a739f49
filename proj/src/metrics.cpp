#include "spada/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>

#include "spada/annot.hpp"

namespace spada {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t n = 0;
  for (const auto& row : counts_)
    for (auto v : row) n += v;
  return n;
}

std::uint64_t ConfusionMatrix::fp(int c) const {
  std::uint64_t n = 0;
  for (int g = 0; g < kSize; ++g)
    if (g != c) n += counts_[g][c];
  return n;
}

std::uint64_t ConfusionMatrix::fn(int c) const {
  std::uint64_t n = 0;
  for (int p = 0; p < kSize; ++p)
    if (p != c) n += counts_[c][p];
  return n;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
  for (int g = 0; g < kSize; ++g)
    for (int p = 0; p < kSize; ++p) counts_[g][p] += o.counts_[g][p];
  return *this;
}

void accumulate(ConfusionMatrix& cm, const LabelRaster& pred,
                const LabelRaster& gt, const Grid<std::uint8_t>* superclass) {
  if (!pred.same_shape(gt))
    throw Error("accumulate: prediction and ground truth shapes differ");
  if (superclass && !superclass->same_shape(gt))
    throw Error("accumulate: super-class mask shape differs");
  auto is_forest = [](std::uint8_t v) {
    return v == id(FuelClass::Broadleaves) || v == id(FuelClass::Coniferous);
  };
  for (std::size_t i = 0; i < gt.size(); ++i) {
    std::uint8_t g = gt[i];
    if (!is_trainable(g)) continue;
    std::uint8_t p = pred[i];
    if (!is_trainable(p))
      throw Error("accumulate: prediction " + std::to_string(p) +
                  " at a labeled pixel is not a trainable class");
    if (superclass && (*superclass)[i] && is_forest(p))
      ++cm.at(p, p);
    else
      ++cm.at(g, p);
  }
}

namespace {

template <class F>
ClassScores scores(const ConfusionMatrix& cm, F score) {
  ClassScores out;
  double sum = 0.0;
  int n = 0;
  for (int c = 0; c < ConfusionMatrix::kSize; ++c) {
    auto tp = static_cast<double>(cm.tp(c));
    auto fp = static_cast<double>(cm.fp(c));
    auto fn = static_cast<double>(cm.fn(c));
    if (tp + fp + fn == 0.0) continue;
    out.per_class[c] = score(tp, fp, fn);
    sum += *out.per_class[c];
    ++n;
  }
  if (n == 0) throw Error("metrics: confusion matrix is empty");
  out.mean = sum / n;
  return out;
}

}  // namespace

ClassScores iou(const ConfusionMatrix& cm) {
  return scores(cm, [](double tp, double fp, double fn) {
    return tp / (tp + fp + fn);
  });
}

ClassScores f1(const ConfusionMatrix& cm) {
  return scores(cm, [](double tp, double fp, double fn) {
    return 2.0 * tp / (2.0 * tp + fp + fn);
  });
}

double weighted_f1(const ConfusionMatrix& cm) {
  ClassScores s = f1(cm);
  double num = 0.0, den = 0.0;
  for (int c = 0; c < ConfusionMatrix::kSize; ++c) {
    auto support = static_cast<double>(cm.tp(c) + cm.fn(c));
    if (support == 0.0) continue;
    num += support * s.per_class[c].value_or(0.0);
    den += support;
  }
  return den > 0.0 ? num / den : 0.0;
}

// --- evaluate_run ----------------------------------------------------------

namespace {

namespace fs = std::filesystem;

bool is_label_raster(const fs::path& p) {
  if (p.extension() != ".json" || !fs::exists(payload_path(p))) return false;
  try {
    RasterHeader h = read_header(p);
    return h.dtype == DType::U8 && h.bands == 1;
  } catch (const Error&) {
    return false;
  }
}

std::optional<fs::path> find_gt(const fs::path& root, const std::string& name,
                                bool allow_csv, bool single) {
  if (root.empty()) return std::nullopt;
  if (fs::is_directory(root)) {
    for (const char* ext : {".json", ".csv"}) {
      if (std::string(ext) == ".csv" && !allow_csv) continue;
      fs::path candidate = root / (name + ext);
      if (fs::exists(candidate)) return candidate;
    }
    return std::nullopt;
  }
  if (!single)
    throw Error("ground truth " + root.string() +
                " is a file but several predictions were given");
  if (fs::exists(root)) return root;
  if (fs::exists(header_path(root))) return header_path(root);
  throw Error("missing ground truth file: " + root.string());
}

}  // namespace

EvalReport evaluate_run(const fs::path& pred, const fs::path& gt_points,
                        const fs::path& gt_dense) {
  std::vector<fs::path> preds;
  if (fs::is_directory(pred)) {
    for (const auto& e : fs::directory_iterator(pred))
      if (is_label_raster(e.path())) preds.push_back(e.path());
    std::sort(preds.begin(), preds.end());
  } else if (fs::exists(header_path(pred))) {
    preds.push_back(header_path(pred));
  }
  if (preds.empty()) throw Error("no prediction rasters found at " + pred.string());
  const bool single = preds.size() == 1;

  EvalReport report;
  for (const auto& p : preds) {
    SectionReport sec;
    sec.name = p.stem().string();
    LabelRaster prediction = read_labels(p);
    auto pts = find_gt(gt_points, sec.name, true, single);
    auto dense = find_gt(gt_dense, sec.name, false, single);
    if (!pts && !dense)
      throw Error("missing ground truth for section " + sec.name);
    if (dense) accumulate(sec.dense, prediction, read_labels(*dense));
    if (pts) {
      if (pts->extension() == ".csv") {
        PointRaster pr = rasterize_points(read_points_csv(*pts),
                                          prediction.height(), prediction.width());
        accumulate(sec.points, prediction, pr.labels, &pr.superclass);
      } else {
        // A sibling <stem>_superclass raster carries the forest flags.
        fs::path flags = pts->parent_path() / (pts->stem().string() + "_superclass.json");
        if (fs::exists(flags)) {
          LabelRaster sc = read_labels(flags);
          accumulate(sec.points, prediction, read_labels(*pts), &sc);
        } else {
          accumulate(sec.points, prediction, read_labels(*pts));
        }
      }
    }
    report.dense += sec.dense;
    report.points += sec.points;
    report.sections.push_back(std::move(sec));
  }
  return report;
}

namespace {

nlohmann::json scores_json(const ConfusionMatrix& dense,
                           const ConfusionMatrix& points) {
  nlohmann::json j;
  std::optional<ClassScores> d, p;
  if (dense.total() > 0) d = iou(dense);
  if (points.total() > 0) p = f1(points);
  nlohmann::json per_class = nlohmann::json::object();
  for (int c = 0; c < kNumTrainableClasses; ++c) {
    auto pct = [](const std::optional<ClassScores>& s, int k) -> nlohmann::json {
      if (!s || !s->per_class[k]) return nullptr;
      return 100.0 * *s->per_class[k];
    };
    per_class[std::string(class_name(static_cast<FuelClass>(c)))] = {
        {"iou", pct(d, c)},          {"f1", pct(p, c)},
        {"tp", dense.tp(c)},         {"fp", dense.fp(c)},
        {"fn", dense.fn(c)},         {"points_tp", points.tp(c)},
        {"points_fp", points.fp(c)}, {"points_fn", points.fn(c)},
    };
  }
  j["per_class"] = per_class;
  j["mean_iou"] = d ? nlohmann::json(100.0 * d->mean) : nlohmann::json(nullptr);
  j["macro_f1"] = p ? nlohmann::json(100.0 * p->mean) : nlohmann::json(nullptr);
  j["weighted_f1"] =
      p ? nlohmann::json(100.0 * weighted_f1(points)) : nlohmann::json(nullptr);
  j["n_pixels"] = dense.total();
  j["n_points"] = points.total();
  return j;
}

}  // namespace

nlohmann::json report_json(const EvalReport& report) {
  nlohmann::json j = scores_json(report.dense, report.points);
  j["sections"] = nlohmann::json::array();
  for (const auto& s : report.sections) {
    nlohmann::json sj = scores_json(s.dense, s.points);
    sj["name"] = s.name;
    j["sections"].push_back(std::move(sj));
  }
  return j;
}

void write_report(const EvalReport& report, const fs::path& json_path,
                  const fs::path& csv_path) {
  nlohmann::json j = report_json(report);
  {
    std::ofstream out(json_path);
    out << j.dump(2) << '\n';
    if (!out) throw Error("cannot write " + json_path.string());
  }
  std::ofstream csv(csv_path);
  csv << "section,class,iou,f1,tp,fp,fn,points_tp,points_fp,points_fn\n";
  auto rows = [&](const std::string& section, const nlohmann::json& sj) {
    for (const auto& [name, v] : sj["per_class"].items()) {
      auto num = [](const nlohmann::json& x) {
        return x.is_null() ? std::string() : std::to_string(x.get<double>());
      };
      csv << section << ',' << name << ',' << num(v["iou"]) << ','
          << num(v["f1"]) << ',' << v["tp"] << ',' << v["fp"] << ','
          << v["fn"] << ',' << v["points_tp"] << ',' << v["points_fp"] << ','
          << v["points_fn"] << '\n';
    }
  };
  for (const auto& s : j["sections"]) rows(s["name"].get<std::string>(), s);
  rows("pooled", j);
  if (!csv) throw Error("cannot write " + csv_path.string());
}

}  // namespace spada
