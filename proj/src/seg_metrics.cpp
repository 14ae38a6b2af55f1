#include "histosynth/seg_metrics.hpp"

#include <iomanip>
#include <sstream>

#include "histosynth/error.hpp"

namespace histosynth::metrics {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  tn += o.tn;
  fp += o.fp;
  fn += o.fn;
  return *this;
}

ConfusionCounts confusion(const LabelMap& pred, const LabelMap& truth, int cls) {
  if (pred.width != truth.width || pred.height != truth.height)
    throw Error(ErrorCode::kShape, "prediction and truth dimensions differ");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const bool p = pred.values[i] == cls, t = truth.values[i] == cls;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double pixel_accuracy(const ConfusionCounts& c) {
  if (c.total() == 0) throw Error(ErrorCode::kUndefinedMetric, "pixel accuracy of an empty table");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

IouResult iou(const ConfusionCounts& c) {
  const std::uint64_t denom = c.tp + c.fp + c.fn;
  if (denom == 0) return {0.0, true};
  return {static_cast<double>(c.tp) / static_cast<double>(denom), false};
}

std::pair<double, double> mean_metrics(const std::vector<ClassMetrics>& per_class) {
  double pa = 0.0, io = 0.0;
  int n = 0;
  for (const auto& m : per_class) {
    if (m.absent) continue;
    pa += m.pa;
    io += m.iou;
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::kUndefinedMetric, "every class is absent");
  return {pa / n, io / n};
}

MetricAccumulator::MetricAccumulator(int num_classes) : counts_(num_classes) {
  if (num_classes < 1) throw Error(ErrorCode::kConfig, "class count must be >= 1");
}

void MetricAccumulator::add(const LabelMap& pred, const LabelMap& truth) {
  if (pred.width != truth.width || pred.height != truth.height)
    throw Error(ErrorCode::kShape, "prediction and truth dimensions differ");
  const int k = static_cast<int>(counts_.size());
  const std::uint64_t n = pred.values.size();
  // Single pass: per-class predicted/true/agreeing pixel counts give the one-vs-rest tables.
  std::vector<std::uint64_t> predicted(k, 0), actual(k, 0), hit(k, 0);
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const int p = pred.values[i], t = truth.values[i];
    if (p >= k || t >= k) throw Error(ErrorCode::kInvalidLabel, "label value exceeds class count");
    ++predicted[p];
    ++actual[t];
    if (p == t) ++hit[p];
  }
  for (int c = 0; c < k; ++c) {
    ConfusionCounts cc;
    cc.tp = hit[c];
    cc.fp = predicted[c] - hit[c];
    cc.fn = actual[c] - hit[c];
    cc.tn = n - cc.tp - cc.fp - cc.fn;
    counts_[c] += cc;
  }
}

SegMetrics MetricAccumulator::finish() const {
  SegMetrics out;
  for (int c = 0; c < static_cast<int>(counts_.size()); ++c) {
    ClassMetrics m;
    m.cls = c;
    m.counts = counts_[c];
    m.pa = pixel_accuracy(m.counts);
    const auto r = iou(m.counts);
    m.iou = r.value;
    m.absent = r.absent;
    out.per_class.push_back(m);
  }
  std::tie(out.mpa, out.miou) = mean_metrics(out.per_class);
  return out;
}

SegMetrics evaluate(const std::vector<LabelMap>& preds, const std::vector<LabelMap>& truths, int num_classes) {
  if (preds.size() != truths.size()) throw Error(ErrorCode::kShape, "prediction and truth counts differ");
  MetricAccumulator acc(num_classes);
  for (std::size_t i = 0; i < preds.size(); ++i) acc.add(preds[i], truths[i]);
  return acc.finish();
}

std::string format_report(const SegMetrics& m, const std::vector<std::string>& class_names) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "class,PA,IOU,absent\n";
  for (const auto& c : m.per_class) {
    const std::string name =
        c.cls < static_cast<int>(class_names.size()) ? class_names[c.cls] : std::to_string(c.cls);
    os << name << "," << c.pa << "," << c.iou << "," << (c.absent ? 1 : 0) << "\n";
  }
  os << "mean," << m.mpa << "," << m.miou << ",0\n";
  return os.str();
}

}  // namespace histosynth::metrics
