#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "histosynth/data_model.hpp"

namespace histosynth::metrics {

/// One-vs-rest pixel counts for a single class.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o);
  bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(const LabelMap& pred, const LabelMap& truth, int cls);

/// (TP + TN) / (TP + TN + FP + FN); throws kUndefinedMetric on an empty table.
double pixel_accuracy(const ConfusionCounts& c);

struct IouResult {
  double value = 0.0;
  /// TP + FP + FN == 0: class never predicted nor present.
  bool absent = false;
};

/// TP / (TP + FP + FN).
IouResult iou(const ConfusionCounts& c);

struct ClassMetrics {
  int cls = 0;
  ConfusionCounts counts;
  double pa = 0.0;
  double iou = 0.0;
  bool absent = false;
};

struct SegMetrics {
  std::vector<ClassMetrics> per_class;
  double mpa = 0.0;
  double miou = 0.0;
};

/// Unweighted means over non-absent classes; throws kUndefinedMetric if all are absent.
std::pair<double, double> mean_metrics(const std::vector<ClassMetrics>& per_class);

/// Accumulates per-class counts over any number of (prediction, truth) pairs.
class MetricAccumulator {
 public:
  explicit MetricAccumulator(int num_classes);

  void add(const LabelMap& pred, const LabelMap& truth);
  const std::vector<ConfusionCounts>& counts() const { return counts_; }
  SegMetrics finish() const;

 private:
  std::vector<ConfusionCounts> counts_;
};

SegMetrics evaluate(const std::vector<LabelMap>& preds, const std::vector<LabelMap>& truths, int num_classes);

/// Delimited report: header, one row per class (class,PA,IOU,absent), then a summary row.
std::string format_report(const SegMetrics& m, const std::vector<std::string>& class_names = {});

}  // namespace histosynth::metrics
