#pragma once

#include <optional>
#include <string>
#include <vector>

namespace histosynth::stats {

inline constexpr int kMissing = -1;

/// N items x R raters of category codes in [0, C) or kMissing.
struct RatingTable {
  int num_categories = 0;
  std::vector<std::vector<int>> ratings;  // ratings[item][rater]

  int items() const { return static_cast<int>(ratings.size()); }
  int raters() const { return ratings.empty() ? 0 : static_cast<int>(ratings.front().size()); }
};

void validate(const RatingTable& t);

/// Strict-majority category per item; nullopt marks an excluded item (no strict majority).
std::vector<std::optional<int>> consensus(const RatingTable& t);

struct KappaResult {
  double kappa = 0.0;
  double std_error = 0.0;
  double ci_low = 0.0;   // asymptotic normal 95% interval
  double ci_high = 0.0;
  double observed = 0.0;  // p_o or P-bar
  double chance = 0.0;    // p_e or P-bar_e
  int n = 0;
};

/// Unweighted Cohen's kappa for two aligned rating sequences.
KappaResult cohen_kappa(const std::vector<int>& a, const std::vector<int>& b, int num_categories);

/// Fleiss' kappa; items containing a missing rating are dropped.
KappaResult fleiss_kappa(const RatingTable& t);

enum class Origin { kReal, kSynthesized };

struct DetectionOutcome {
  std::vector<Origin> predicted;
  std::vector<Origin> truth;
};

struct DetectionMetrics {
  int tp = 0, fp = 0, tn = 0, fn = 0;
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
};

DetectionMetrics detection_metrics(const DetectionOutcome& d, Origin positive = Origin::kReal);

// Delimited file formats.
// Ratings: header "item,rater,grade"; grades are free-form labels mapped to category codes
// in sorted order unless an explicit category list is given.
struct RatingFile {
  std::vector<std::string> item_ids;
  std::vector<std::string> rater_ids;
  std::vector<std::string> categories;
  RatingTable table;
};

RatingFile parse_ratings(const std::string& csv, const std::vector<std::string>& categories = {});

/// Detections: header "item,predicted,truth" or "item,rater,predicted,truth";
/// values "real" or "synthesized". Rows are grouped per rater ("all" when absent).
std::vector<std::pair<std::string, DetectionOutcome>> parse_detections(const std::string& csv);

struct RaterGrading {
  std::string rater;
  int compared = 0;
  std::optional<double> accuracy;
  std::optional<KappaResult> kappa;
  std::string note;
};

struct AgreementReport {
  std::vector<std::pair<std::string, DetectionMetrics>> detection;
  std::optional<KappaResult> fleiss_rated;
  std::optional<KappaResult> fleiss_reference;
  std::vector<RaterGrading> grading;
  int excluded_items = 0;
};

/// Builds the per-rater survey summary. The consensus reference comes from `reference`
/// (majority grade per item); each rater's grades in `rated` are scored against it by item id.
AgreementReport agreement_report(const std::vector<std::pair<std::string, DetectionOutcome>>& detections,
                                 const std::optional<RatingFile>& rated,
                                 const std::optional<RatingFile>& reference);
std::string format_report(const AgreementReport& r);

}  // namespace histosynth::stats
