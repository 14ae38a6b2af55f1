#include "histosynth/concordance.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "histosynth/error.hpp"

namespace histosynth::stats {
namespace {

constexpr double kZ95 = 1.959963984540054;

void fill_interval(KappaResult& r) {
  r.ci_low = r.kappa - kZ95 * r.std_error;
  r.ci_high = r.kappa + kZ95 * r.std_error;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(trim(f));
    rows.push_back(std::move(fields));
  }
  return rows;
}

std::map<std::string, std::size_t> header_index(const std::vector<std::string>& header,
                                                const std::vector<std::string>& required) {
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < header.size(); ++i) idx[header[i]] = i;
  for (const auto& r : required)
    if (!idx.count(r)) throw Error(ErrorCode::kConfig, "missing column '" + r + "'");
  return idx;
}

bool is_number(const std::string& s) {
  if (s.empty()) return false;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

Origin parse_origin(const std::string& s) {
  std::string v = s;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "real") return Origin::kReal;
  if (v == "synthesized" || v == "synthetic" || v == "synth") return Origin::kSynthesized;
  throw Error(ErrorCode::kConfig, "detection value must be 'real' or 'synthesized', got '" + s + "'");
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "NA";
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << *v;
  return os.str();
}

}  // namespace

void validate(const RatingTable& t) {
  if (t.num_categories < 1) throw Error(ErrorCode::kConfig, "category count must be >= 1");
  if (t.items() < 1) throw Error(ErrorCode::kConfig, "rating table needs at least one item");
  if (t.raters() < 2) throw Error(ErrorCode::kConfig, "rating table needs at least two raters");
  for (const auto& row : t.ratings) {
    if (static_cast<int>(row.size()) != t.raters()) throw Error(ErrorCode::kShape, "ragged rating table");
    for (int v : row)
      if (v != kMissing && (v < 0 || v >= t.num_categories))
        throw Error(ErrorCode::kInvalidLabel, "rating " + std::to_string(v) + " outside the category set");
  }
}

std::vector<std::optional<int>> consensus(const RatingTable& t) {
  validate(t);
  std::vector<std::optional<int>> out;
  out.reserve(t.ratings.size());
  std::vector<int> counts(t.num_categories);
  for (const auto& row : t.ratings) {
    std::fill(counts.begin(), counts.end(), 0);
    int given = 0;
    for (int v : row)
      if (v != kMissing) ++counts[v], ++given;
    const auto best = std::max_element(counts.begin(), counts.end());
    if (given > 0 && 2 * *best > given)
      out.emplace_back(static_cast<int>(best - counts.begin()));
    else
      out.emplace_back(std::nullopt);
  }
  return out;
}

KappaResult cohen_kappa(const std::vector<int>& a, const std::vector<int>& b, int num_categories) {
  if (a.size() != b.size()) throw Error(ErrorCode::kShape, "rating sequences differ in length");
  if (num_categories < 1) throw Error(ErrorCode::kConfig, "category count must be >= 1");
  std::vector<double> ma(num_categories, 0.0), mb(num_categories, 0.0);
  double agree = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == kMissing || b[i] == kMissing) continue;
    if (a[i] < 0 || a[i] >= num_categories || b[i] < 0 || b[i] >= num_categories)
      throw Error(ErrorCode::kInvalidLabel, "rating outside the category set");
    ma[a[i]] += 1.0;
    mb[b[i]] += 1.0;
    if (a[i] == b[i]) agree += 1.0;
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::kUndefinedKappa, "no co-rated items");
  KappaResult r;
  r.n = n;
  r.observed = agree / n;
  for (int c = 0; c < num_categories; ++c) r.chance += (ma[c] / n) * (mb[c] / n);
  if (r.chance >= 1.0) throw Error(ErrorCode::kUndefinedKappa, "chance agreement is 1 (both raters constant)");
  r.kappa = (r.observed - r.chance) / (1.0 - r.chance);
  r.std_error = std::sqrt(r.observed * (1.0 - r.observed) / (n * (1.0 - r.chance) * (1.0 - r.chance)));
  fill_interval(r);
  return r;
}

KappaResult fleiss_kappa(const RatingTable& t) {
  validate(t);
  const int raters = t.raters();
  const int cats = t.num_categories;
  std::vector<double> totals(cats, 0.0);
  double sum_p = 0.0;
  int items = 0;
  std::vector<int> counts(cats);
  for (const auto& row : t.ratings) {
    if (std::find(row.begin(), row.end(), kMissing) != row.end()) continue;
    std::fill(counts.begin(), counts.end(), 0);
    for (int v : row) ++counts[v];
    double sq = 0.0;
    for (int c = 0; c < cats; ++c) {
      sq += static_cast<double>(counts[c]) * counts[c];
      totals[c] += counts[c];
    }
    sum_p += (sq - raters) / (static_cast<double>(raters) * (raters - 1));
    ++items;
  }
  if (items == 0) throw Error(ErrorCode::kUndefinedKappa, "no fully rated items");
  KappaResult r;
  r.n = items;
  r.observed = sum_p / items;
  double sum_pq = 0.0, sum_pq_diff = 0.0;
  for (int c = 0; c < cats; ++c) {
    const double p = totals[c] / (static_cast<double>(items) * raters);
    const double q = 1.0 - p;
    r.chance += p * p;
    sum_pq += p * q;
    sum_pq_diff += p * q * (q - p);
  }
  if (r.chance >= 1.0) throw Error(ErrorCode::kUndefinedKappa, "a single category is used everywhere");
  r.kappa = (r.observed - r.chance) / (1.0 - r.chance);
  // Large-sample standard error under the null (Fleiss, Nee & Landis).
  r.std_error = std::sqrt(2.0) / (sum_pq * std::sqrt(static_cast<double>(items) * raters * (raters - 1))) *
                std::sqrt(std::max(0.0, sum_pq * sum_pq - sum_pq_diff));
  fill_interval(r);
  return r;
}

DetectionMetrics detection_metrics(const DetectionOutcome& d, Origin positive) {
  if (d.predicted.size() != d.truth.size()) throw Error(ErrorCode::kShape, "detection sequences differ in length");
  DetectionMetrics m;
  for (std::size_t i = 0; i < d.truth.size(); ++i) {
    const bool p = d.predicted[i] == positive, t = d.truth[i] == positive;
    if (p && t) ++m.tp;
    else if (p) ++m.fp;
    else if (t) ++m.fn;
    else ++m.tn;
  }
  auto ratio = [](int num, int den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / den;
  };
  m.accuracy = ratio(m.tp + m.tn, m.tp + m.tn + m.fp + m.fn);
  m.precision = ratio(m.tp, m.tp + m.fp);
  m.sensitivity = ratio(m.tp, m.tp + m.fn);
  m.specificity = ratio(m.tn, m.tn + m.fp);
  return m;
}

RatingFile parse_ratings(const std::string& csv, const std::vector<std::string>& categories) {
  const auto rows = parse_csv(csv);
  if (rows.empty()) throw Error(ErrorCode::kConfig, "empty ratings file");
  const auto idx = header_index(rows.front(), {"item", "rater", "grade"});
  RatingFile f;
  std::map<std::string, int> items, raters;
  std::vector<std::tuple<int, int, std::string>> cells;
  std::set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() < rows.front().size()) throw Error(ErrorCode::kConfig, "short row " + std::to_string(r + 1));
    const auto& item = row[idx.at("item")];
    const auto& rater = row[idx.at("rater")];
    if (!items.count(item)) items[item] = static_cast<int>(f.item_ids.size()), f.item_ids.push_back(item);
    if (!raters.count(rater)) raters[rater] = static_cast<int>(f.rater_ids.size()), f.rater_ids.push_back(rater);
    cells.emplace_back(items[item], raters[rater], row[idx.at("grade")]);
    if (!row[idx.at("grade")].empty()) seen.insert(row[idx.at("grade")]);
  }
  if (categories.empty()) {
    f.categories.assign(seen.begin(), seen.end());
    if (std::all_of(f.categories.begin(), f.categories.end(), is_number))
      std::sort(f.categories.begin(), f.categories.end(),
                [](const std::string& a, const std::string& b) { return std::stod(a) < std::stod(b); });
  } else {
    f.categories = categories;
  }
  std::map<std::string, int> code;
  for (std::size_t i = 0; i < f.categories.size(); ++i) code[f.categories[i]] = static_cast<int>(i);
  f.table.num_categories = static_cast<int>(f.categories.size());
  f.table.ratings.assign(f.item_ids.size(), std::vector<int>(f.rater_ids.size(), kMissing));
  for (const auto& [i, r, g] : cells) {
    if (g.empty()) continue;
    const auto it = code.find(g);
    if (it == code.end()) throw Error(ErrorCode::kInvalidLabel, "grade '" + g + "' is not in the category list");
    f.table.ratings[i][r] = it->second;
  }
  return f;
}

std::vector<std::pair<std::string, DetectionOutcome>> parse_detections(const std::string& csv) {
  const auto rows = parse_csv(csv);
  if (rows.empty()) throw Error(ErrorCode::kConfig, "empty detections file");
  const auto idx = header_index(rows.front(), {"item", "predicted", "truth"});
  const bool has_rater = idx.count("rater") > 0;
  std::vector<std::pair<std::string, DetectionOutcome>> out;
  std::map<std::string, std::size_t> slot;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() < rows.front().size()) throw Error(ErrorCode::kConfig, "short row " + std::to_string(r + 1));
    const std::string rater = has_rater ? row[idx.at("rater")] : "all";
    if (!slot.count(rater)) slot[rater] = out.size(), out.push_back({rater, {}});
    auto& d = out[slot[rater]].second;
    d.predicted.push_back(parse_origin(row[idx.at("predicted")]));
    d.truth.push_back(parse_origin(row[idx.at("truth")]));
  }
  return out;
}

AgreementReport agreement_report(const std::vector<std::pair<std::string, DetectionOutcome>>& detections,
                                 const std::optional<RatingFile>& rated,
                                 const std::optional<RatingFile>& reference) {
  AgreementReport rep;
  for (const auto& [rater, d] : detections) rep.detection.emplace_back(rater, detection_metrics(d));

  auto try_fleiss = [](const RatingFile& f) -> std::optional<KappaResult> {
    try {
      return fleiss_kappa(f.table);
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  if (rated) rep.fleiss_rated = try_fleiss(*rated);
  if (reference) rep.fleiss_reference = try_fleiss(*reference);

  const RatingFile* ref = reference ? &*reference : (rated ? &*rated : nullptr);
  if (!rated || !ref) return rep;

  // Shared category codes across both files, keyed by grade label.
  std::vector<std::string> cats = ref->categories;
  for (const auto& c : rated->categories)
    if (std::find(cats.begin(), cats.end(), c) == cats.end()) cats.push_back(c);
  auto remap = [&](const RatingFile& f, int code) {
    if (code == kMissing) return kMissing;
    return static_cast<int>(std::find(cats.begin(), cats.end(), f.categories[code]) - cats.begin());
  };

  const auto reference_grade = consensus(ref->table);
  std::map<std::string, std::optional<int>> by_item;
  for (std::size_t i = 0; i < ref->item_ids.size(); ++i) {
    by_item[ref->item_ids[i]] = reference_grade[i] ? std::optional<int>(remap(*ref, *reference_grade[i])) : std::nullopt;
    if (!reference_grade[i]) ++rep.excluded_items;
  }

  for (std::size_t r = 0; r < rated->rater_ids.size(); ++r) {
    RaterGrading g;
    g.rater = rated->rater_ids[r];
    std::vector<int> mine, theirs;
    for (std::size_t i = 0; i < rated->item_ids.size(); ++i) {
      const auto it = by_item.find(rated->item_ids[i]);
      if (it == by_item.end() || !it->second) continue;
      const int v = rated->table.ratings[i][r];
      if (v == kMissing) continue;
      mine.push_back(remap(*rated, v));
      theirs.push_back(*it->second);
    }
    g.compared = static_cast<int>(mine.size());
    if (!mine.empty()) {
      int hits = 0;
      for (std::size_t i = 0; i < mine.size(); ++i) hits += mine[i] == theirs[i];
      g.accuracy = static_cast<double>(hits) / mine.size();
      try {
        g.kappa = cohen_kappa(mine, theirs, static_cast<int>(cats.size()));
      } catch (const Error& e) {
        g.note = e.what();
      }
    }
    rep.grading.push_back(std::move(g));
  }
  return rep;
}

std::string format_report(const AgreementReport& r) {
  std::ostringstream os;
  if (!r.detection.empty()) {
    os << "# real vs synthesized detection (positive class: real)\n";
    os << "metric";
    for (const auto& [rater, m] : r.detection) os << "," << rater;
    os << "\n";
    const std::pair<const char*, std::optional<double> DetectionMetrics::*> rows[] = {
        {"accuracy", &DetectionMetrics::accuracy},
        {"precision", &DetectionMetrics::precision},
        {"sensitivity", &DetectionMetrics::sensitivity},
        {"specificity", &DetectionMetrics::specificity}};
    for (const auto& [name, field] : rows) {
      os << name;
      for (const auto& [rater, m] : r.detection) os << "," << fmt(m.*field);
      os << "\n";
    }
    os << "\n";
  }
  if (!r.grading.empty()) {
    os << "# grade agreement with the consensus reference (Cohen's kappa, asymptotic normal 95% CI)\n";
    os << "metric";
    for (const auto& g : r.grading) os << "," << g.rater;
    os << "\n";
    auto row = [&](const char* name, auto get) {
      os << name;
      for (const auto& g : r.grading) os << "," << fmt(get(g));
      os << "\n";
    };
    row("accuracy", [](const RaterGrading& g) { return g.accuracy; });
    row("kappa", [](const RaterGrading& g) { return g.kappa ? std::optional(g.kappa->kappa) : std::nullopt; });
    row("kappa_ci_low", [](const RaterGrading& g) { return g.kappa ? std::optional(g.kappa->ci_low) : std::nullopt; });
    row("kappa_ci_high", [](const RaterGrading& g) { return g.kappa ? std::optional(g.kappa->ci_high) : std::nullopt; });
    os << "items," ;
    for (std::size_t i = 0; i < r.grading.size(); ++i) os << (i ? "," : "") << r.grading[i].compared;
    os << "\nexcluded_reference_items," << r.excluded_items << "\n\n";
  }
  auto fleiss_row = [&](const char* name, const std::optional<KappaResult>& k) {
    if (!k) return;
    os << name << "," << fmt(k->kappa) << "," << fmt(k->ci_low) << "," << fmt(k->ci_high) << "," << k->n << "\n";
  };
  if (r.fleiss_rated || r.fleiss_reference) {
    os << "# Fleiss' kappa (asymptotic normal 95% CI)\nset,kappa,ci_low,ci_high,items\n";
    fleiss_row("rated", r.fleiss_rated);
    fleiss_row("reference", r.fleiss_reference);
  }
  return os.str();
}

}  // namespace histosynth::stats
