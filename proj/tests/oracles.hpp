#pragma once

// Brute-force reference implementations. They share no code with the library and are
// written in the most literal form available (per-pixel loops, contingency tables).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "histosynth/data_model.hpp"
#include "histosynth/stain_prep.hpp"

namespace oracle {

struct PixelCounts {
  double tp = 0, tn = 0, fp = 0, fn = 0;
};

inline PixelCounts count_pixels(const histosynth::LabelMap& pred, const histosynth::LabelMap& truth, int k) {
  PixelCounts c;
  for (int y = 0; y < truth.height; ++y)
    for (int x = 0; x < truth.width; ++x) {
      const bool p = pred.at(y, x) == k, t = truth.at(y, x) == k;
      if (p && t) c.tp += 1;
      else if (!p && !t) c.tn += 1;
      else if (p) c.fp += 1;
      else c.fn += 1;
    }
  return c;
}

inline double pixel_accuracy(const PixelCounts& c) { return (c.tp + c.tn) / (c.tp + c.tn + c.fp + c.fn); }
inline double iou(const PixelCounts& c) { return c.tp / (c.tp + c.fp + c.fn); }

inline histosynth::stain::BinaryMask median3(const histosynth::stain::BinaryMask& m) {
  histosynth::stain::BinaryMask out(m.width, m.height);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      std::array<int, 9> win{};
      int n = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          win[n++] = m.at(std::clamp(y + dy, 0, m.height - 1), std::clamp(x + dx, 0, m.width - 1));
      std::sort(win.begin(), win.end());
      out.at(y, x) = static_cast<std::uint8_t>(win[4]);
    }
  return out;
}

struct Kappa {
  double kappa = 0, se = 0;
};

/// Cohen's kappa from the C x C contingency table.
inline Kappa cohen(const std::vector<int>& a, const std::vector<int>& b, int cats) {
  std::vector<std::vector<double>> table(cats, std::vector<double>(cats, 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) table[a[i]][b[i]] += 1.0;
  double n = 0, diag = 0;
  std::vector<double> rows(cats, 0.0), cols(cats, 0.0);
  for (int i = 0; i < cats; ++i)
    for (int j = 0; j < cats; ++j) {
      n += table[i][j];
      rows[i] += table[i][j];
      cols[j] += table[i][j];
      if (i == j) diag += table[i][j];
    }
  const double po = diag / n;
  double pe = 0;
  for (int i = 0; i < cats; ++i) pe += rows[i] * cols[i];
  pe /= n * n;
  Kappa k;
  k.kappa = (po - pe) / (1 - pe);
  k.se = std::sqrt(po * (1 - po) / n) / (1 - pe);
  return k;
}

/// Fleiss' kappa from the N x C count matrix n_ij, with the large-sample null standard error.
inline Kappa fleiss(const std::vector<std::vector<int>>& ratings, int cats) {
  const double items = static_cast<double>(ratings.size());
  const double raters = static_cast<double>(ratings.front().size());
  std::vector<std::vector<double>> nij(ratings.size(), std::vector<double>(cats, 0.0));
  for (std::size_t i = 0; i < ratings.size(); ++i)
    for (int v : ratings[i]) nij[i][v] += 1.0;
  double pbar = 0;
  for (const auto& row : nij) {
    double agree_pairs = 0;
    for (double c : row) agree_pairs += c * (c - 1);
    pbar += agree_pairs / (raters * (raters - 1));
  }
  pbar /= items;
  std::vector<double> p(cats, 0.0);
  for (int j = 0; j < cats; ++j) {
    for (const auto& row : nij) p[j] += row[j];
    p[j] /= items * raters;
  }
  double pe = 0, spq = 0, spqqp = 0;
  for (int j = 0; j < cats; ++j) {
    pe += p[j] * p[j];
    spq += p[j] * (1 - p[j]);
    spqqp += p[j] * (1 - p[j]) * ((1 - p[j]) - p[j]);
  }
  Kappa k;
  k.kappa = (pbar - pe) / (1 - pe);
  k.se = std::sqrt(2.0 / (items * raters * (raters - 1))) * std::sqrt(spq * spq - spqqp) / spq;
  return k;
}

}  // namespace oracle
