#include "histosynth/stain_prep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "histosynth/error.hpp"

namespace histosynth::stain {

StainMatrix::StainMatrix(const Eigen::Matrix3d& rows) : rows_(rows) {
  for (int r = 0; r < 3; ++r) {
    const double n = rows_.row(r).norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw Error(ErrorCode::kStainMatrix, "stain vectors must be nonzero and finite");
    rows_.row(r) /= n;
  }
  // Unit rows: |det| is the volume they span, 0 for a degenerate basis.
  if (!(std::abs(rows_.determinant()) > 1e-9)) throw Error(ErrorCode::kStainMatrix, "stain matrix is singular");
  unmixing_ = rows_.transpose().inverse();
}

StainMatrix StainMatrix::ruifrok_he() {
  const Eigen::Vector3d h(0.650, 0.704, 0.286);
  const Eigen::Vector3d e(0.072, 0.990, 0.105);
  const Eigen::Vector3d residual = h.normalized().cross(e.normalized());
  Eigen::Matrix3d m;
  m.row(0) = h.transpose();
  m.row(1) = e.transpose();
  m.row(2) = residual.transpose();
  return StainMatrix(m);
}

RealImage RealImage::channel(int c) const {
  RealImage out{width, height, 1, std::vector<double>(static_cast<std::size_t>(width) * height)};
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = data[i * channels + c];
  return out;
}

double optical_density(std::uint8_t intensity) {
  return -std::log10(std::max<double>(intensity, 1.0) / 255.0);
}

RealImage rgb_to_od(const ByteImage& img) {
  RealImage out{img.width, img.height, 3, std::vector<double>(img.data.size())};
  std::transform(img.data.begin(), img.data.end(), out.data.begin(), optical_density);
  return out;
}

namespace {

RealImage apply3(const RealImage& in, const Eigen::Matrix3d& a) {
  if (in.channels != 3) throw Error(ErrorCode::kShape, "expected a 3-channel image");
  RealImage out{in.width, in.height, 3, std::vector<double>(in.data.size())};
  for (std::size_t p = 0; p < in.data.size(); p += 3) {
    const Eigen::Vector3d v(in.data[p], in.data[p + 1], in.data[p + 2]);
    const Eigen::Vector3d r = a * v;
    out.data[p] = r(0);
    out.data[p + 1] = r(1);
    out.data[p + 2] = r(2);
  }
  return out;
}

}  // namespace

RealImage deconvolve(const RealImage& od, const StainMatrix& m) { return apply3(od, m.unmixing()); }

RealImage compose(const RealImage& concentrations, const StainMatrix& m) {
  return apply3(concentrations, m.rows().transpose());
}

double otsu_threshold(const RealImage& channel) {
  if (channel.channels != 1) throw Error(ErrorCode::kShape, "threshold expects a single channel");
  const auto [lo_it, hi_it] = std::minmax_element(channel.data.begin(), channel.data.end());
  if (lo_it == channel.data.end()) throw Error(ErrorCode::kDegenerateHistogram, "empty channel");
  const double lo = *lo_it, hi = *hi_it;
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw Error(ErrorCode::kInvalidArgument, "non-finite channel values");
  if (!(hi > lo)) throw Error(ErrorCode::kDegenerateHistogram, "constant channel has no Otsu threshold");

  constexpr int kBins = 256;
  const double width = (hi - lo) / kBins;
  std::vector<double> hist(kBins, 0.0);
  for (double v : channel.data) hist[std::min(kBins - 1, static_cast<int>((v - lo) / width))] += 1.0;

  const double total = static_cast<double>(channel.data.size());
  double sum_all = 0.0;
  for (int i = 0; i < kBins; ++i) sum_all += i * hist[i];

  // Between-class variance for a split after bin t; t indexes the last bin of the low class.
  double best = -1.0;
  int best_bin = 0;
  double w0 = 0.0, sum0 = 0.0;
  for (int t = 0; t < kBins - 1; ++t) {
    w0 += hist[t];
    sum0 += t * hist[t];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_bin = t;
    }
  }
  return lo + (best_bin + 1) * width;
}

BinaryMask threshold(const RealImage& channel, ThresholdMethod method) {
  if (channel.channels != 1) throw Error(ErrorCode::kShape, "threshold expects a single channel");
  const double t = method.fixed ? *method.fixed : otsu_threshold(channel);
  BinaryMask mask(channel.width, channel.height);
  for (std::size_t i = 0; i < channel.data.size(); ++i) mask.values[i] = channel.data[i] > t ? 1 : 0;
  return mask;
}

BinaryMask median_filter3(const BinaryMask& mask) {
  BinaryMask out(mask.width, mask.height);
  const int w = mask.width, h = mask.height;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int ones = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = std::clamp(y + dy, 0, h - 1);
        for (int dx = -1; dx <= 1; ++dx) ones += mask.at(yy, std::clamp(x + dx, 0, w - 1));
      }
      out.at(y, x) = ones >= 5 ? 1 : 0;
    }
  }
  return out;
}

BinaryMask nuclei_mask(const ByteImage& img, const NucleiOptions& opts) {
  const RealImage conc = deconvolve(rgb_to_od(img), opts.stains);
  return median_filter3(threshold(conc.channel(0), opts.threshold));
}

LabelMap overlay_class(const LabelMap& base, const BinaryMask& mask, int cls) {
  if (base.width != mask.width || base.height != mask.height)
    throw Error(ErrorCode::kAlignment, "mask and label map dimensions differ");
  LabelMap out = base;
  out.num_classes = std::max(base.num_classes, cls + 1);
  for (std::size_t i = 0; i < out.values.size(); ++i)
    if (mask.values[i]) out.values[i] = static_cast<std::uint8_t>(cls);
  return out;
}

LabelMap derive_nuclei_class(const ByteImage& img, const LabelMap& two_class, const NucleiOptions& opts) {
  if (img.width != two_class.width || img.height != two_class.height)
    throw Error(ErrorCode::kAlignment, "image and label map dimensions differ");
  validate(two_class);
  BinaryMask mask;
  try {
    mask = nuclei_mask(img, opts);
  } catch (const Error& e) {
    // A stain-free (constant) image has no nuclei under Otsu.
    if (e.code() != ErrorCode::kDegenerateHistogram) throw;
    mask = BinaryMask(img.width, img.height, 0);
  }
  LabelMap out = overlay_class(two_class, mask, opts.nuclei_class);
  out.num_classes = opts.nuclei_class + 1;
  return out;
}

std::vector<PatchPair> extract_patches(const PatchPair& pair, int size, int stride) {
  const int w = pair.image.width, h = pair.image.height;
  if (pair.label.width != w || pair.label.height != h)
    throw Error(ErrorCode::kAlignment, "image and label dimensions differ");
  if (stride < 1 || size < 1) throw Error(ErrorCode::kInvalidArgument, "size and stride must be >= 1");
  if (size > std::min(w, h))
    throw Error(ErrorCode::kPatchTooLarge, "patch size " + std::to_string(size) + " exceeds image " +
                                               std::to_string(w) + "x" + std::to_string(h));
  std::vector<PatchPair> out;
  for (int oy = 0; oy + size <= h; oy += stride) {
    for (int ox = 0; ox + size <= w; ox += stride) {
      PatchPair p{ByteImage(size, size), LabelMap(size, size, pair.label.num_classes)};
      for (int y = 0; y < size; ++y) {
        std::copy_n(&pair.image.at(oy + y, ox, 0), size * 3, &p.image.at(y, 0, 0));
        std::copy_n(&pair.label.values[static_cast<std::size_t>(oy + y) * w + ox], size, &p.label.at(y, 0));
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

Transform random_transform(Rng& rng) {
  Transform t;
  t.quarter_turns = static_cast<int>(rng.uniform_int(4));
  t.flip = rng.coin();
  return t;
}

Transform inverse(Transform t) {
  if (t.flip) return t;  // reflections are involutions
  return {(4 - t.quarter_turns) % 4, false};
}

namespace {

// Source coordinate for output pixel (y, x) of an out_h x out_w result.
std::pair<int, int> source_of(int y, int x, int out_h, int out_w, Transform t) {
  if (t.flip) x = out_w - 1 - x;
  // Undo counter-clockwise quarter turns one at a time: out(y, x) = in(x, in_w - 1 - y), in_w = out_h.
  int h = out_h, w = out_w;
  for (int k = 0; k < t.quarter_turns; ++k) {
    const int sy = x, sx = h - 1 - y;
    y = sy;
    x = sx;
    std::swap(h, w);
  }
  return {y, x};
}

}  // namespace

PatchPair apply(const PatchPair& pair, Transform t) {
  const int w = pair.image.width, h = pair.image.height;
  if (pair.label.width != w || pair.label.height != h) throw Error(ErrorCode::kAlignment, "image and label differ");
  t.quarter_turns = ((t.quarter_turns % 4) + 4) % 4;
  if (t.quarter_turns % 2 == 1 && w != h) throw Error(ErrorCode::kShape, "90/270 degree rotation needs a square patch");
  PatchPair out{ByteImage(w, h), LabelMap(w, h, pair.label.num_classes)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto [sy, sx] = source_of(y, x, h, w, t);
      for (int c = 0; c < 3; ++c) out.image.at(y, x, c) = pair.image.at(sy, sx, c);
      out.label.at(y, x) = pair.label.at(sy, sx);
    }
  }
  return out;
}

PatchPair augment(const PatchPair& pair, Rng& rng) { return apply(pair, random_transform(rng)); }

}  // namespace histosynth::stain
