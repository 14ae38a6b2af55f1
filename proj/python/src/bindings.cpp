#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "histosynth/concordance.hpp"
#include "histosynth/dataset.hpp"
#include "histosynth/image_io.hpp"
#include "histosynth/latent.hpp"
#include "histosynth/procedural.hpp"
#include "histosynth/seg_metrics.hpp"
#include "histosynth/stain_prep.hpp"
#include "histosynth/training.hpp"

namespace py = pybind11;
using namespace histosynth;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

LabelMap to_label_map(const U8Array& a, int num_classes) {
  if (a.ndim() != 2) throw py::value_error("label maps must be 2-D arrays");
  LabelMap m(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), num_classes);
  std::copy(a.data(), a.data() + a.size(), m.values.begin());
  return m;
}

ByteImage to_byte_image(const U8Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw py::value_error("images must be HxWx3 uint8 arrays");
  ByteImage img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), img.data.begin());
  return img;
}

U8Array from_label_map(const LabelMap& m) {
  U8Array out({m.height, m.width});
  std::copy(m.values.begin(), m.values.end(), out.mutable_data());
  return out;
}

U8Array from_byte_image(const ByteImage& img) {
  U8Array out({img.height, img.width, 3});
  std::copy(img.data.begin(), img.data.end(), out.mutable_data());
  return out;
}

LatentVector to_latent(const F32Array& a) {
  if (a.ndim() != 1) throw py::value_error("latents must be 1-D arrays");
  return LatentVector(std::vector<float>(a.data(), a.data() + a.size()));
}

F32Array from_latent(const LatentVector& z) {
  F32Array out(static_cast<py::ssize_t>(z.size()));
  std::copy(z.values().begin(), z.values().end(), out.mutable_data());
  return out;
}

py::dict kappa_dict(const stats::KappaResult& k) {
  py::dict d;
  d["kappa"] = k.kappa;
  d["std_error"] = k.std_error;
  d["ci_low"] = k.ci_low;
  d["ci_high"] = k.ci_high;
  d["observed"] = k.observed;
  d["chance"] = k.chance;
  d["n"] = k.n;
  return d;
}

/// Inference-only generator handle.
class Synthesizer {
 public:
  explicit Synthesizer(const std::filesystem::path& checkpoint) : model_(train::load_synthesis_model(checkpoint)) {}

  U8Array generate(const U8Array& labels, py::object seed, py::object latent) {
    const auto m = to_label_map(labels, model_.palette.size());
    if (!seed.is_none() && !latent.is_none()) throw py::value_error("give seed or latent, not both");
    const auto z = latent.is_none() ? latent::latent_from_seed(seed.is_none() ? 0 : seed.cast<std::uint64_t>())
                                    : to_latent(latent.cast<F32Array>());
    ByteImage img;
    {
      py::gil_scoped_release release;
      img = denormalize(net::generate(model_.generator, m, z));
    }
    return from_byte_image(img);
  }

  int resolution() const { return model_.config.generator.resolution; }
  int num_classes() const { return model_.palette.size(); }
  std::int64_t iteration() const { return model_.iteration; }
  std::vector<std::string> class_names() const {
    std::vector<std::string> names;
    for (const auto& c : model_.palette.classes()) names.push_back(c.name);
    return names;
  }

 private:
  train::SynthesisModel model_;
};

}  // namespace

PYBIND11_MODULE(_histosynth, m) {
  m.doc() = "Label-conditioned histology synthesis: core operations";

  py::register_exception<Error>(m, "HistosynthError", PyExc_ValueError);

  // metrics
  m.def(
      "segmentation_metrics",
      [](const std::vector<U8Array>& preds, const std::vector<U8Array>& truths, int num_classes) {
        std::vector<LabelMap> p, t;
        for (const auto& a : preds) p.push_back(to_label_map(a, num_classes));
        for (const auto& a : truths) t.push_back(to_label_map(a, num_classes));
        const auto r = metrics::evaluate(p, t, num_classes);
        py::list per_class;
        for (const auto& c : r.per_class) {
          py::dict d;
          d["class"] = c.cls;
          d["pa"] = c.pa;
          d["iou"] = c.iou;
          d["absent"] = c.absent;
          per_class.append(d);
        }
        py::dict out;
        out["mpa"] = r.mpa;
        out["miou"] = r.miou;
        out["per_class"] = per_class;
        return out;
      },
      py::arg("preds"), py::arg("truths"), py::arg("num_classes"),
      "Per-class PA and IOU pooled over all pairs, plus their means over present classes.");

  // concordance
  m.def(
      "cohen_kappa",
      [](const std::vector<int>& a, const std::vector<int>& b, int c) { return kappa_dict(stats::cohen_kappa(a, b, c)); },
      py::arg("a"), py::arg("b"), py::arg("num_categories"));
  m.def(
      "fleiss_kappa",
      [](const std::vector<std::vector<int>>& ratings, int c) {
        return kappa_dict(stats::fleiss_kappa(stats::RatingTable{c, ratings}));
      },
      py::arg("ratings"), py::arg("num_categories"), "ratings[item][rater]; -1 marks a missing rating.");

  // stain preparation
  m.def(
      "stain_concentrations",
      [](const U8Array& rgb) {
        const auto c = stain::deconvolve(stain::rgb_to_od(to_byte_image(rgb)), stain::StainMatrix::ruifrok_he());
        py::array_t<double> out({c.height, c.width, 3});
        std::copy(c.data.begin(), c.data.end(), out.mutable_data());
        return out;
      },
      py::arg("rgb"), "Hematoxylin, eosin and residual concentrations per pixel.");
  m.def(
      "nuclei_mask",
      [](const U8Array& rgb) {
        const auto mask = stain::nuclei_mask(to_byte_image(rgb));
        U8Array out({mask.height, mask.width});
        std::copy(mask.values.begin(), mask.values.end(), out.mutable_data());
        return out;
      },
      py::arg("rgb"));
  m.def(
      "median_filter3",
      [](const U8Array& mask) {
        if (mask.ndim() != 2) throw py::value_error("masks must be 2-D arrays");
        stain::BinaryMask b(static_cast<int>(mask.shape(1)), static_cast<int>(mask.shape(0)));
        for (py::ssize_t i = 0; i < mask.size(); ++i) b.values[i] = mask.data()[i] ? 1 : 0;
        const auto f = stain::median_filter3(b);
        U8Array out({f.height, f.width});
        std::copy(f.values.begin(), f.values.end(), out.mutable_data());
        return out;
      },
      py::arg("mask"));

  // data
  m.def(
      "make_blobs",
      [](std::uint64_t seed, int count, int size) {
        procedural::BlobOptions o;
        o.size = size;
        py::list out;
        for (const auto& p : procedural::make_blob_dataset(seed, count, o))
          out.append(py::make_tuple(from_byte_image(p.image), from_label_map(p.label)));
        return out;
      },
      py::arg("seed"), py::arg("count"), py::arg("size") = 64, "List of (image HxWx3, labels HxW) pairs.");
  m.def(
      "write_blob_dataset",
      [](const std::filesystem::path& dir, int train_count, int test_count, int size, std::uint64_t seed) {
        procedural::BlobOptions o;
        o.size = size;
        std::vector<dataset::NamedPair> pairs;
        const auto tr = procedural::make_blob_dataset(seed, train_count, o);
        const auto te = procedural::make_blob_dataset(seed + 1, test_count, o);
        for (std::size_t i = 0; i < tr.size(); ++i) pairs.push_back({"train_" + std::to_string(i), tr[i], Split::kTrain});
        for (std::size_t i = 0; i < te.size(); ++i) pairs.push_back({"test_" + std::to_string(i), te[i], Split::kTest});
        return dataset::write_dataset(dir, procedural::blob_palette(), pairs);
      },
      py::arg("dir"), py::arg("train") = 500, py::arg("test") = 100, py::arg("size") = 64, py::arg("seed") = 0);
  m.def(
      "encode_label_png",
      [](const U8Array& labels) {
        const auto b = io::encode_png(to_label_map(labels, 256));
        return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
      },
      py::arg("labels"));
  m.def(
      "decode_label_png",
      [](const py::bytes& png) {
        const std::string s = png;
        return from_label_map(io::decode_label_png({s.begin(), s.end()}, 256));
      },
      py::arg("png"));

  // training
  m.def("lr_at", [](std::int64_t it) { return lr_at(it); }, py::arg("iteration"));
  m.def(
      "train_gan",
      [](const std::filesystem::path& data, const std::filesystem::path& out, const std::string& config_json) {
        const auto d = dataset::load_split(data, Split::kTrain);
        auto cfg = config_json.empty() ? train::desk_preset(d.palette.size())
                                       : train::TrainConfig::from_json(nlohmann::json::parse(config_json));
        py::gil_scoped_release release;
        train::GanTrainer trainer(cfg, d.palette);
        train::RunOptions opts;
        opts.out_dir = out;
        const auto r = train::train(trainer, d, opts);
        std::vector<std::tuple<std::int64_t, double, double, double, double>> log;
        for (const auto& x : r.log) log.emplace_back(x.iteration, x.lr, x.d_loss, x.g_gan_loss, x.g_perc_loss);
        return std::make_pair(r.final_checkpoint, log);
      },
      py::arg("data"), py::arg("out"), py::arg("config_json") = "",
      "Trains to completion; returns (final checkpoint, [(iteration, lr, d, g_gan, g_perc)]).");
  m.def(
      "desk_config",
      [](int num_classes) { return train::desk_preset(num_classes).to_json().dump(); },
      py::arg("num_classes") = 3, "Desk-scale TrainConfig as JSON text.");

  // latents
  m.def("latent_from_seed", [](std::uint64_t seed) { return from_latent(latent::latent_from_seed(seed)); },
        py::arg("seed"));
  m.def(
      "lerp", [](const F32Array& a, const F32Array& b, double t) { return from_latent(latent::lerp(to_latent(a), to_latent(b), t)); },
      py::arg("a"), py::arg("b"), py::arg("t"));

  py::class_<Synthesizer>(m, "Synthesizer")
      .def(py::init<const std::filesystem::path&>(), py::arg("checkpoint"))
      .def("generate", &Synthesizer::generate, py::arg("labels"), py::arg("seed") = py::none(),
           py::arg("latent") = py::none(), "RGB uint8 image for a label map and a seed or explicit latent.")
      .def_property_readonly("resolution", &Synthesizer::resolution)
      .def_property_readonly("num_classes", &Synthesizer::num_classes)
      .def_property_readonly("iteration", &Synthesizer::iteration)
      .def_property_readonly("class_names", &Synthesizer::class_names);
}
