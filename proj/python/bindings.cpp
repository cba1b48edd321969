// Python bindings. Structured values cross the boundary as JSON text; images as
// float64 numpy arrays of shape (H, W, C).

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "diffid/corpus.hpp"
#include "diffid/error.hpp"
#include "diffid/evaluate.hpp"
#include "diffid/image_io.hpp"
#include "diffid/quantify.hpp"
#include "diffid/serialize.hpp"
#include "diffid/synthetic.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using nlohmann::json;
using namespace diffid;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const Image& img) {
    Array out({img.height(), img.width(), img.channels()});
    std::copy(img.pixels().begin(), img.pixels().end(), out.mutable_data());
    return out;
}

Image from_array(const Array& a) {
    if (a.ndim() != 3) throw ShapeError("expected an (H, W, C) array");
    const auto* p = a.data();
    return Image::from_pixels(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                              static_cast<int>(a.shape(2)), std::vector<double>(p, p + a.size()));
}

SyntheticWorldConfig world_from(const std::string& text) {
    return text.empty() ? SyntheticWorldConfig{} : json::parse(text).get<SyntheticWorldConfig>();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Reference-assisted face-swap detection core";

    auto base = py::register_exception<Error>(m, "DiffIdError", PyExc_RuntimeError);
    py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
    py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
    py::register_exception<PreprocessError>(m, "PreprocessError", base.ptr());
    py::register_exception<BackendError>(m, "BackendError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());

    m.def("auc", [](std::vector<double> real, std::vector<double> fake) { return auc(real, fake); },
          py::arg("real_scores"), py::arg("fake_scores"));

    m.def("calibrate",
          [](std::vector<double> real, std::vector<double> fake) {
              const auto c = calibrate_threshold(real, fake);
              return py::make_tuple(c.threshold, c.real_q95, c.fake_q05);
          },
          py::arg("real_scores"), py::arg("fake_scores"),
          "(threshold, real 95th percentile, fake 5th percentile)");

    m.def("angle",
          [](double l_recon, double l_recon_id, double l_id, double eps) {
              return angle_from_triple(DistanceTriple{l_recon, l_recon_id, l_id}, eps);
          },
          py::arg("l_recon"), py::arg("l_recon_id"), py::arg("l_id"), py::arg("eps") = kDefaultEps);

    m.def("metric",
          [](std::array<double, 3> ref, std::array<double, 3> test, double eps) {
              const DistanceTriple r{ref[0], ref[1], ref[2], Space::Ref};
              const DistanceTriple t{test[0], test[1], test[2], Space::Test};
              return json(diffid_metric(r, t, eps)).dump();
          },
          py::arg("ref"), py::arg("test"), py::arg("eps") = kDefaultEps,
          "Score JSON from two (l_recon, l_recon_id, l_id) triples.");

    m.def("read_image", [](const fs::path& p) { return to_array(read_image(p)); }, py::arg("path"));
    m.def("write_png", [](const fs::path& p, const Array& a) { write_png(p, from_array(a)); }, py::arg("path"),
          py::arg("image"));
    m.def("jpeg_degrade", [](const Array& a, int qf) { return to_array(jpeg_degrade(from_array(a), qf)); },
          py::arg("image"), py::arg("qf"));

    m.def("default_world_config", [] { return json(SyntheticWorldConfig{}).dump(); });

    m.def("make_corpus",
          [](const fs::path& out, const std::string& world, const std::string& spec) {
              const CorpusSpec s = spec.empty() ? CorpusSpec{} : json::parse(spec).get<CorpusSpec>();
              materialize_corpus(make_synthetic_corpus(world_from(world), s), out);
              return out / "manifest.jsonl";
          },
          py::arg("out_dir"), py::arg("world_config") = "", py::arg("spec") = "",
          "Render a synthetic corpus to disk and return the manifest path.");

    m.def("evaluate",
          [](const fs::path& manifest_path, const std::string& config, const std::string& generator) {
              const auto manifest = read_manifest(manifest_path);
              const EvalConfig cfg = config.empty() ? EvalConfig{} : json::parse(config).get<EvalConfig>();
              SyntheticWorldConfig gen = manifest.world.value_or(SyntheticWorldConfig{});
              if (!generator.empty()) {
                  json merged = gen;
                  merged.update(json::parse(generator));
                  gen = merged.get<SyntheticWorldConfig>();
              }
              py::gil_scoped_release release;
              auto world = std::make_shared<const SyntheticWorld>(gen);
              const SyntheticBackend backend(world);
              const SyntheticPreprocessor prep(world);
              return json(run_evaluation(manifest, backend, prep, cfg)).dump();
          },
          py::arg("manifest"), py::arg("config") = "", py::arg("generator") = "",
          "Evaluate a manifest with the synthetic backend; returns the report JSON.");

    m.def("detect",
          [](const fs::path& ref_path, const fs::path& test_path, const std::string& world, double threshold,
             bool use_mask) {
              auto w = std::make_shared<const SyntheticWorld>(world_from(world));
              const SyntheticBackend backend(w);
              const SyntheticPreprocessor prep(w);
              const auto r = detect(read_image(ref_path), read_image(test_path), backend, prep,
                                    {.threshold = threshold, .use_mask = use_mask, .render_visualizations = false});
              return json{{"score", r.score}, {"iesim", r.iesim}, {"fake", r.fake}, {"threshold", r.threshold}}
                  .dump();
          },
          py::arg("ref"), py::arg("test"), py::arg("world_config") = "", py::arg("threshold") = 0.6,
          py::arg("use_mask") = true);
}
