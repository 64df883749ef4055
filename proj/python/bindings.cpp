#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <string>
#include <vector>

#include "ntrojan/errors.hpp"
#include "ntrojan/harness.hpp"
#include "ntrojan/model_format.hpp"
#include "ntrojan/nn.hpp"
#include "ntrojan/sentinel.hpp"
#include "ntrojan/trigger.hpp"
#include "ntrojan/trojan.hpp"

namespace py = pybind11;
using namespace ntrojan;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

py::array_t<float> to_array(const Matrix& m) {
    py::array_t<float> out({m.rows(), m.cols()});
    std::copy(m.cells().begin(), m.cells().end(), out.mutable_data());
    return out;
}

py::array_t<float> to_array(const Vector& v) {
    py::array_t<float> out(v.size());
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

Matrix to_matrix(const FloatArray& a) {
    if (a.ndim() != 2) throw DimensionError("expected a 2-d array");
    return Matrix(a.shape(0), a.shape(1), Vector(a.data(), a.data() + a.size()));
}

Vector to_vector(const FloatArray& a) {
    if (a.ndim() != 1) throw DimensionError("expected a 1-d array");
    return Vector(a.data(), a.data() + a.size());
}

py::bytes to_bytes(const std::vector<std::uint8_t>& b) {
    return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
}

std::vector<std::uint8_t> from_bytes(const py::bytes& b) {
    const std::string s = b;
    return {s.begin(), s.end()};
}

Mode mode_arg(const py::object& o) {
    if (py::isinstance<Mode>(o)) return o.cast<Mode>();
    const std::string name = py::str(o);
    const auto mode = mode_from_string(name);
    if (!mode) throw ConfigError("unknown mode \"" + name + "\"");
    return *mode;
}

py::dict agreement_dict(const Agreement& a) {
    py::dict d;
    d["total"] = a.total;
    d["agree"] = a.agree;
    d["rate"] = a.rate();
    return d;
}

py::dict subset_dict(const SubsetStats& s) {
    py::dict d;
    d["other"] = agreement_dict(s.other);
    d["targeted"] = agreement_dict(s.targeted);
    py::dict c;
    c["tp"] = s.confusion.tp;
    c["tn"] = s.confusion.tn;
    c["fp"] = s.confusion.fp;
    c["fn"] = s.confusion.fn;
    d["confusion"] = c;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Trojan layer injection, mode switching and integrity checks";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<ParseError>(m, "ParseError", base);
    py::register_exception<ConfigError>(m, "ConfigError", base);
    py::register_exception<DimensionError>(m, "DimensionError", base);
    py::register_exception<PatchMismatchError>(m, "PatchMismatchError", base);
    py::register_exception<IoError>(m, "IoError", base);
    py::register_exception<TrainingError>(m, "TrainingError", base);

    py::enum_<Mode>(m, "Mode")
        .value("Benign", Mode::Benign)
        .value("FalsePositive", Mode::FalsePositive)
        .value("FalseNegative", Mode::FalseNegative)
        .value("Swap", Mode::Swap);

    py::enum_<Activation>(m, "Activation")
        .value("Linear", Activation::Linear)
        .value("Relu", Activation::Relu)
        .value("Softmax", Activation::Softmax);

    py::class_<TrojanConfig>(m, "TrojanConfig")
        .def(py::init([](const py::object& mode, std::size_t primary, std::size_t secondary) {
                 return TrojanConfig{mode_arg(mode), primary, secondary};
             }),
             py::arg("mode") = Mode::Benign, py::arg("primary") = 0, py::arg("secondary") = 1)
        .def_readwrite("mode", &TrojanConfig::mode)
        .def_readwrite("primary", &TrojanConfig::primary)
        .def_readwrite("secondary", &TrojanConfig::secondary)
        .def(py::self == py::self)
        .def("__repr__", [](const TrojanConfig& c) {
            return "TrojanConfig(" + std::string(to_string(c.mode)) + ", " + std::to_string(c.primary) + ", " +
                   std::to_string(c.secondary) + ")";
        });

    py::class_<Layer>(m, "Layer")
        .def(py::init([](const FloatArray& w, std::optional<FloatArray> bias, Activation act) {
                 Layer l{to_matrix(w), std::nullopt, act};
                 if (bias) l.bias = to_vector(*bias);
                 return l;
             }),
             py::arg("weights"), py::arg("bias") = py::none(), py::arg("activation") = Activation::Linear)
        .def_property_readonly("weights", [](const Layer& l) { return to_array(l.weights); })
        .def_property_readonly("bias", [](const Layer& l) -> py::object {
            return l.bias ? py::object(to_array(*l.bias)) : py::none();
        })
        .def_readonly("activation", &Layer::activation)
        .def_property_readonly("in_dim", &Layer::in_dim)
        .def_property_readonly("out_dim", &Layer::out_dim);

    py::class_<Model>(m, "Model")
        .def(py::init([](std::vector<Layer> layers) {
                 Model model{std::move(layers)};
                 validate(model);
                 return model;
             }),
             py::arg("layers"))
        .def_readonly("layers", &Model::layers)
        .def_property_readonly("input_dim", &Model::input_dim)
        .def_property_readonly("output_dim", &Model::output_dim)
        .def(py::self == py::self)
        .def("forward", [](const Model& model, const FloatArray& x) { return to_array(forward(model, to_vector(x))); })
        .def("predict", [](const Model& model, const FloatArray& x) { return predict(model, to_vector(x)); });

    py::class_<Dataset>(m, "Dataset")
        .def_readonly("n_classes", &Dataset::n_classes)
        .def_readonly("dim", &Dataset::dim)
        .def("__len__", [](const Dataset& d) { return d.samples.size(); })
        .def_property_readonly("features", [](const Dataset& d) {
            py::array_t<float> out({d.samples.size(), static_cast<std::size_t>(d.dim)});
            float* dst = out.mutable_data();
            for (const Sample& s : d.samples) dst = std::copy(s.features.begin(), s.features.end(), dst);
            return out;
        })
        .def_property_readonly("labels", [](const Dataset& d) {
            py::array_t<std::uint32_t> out(d.samples.size());
            for (std::size_t i = 0; i < d.samples.size(); ++i) out.mutable_data()[i] = d.samples[i].label;
            return out;
        });

    m.def("gen_blobs", &gen_blobs, py::arg("seed"), py::arg("n_classes") = 10, py::arg("dim") = 16,
          py::arg("per_class") = 300, py::arg("spread") = 0.2f);
    m.def("load_dataset", &load_dataset, py::arg("path"));
    m.def("save_dataset", &save_dataset, py::arg("data"), py::arg("path"));

    m.def(
        "train_mlp",
        [](const Dataset& d, std::size_t hidden, std::size_t epochs, float lr, std::uint64_t seed) {
            TrainResult r;
            {
                py::gil_scoped_release release;
                r = train_mlp(d, {hidden, epochs, lr, seed});
            }
            return py::make_tuple(r.model, r.train_accuracy, r.final_loss);
        },
        py::arg("data"), py::arg("hidden") = 32, py::arg("epochs") = 200, py::arg("lr") = 0.5f, py::arg("seed") = 0);
    m.def("accuracy", &accuracy, py::arg("model"), py::arg("data"));

    m.def("serialize", [](const Model& model) { return to_bytes(serialize(model)); }, py::arg("model"));
    m.def("parse", [](const py::bytes& b) { return parse(from_bytes(b)); }, py::arg("data"));
    m.def("load_model", &load_model, py::arg("path"));
    m.def("save_model", &save_model, py::arg("model"), py::arg("path"));

    m.def(
        "build_mode_matrix", [](std::size_t n, const TrojanConfig& cfg) { return to_array(build_mode_matrix(n, cfg)); },
        py::arg("n"), py::arg("config"));
    m.def("inject", &inject, py::arg("model"), py::arg("config"));
    m.def("expected_class", &expected_class, py::arg("original_pred"), py::arg("config"));

    py::class_<WeightPatch>(m, "WeightPatch")
        .def("__len__", [](const WeightPatch& p) { return p.edits.size(); })
        .def_property_readonly("payload_bytes", &WeightPatch::payload_bytes)
        .def_property_readonly("edits", [](const WeightPatch& p) {
            py::list out;
            for (const ByteEdit& e : p.edits) {
                out.append(py::make_tuple(e.offset, py::bytes(reinterpret_cast<const char*>(e.before.data()), 4),
                                          py::bytes(reinterpret_cast<const char*>(e.after.data()), 4)));
            }
            return out;
        })
        .def("to_text", &export_patch);

    m.def(
        "diff_modes",
        [](const py::object& model_or_path, const TrojanConfig& from, const TrojanConfig& to,
           std::optional<std::size_t> layer) {
            const ModelLayout layout = py::isinstance<Model>(model_or_path)
                                           ? layout_of(model_or_path.cast<const Model&>())
                                           : load_layout(model_or_path.cast<std::filesystem::path>());
            const std::size_t index = layer.value_or(layout.layers.size() - 1);
            if (index >= layout.layers.size()) throw ConfigError("layer index out of range");
            return diff_modes(layout.layers[index], from, to, index);
        },
        py::arg("model"), py::arg("from_config"), py::arg("to_config"), py::arg("layer") = py::none());
    m.def("import_patch", &import_patch, py::arg("text"));
    m.def("load_patch", &load_patch, py::arg("path"));
    m.def("save_patch", &save_patch, py::arg("patch"), py::arg("path"));
    m.def(
        "apply_patch_file",
        [](const std::filesystem::path& path, const WeightPatch& patch) {
            const PatchReport r = apply_patch_file(path, patch);
            py::dict d;
            d["edits_applied"] = r.edits_applied;
            d["bytes_read"] = r.bytes_read;
            d["bytes_written"] = r.bytes_written;
            return d;
        },
        py::arg("path"), py::arg("patch"));
    m.def(
        "apply_patch_bytes",
        [](const py::bytes& data, const WeightPatch& patch) {
            auto bytes = from_bytes(data);
            apply_patch_bytes(bytes, patch);
            return to_bytes(bytes);
        },
        py::arg("data"), py::arg("patch"));

    m.def("sha256_hex", [](const py::bytes& b) { return sha256_hex(from_bytes(b)); }, py::arg("data"));

    py::class_<IntegrityManifest>(m, "IntegrityManifest")
        .def_readonly("structure_digest", &IntegrityManifest::structure_digest)
        .def_property_readonly("layer_digests", [](const IntegrityManifest& man) {
            std::vector<std::string> out;
            for (const LayerDigest& d : man.layers) out.push_back(d.digest);
            return out;
        })
        .def("to_text", &export_manifest)
        .def("same_digests", &IntegrityManifest::same_digests);
    m.def("manifest_create", &manifest_create, py::arg("path"));
    m.def("manifest_of_bytes", [](const py::bytes& b) { return manifest_of_bytes(from_bytes(b)); }, py::arg("data"));
    m.def("import_manifest", &import_manifest, py::arg("text"));

    py::class_<VerifyReport>(m, "VerifyReport")
        .def_readonly("readable", &VerifyReport::readable)
        .def_readonly("error", &VerifyReport::error)
        .def_readonly("structure_match", &VerifyReport::structure_match)
        .def_property_readonly("clean", &VerifyReport::clean)
        .def_property_readonly("flagged_layers", &VerifyReport::flagged_layers);
    m.def("manifest_verify", &manifest_verify, py::arg("path"), py::arg("manifest"));
    m.def(
        "manifest_verify_bytes",
        [](const py::bytes& b, const IntegrityManifest& man) { return manifest_verify_bytes(from_bytes(b), man); },
        py::arg("data"), py::arg("manifest"));

    py::enum_<Verdict>(m, "Verdict")
        .value("IdentityPassThrough", Verdict::IdentityPassThrough)
        .value("ModifiedIdentity", Verdict::ModifiedIdentity);

    m.def(
        "scan_model",
        [](const Model& model, float tolerance) {
            py::list out;
            for (const TrojanFinding& f : scan_model(model, tolerance)) {
                py::dict d;
                d["layer"] = f.layer;
                d["verdict"] = f.verdict;
                d["mode"] = f.match.mode;
                d["primary"] = f.match.primary;
                d["secondary"] = f.match.secondary;
                d["max_deviation"] = f.match.max_deviation;
                out.append(d);
            }
            return out;
        },
        py::arg("model"), py::arg("tolerance") = kDefaultTolerance);

    py::class_<EvalReport>(m, "EvalReport")
        .def_readonly("test_case", &EvalReport::test_case)
        .def_readonly("config", &EvalReport::cfg)
        .def_readonly("confidence_threshold", &EvalReport::confidence_threshold)
        .def_readonly("bit_identical", &EvalReport::bit_identical)
        .def_property_readonly("all", [](const EvalReport& r) { return subset_dict(r.all); })
        .def_property_readonly("confident", [](const EvalReport& r) { return subset_dict(r.confident); })
        .def_property_readonly("unique_max", [](const EvalReport& r) { return subset_dict(r.unique_max); });

    m.def("evaluate", &evaluate, py::arg("original"), py::arg("trojaned"), py::arg("data"), py::arg("config"),
          py::arg("confidence_threshold") = kDefaultConfidence, py::arg("test_case") = 1);
    m.def("draw_class_pairs", &draw_class_pairs, py::arg("seed"), py::arg("n_classes"), py::arg("count"));
    m.def(
        "run_test_matrix",
        [](const Model& original, const Dataset& data, const std::vector<ClassPair>& pairs,
           const std::vector<Mode>& modes, double threshold) {
            py::gil_scoped_release release;
            return run_test_matrix(original, data, pairs, modes, threshold);
        },
        py::arg("original"), py::arg("data"), py::arg("pairs"),
        py::arg("modes") = std::vector<Mode>{Mode::Benign, Mode::FalsePositive, Mode::FalseNegative, Mode::Swap},
        py::arg("confidence_threshold") = kDefaultConfidence);
    m.def("render_report", [](const std::vector<EvalReport>& r) { return render_report(r); }, py::arg("reports"));
    m.def("render_csv", [](const std::vector<EvalReport>& r) { return render_csv(r); }, py::arg("reports"));
}
