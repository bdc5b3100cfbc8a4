#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "complearn/experiment.hpp"

namespace py = pybind11;
using namespace complearn;

namespace {

Vec to_vec(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 1) throw ShapeError("expected a 1-D array");
    return Vec(a.data(), a.data() + a.shape(0));
}

Mat to_mat(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
    Mat m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), m.data.begin());
    return m;
}

py::array_t<double> from_vec(const Vec& v) {
    py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::array_t<double> from_mat(const Mat& m) {
    py::array_t<double> out({static_cast<py::ssize_t>(m.rows), static_cast<py::ssize_t>(m.cols)});
    std::copy(m.data.begin(), m.data.end(), out.mutable_data());
    return out;
}

std::shared_ptr<const TransitionMatrix> opt_transition(const py::object& t) {
    if (t.is_none()) return nullptr;
    return std::make_shared<TransitionMatrix>(t.cast<TransitionMatrix>());
}

LossSpec build_loss(const std::string& kind, const py::object& transition, double ga_threshold,
                    double nn_floor) {
    LossSpec spec;
    spec.kind = loss_kind_from_string(kind);
    spec.transition = opt_transition(transition);
    spec.ga_threshold = ga_threshold;
    spec.nn_floor = nn_floor;
    spec.validate();
    return spec;
}

std::string run_command(const std::string& command, const std::string& config_json,
                        const std::vector<double>& lrs, const std::vector<std::string>& methods,
                        bool verbose) {
    const ExperimentConfig cfg = ExperimentConfig::from_json(nlohmann::json::parse(config_json));
    CommandResult result;
    if (command == "train") {
        result = run_train(cfg, verbose);
    } else if (command == "grid") {
        result = run_grid(cfg, lrs, verbose);
    } else if (command == "riskcurve") {
        result = run_riskcurve(cfg, verbose);
    } else if (command == "gradreport") {
        std::vector<LossKind> kinds;
        for (const std::string& m : methods) kinds.push_back(loss_kind_from_string(m));
        result = run_gradreport(cfg, kinds, verbose);
    } else {
        throw ConfigError("unknown command '" + command + "'");
    }
    nlohmann::json doc{{"command", command}, {"config", cfg.to_json()},
                       {"results", result.summary}, {"files", result.files}};
    return doc.dump();
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "complementary-label learning core (URE and SCL losses, gradient diagnostics)";

    py::register_exception<Error>(m, "ComplearnError");

    m.def("softmax", [](const py::array_t<double>& v) { return from_vec(softmax(to_vec(v))); });
    m.def("log_softmax",
          [](const py::array_t<double>& v) { return from_vec(log_softmax(to_vec(v))); });
    m.def("cosine", [](const py::array_t<double>& a, const py::array_t<double>& b) {
        const Vec va = to_vec(a), vb = to_vec(b);
        return cosine(va, vb);
    });

    py::class_<Rng>(m, "Rng")
        .def(py::init<uint64_t, uint64_t>(), py::arg("seed"), py::arg("stream") = 0)
        .def("uniform", &Rng::next_double)
        .def("normal", &Rng::next_normal)
        .def("below", &Rng::below)
        .def("permutation", &Rng::permutation)
        .def("split", &Rng::split);

    py::class_<TransitionMatrix>(m, "TransitionMatrix")
        .def_static("uniform", &TransitionMatrix::uniform, py::arg("num_classes"))
        .def_static("from_matrix",
                    [](const py::array_t<double>& t) { return TransitionMatrix::from_matrix(to_mat(t)); })
        .def_static("load_csv", &TransitionMatrix::load_csv)
        .def("save_csv", &TransitionMatrix::save_csv)
        .def_property_readonly("matrix", [](const TransitionMatrix& t) { return from_mat(t.T); })
        .def_property_readonly("inverse", [](const TransitionMatrix& t) { return from_mat(t.Tinv); })
        .def_property_readonly("num_classes", [](const TransitionMatrix& t) { return t.num_classes; });

    m.def("load_idx", [](const std::string& images, const std::string& labels) {
        const RawDataset ds = load_idx(images, labels);
        py::array_t<int> y(static_cast<py::ssize_t>(ds.labels.size()));
        std::copy(ds.labels.begin(), ds.labels.end(), y.mutable_data());
        return py::make_tuple(from_mat(ds.features), y, ds.num_classes);
    });

    m.def(
        "synth_generate",
        [](int classes, int dim, int n, uint64_t seed, double separation, double scale) {
            const SyntheticData data =
                synth_generate(SyntheticSpec::separated(classes, dim, n, seed, separation, scale));
            py::array_t<int> y(static_cast<py::ssize_t>(data.data.labels.size()));
            std::copy(data.data.labels.begin(), data.data.labels.end(), y.mutable_data());
            return py::make_tuple(from_mat(data.data.features), y, from_mat(data.posterior));
        },
        py::arg("classes"), py::arg("dim"), py::arg("n"), py::arg("seed"),
        py::arg("separation") = 6.0, py::arg("scale") = 1.0);

    m.def(
        "draw_complementary",
        [](const py::array_t<int>& labels, const TransitionMatrix& t, uint64_t seed) {
            if (labels.ndim() != 1) throw ShapeError("labels must be 1-D");
            Rng rng(seed, 0x17);
            py::array_t<int> out(labels.shape(0));
            for (py::ssize_t i = 0; i < labels.shape(0); ++i) {
                out.mutable_data()[i] = rng.categorical(t.T.row(labels.data()[i]));
            }
            return out;
        },
        py::arg("labels"), py::arg("transition"), py::arg("seed"));

    m.def("loss_value",
          [](const std::string& kind, int label, const py::array_t<double>& logits,
             const py::object& transition, double ga_threshold, double nn_floor) {
              return loss_value(build_loss(kind, transition, ga_threshold, nn_floor), label,
                                to_vec(logits));
          },
          py::arg("kind"), py::arg("label"), py::arg("logits"), py::arg("transition") = py::none(),
          py::arg("ga_threshold") = 0.0, py::arg("nn_floor") = 0.0);
    m.def("loss_dlogits",
          [](const std::string& kind, int label, const py::array_t<double>& logits,
             const py::object& transition, double ga_threshold, double nn_floor) {
              auto [value, d] = loss_dlogits(build_loss(kind, transition, ga_threshold, nn_floor),
                                             label, to_vec(logits));
              return py::make_tuple(value, from_vec(d));
          },
          py::arg("kind"), py::arg("label"), py::arg("logits"), py::arg("transition") = py::none(),
          py::arg("ga_threshold") = 0.0, py::arg("nn_floor") = 0.0);

    py::class_<Model>(m, "Model")
        .def_static(
            "create",
            [](const std::string& arch, int dim, int hidden, int classes, uint64_t seed,
               const std::string& scheme) {
                Rng rng(seed, 1);
                const Arch a = arch == "mlp" ? Arch::mlp(dim, hidden, classes)
                                             : Arch::linear(dim, classes);
                return init_model(a, rng, init_scheme_from_string(scheme));
            },
            py::arg("arch"), py::arg("dim"), py::arg("hidden"), py::arg("classes"),
            py::arg("seed") = 1, py::arg("scheme") = "scaled_normal")
        .def_static("load", &load_checkpoint)
        .def("save", &save_checkpoint)
        .def("forward", [](const Model& model, const py::array_t<double>& x) {
            return from_vec(forward(model, to_vec(x)));
        })
        .def("predict",
             [](const Model& model, const py::array_t<double>& x) { return predict(model, to_vec(x)); })
        .def("loss_grad",
             [](const Model& model, const py::array_t<double>& x, int label,
                const std::string& kind, const py::object& transition, double ga_threshold,
                double nn_floor) {
                 auto [value, g] =
                     loss_grad(model, to_vec(x), label,
                               build_loss(kind, transition, ga_threshold, nn_floor));
                 return py::make_tuple(value, from_vec(g));
             },
             py::arg("x"), py::arg("label"), py::arg("kind"), py::arg("transition") = py::none(),
             py::arg("ga_threshold") = 0.0, py::arg("nn_floor") = 0.0)
        .def_property(
            "theta", [](const Model& model) { return from_vec(model.theta); },
            [](Model& model, const py::array_t<double>& theta) {
                Vec t = to_vec(theta);
                if (t.size() != model.theta.size()) throw ShapeError("theta length mismatch");
                model.theta = std::move(t);
            })
        .def_property_readonly("param_count",
                               [](const Model& model) { return model.arch.param_count(); });

    m.def("grad_triple",
          [](const Model& model, const py::array_t<double>& x, int y, int ybar,
             const std::string& kind, const py::object& transition) {
              const GradTriple t =
                  grad_triple(model, to_vec(x), y, ybar, build_loss(kind, transition, 0.0, 0.0));
              return py::make_tuple(from_vec(t.f), from_vec(t.c), from_vec(t.h));
          },
          py::arg("model"), py::arg("x"), py::arg("y"), py::arg("ybar"), py::arg("kind"),
          py::arg("transition") = py::none());

    m.def("run_command", &run_command, py::arg("command"), py::arg("config_json"),
          py::arg("lrs") = std::vector<double>{1e-1, 1e-2, 1e-3, 1e-4, 1e-5},
          py::arg("methods") = std::vector<std::string>{"ure", "ure_nn", "scl_exp"},
          py::arg("verbose") = false);
}
