#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ecrank/curve.hpp"
#include "ecrank/dataset.hpp"
#include "ecrank/interpret.hpp"
#include "ecrank/nn.hpp"
#include "ecrank/numtheory.hpp"
#include "ecrank/rng.hpp"
#include "ecrank/training.hpp"

namespace py = pybind11;
using namespace ecrank;

namespace {

CurveRecord make_record(const std::array<std::int64_t, 5>& a, std::int64_t conductor,
                        int rank, const std::string& label) {
    CurveRecord rec;
    rec.label = label;
    rec.a = a;
    rec.conductor = conductor;
    rec.rank = rank;
    validate_record(rec);
    return rec;
}

std::vector<double> to_vector(const py::array_t<double, py::array::c_style>& x) {
    if (x.ndim() != 1) {
        throw py::value_error("expected a 1-d float64 array");
    }
    return {x.data(), x.data() + x.shape(0)};
}

/// A trained model plus the slices and config it was trained with, exposed
/// as the python-facing handle.
class PyModel {
public:
    PyModel(CnnModel model, std::string manifest_json)
        : model_(std::move(model)), manifest_json_(std::move(manifest_json)) {
        model_.set_mode(Mode::eval);
    }

    static PyModel train_arrays(const py::array_t<double, py::array::c_style>& features,
                                const py::array_t<std::int64_t, py::array::c_style>& labels,
                                int epochs, std::uint64_t seed, int batch_size, double lr,
                                int steps_per_epoch, int num_classes, double split_ratio) {
        if (features.ndim() != 2 || labels.ndim() != 1
            || features.shape(0) != labels.shape(0)) {
            throw py::value_error("features must be (n, width), labels (n,)");
        }
        const auto n = static_cast<std::size_t>(features.shape(0));
        const auto width = static_cast<std::size_t>(features.shape(1));
        DatasetSlice slice;
        for (std::size_t i = 0; i < n; ++i) {
            CurveRecord rec;
            rec.label = "row" + std::to_string(i);
            rec.conductor = 1;
            rec.rank = static_cast<int>(labels.at(i));
            slice.records.push_back(rec);
            TraceVector tv;
            tv.bound = 0;
            tv.ap.resize(width, 0);
            tv.normalized.resize(width);
            for (std::size_t k = 0; k < width; ++k) {
                tv.normalized[k] = features.at(i, k);
            }
            slice.features.push_back(std::move(tv));
            slice.labels.push_back(rec.rank);
        }
        TrainConfig cfg;
        cfg.batch_size = batch_size;
        cfg.learning_rate = lr;
        cfg.steps_per_epoch = steps_per_epoch;
        cfg.epochs = epochs;
        cfg.seed = seed;
        cfg.bound = 0;
        cfg.num_classes = num_classes;
        const auto [train_sl, test_sl] =
            split_train_test(slice, SplitSpec{split_ratio, derive_seed(seed, "split")});
        TrainResult result = train(cfg, train_sl, test_sl);
        return PyModel(std::move(result.model), result.manifest.to_json().dump());
    }

    static PyModel load(const std::string& path) {
        Checkpoint ck = load_checkpoint(path);
        return PyModel(std::move(ck.model), ck.meta_json);
    }

    void save(const std::string& path) const {
        model_.save_checkpoint(path, 0, 0, 0, nlohmann::json::object());
    }

    py::array_t<double> scores(const py::array_t<double, py::array::c_style>& x) const {
        const ScoreVector sv = model_.forward_scores(to_vector(x));
        return py::array_t<double>(py::ssize_t(sv.scores.size()), sv.scores.data());
    }

    py::array_t<double> probabilities(
        const py::array_t<double, py::array::c_style>& x) const {
        const ScoreVector sv = model_.forward_scores(to_vector(x));
        return py::array_t<double>(py::ssize_t(sv.probabilities.size()),
                                   sv.probabilities.data());
    }

    int predict(const py::array_t<double, py::array::c_style>& x) const {
        return model_.forward_scores(to_vector(x)).predicted;
    }

    py::array_t<double> input_gradient(const py::array_t<double, py::array::c_style>& x,
                                       int v) const {
        const std::vector<double> g = model_.input_gradient(to_vector(x), v);
        return py::array_t<double>(py::ssize_t(g.size()), g.data());
    }

    int input_length() const { return model_.config().input_length; }
    int num_classes() const { return model_.config().num_classes; }
    const std::string& manifest_json() const { return manifest_json_; }

private:
    CnnModel model_;
    std::string manifest_json_;
};

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Frobenius-trace rank prediction: primes, a_p, Sato-Tate sampling, "
              "the 1D CNN, and saliency, bound from the C++ core.";

    m.def(
        "primes_up_to",
        [](std::uint64_t b) {
            const PrimeTable t = primes_up_to(b);
            return t.primes;
        },
        py::arg("b"), "All primes <= b, ascending.");

    m.def("legendre", &legendre, py::arg("a"), py::arg("p"),
          "Legendre symbol (a|p) for an odd prime p.");

    m.def(
        "ap",
        [](const std::array<std::int64_t, 5>& a, std::int64_t conductor, std::uint32_t p) {
            return frobenius_trace(make_record(a, conductor, 0, "py"), p);
        },
        py::arg("a_invariants"), py::arg("conductor"), py::arg("p"),
        "Frobenius trace a_p of the curve [a1,a2,a3,a4,a6].");

    m.def(
        "trace_vector",
        [](const std::array<std::int64_t, 5>& a, std::int64_t conductor,
           std::uint64_t bound) {
            const PrimeTable primes = primes_up_to(bound);
            const TraceVector tv =
                trace_vector(make_record(a, conductor, 0, "py"), primes);
            py::dict out;
            out["primes"] = primes.primes;
            std::vector<std::int64_t> ap(tv.ap.begin(), tv.ap.end());
            out["ap"] = ap;
            out["normalized"] =
                py::array_t<double>(py::ssize_t(tv.normalized.size()), tv.normalized.data());
            return out;
        },
        py::arg("a_invariants"), py::arg("conductor"), py::arg("bound"),
        "Integer traces and normalized features at all primes <= bound.");

    m.def(
        "sample_sato_tate",
        [](std::size_t count, std::uint64_t bound, std::uint64_t seed) {
            const PrimeTable primes = primes_up_to(bound);
            const SyntheticBatch batch = sample_sato_tate(count, primes, seed);
            py::array_t<double> out({batch.count, batch.width});
            std::copy(batch.values.begin(), batch.values.end(), out.mutable_data());
            return out;
        },
        py::arg("count"), py::arg("bound"), py::arg("seed"),
        "count x pi(bound) matrix of semicircle-distributed coefficients.");

    m.def(
        "mn_sum",
        [](const std::vector<std::int64_t>& ap, std::uint64_t bound) {
            const PrimeTable primes = primes_up_to(bound);
            if (ap.size() != primes.count()) {
                throw py::value_error("ap list must have pi(bound) entries");
            }
            TraceVector tv;
            tv.bound = bound;
            tv.ap.assign(ap.begin(), ap.end());
            tv.normalized.resize(ap.size());
            for (std::size_t i = 0; i < ap.size(); ++i) {
                tv.normalized[i] = static_cast<double>(ap[i])
                                   / (2.0 * std::sqrt(static_cast<double>(primes.primes[i])));
            }
            return mn_sum(tv, bound, primes);
        },
        py::arg("ap"), py::arg("bound"),
        "Mestre-Nagao sum (1/log b) sum (log p / p) a_p over primes <= bound.");

    m.def(
        "param_count",
        [](int num_classes, int input_length) {
            ArchConfig cfg;
            cfg.num_classes = num_classes;
            cfg.input_length = input_length;
            const ParamCount pc = param_count(cfg);
            py::list layers;
            for (const LayerInfo& l : pc.layers) {
                py::dict row;
                row["name"] = l.name;
                row["out_channels"] = l.out_channels;
                row["out_length"] = l.out_length;
                row["params"] = l.params;
                layers.append(row);
            }
            py::dict out;
            out["total"] = pc.total;
            out["layers"] = layers;
            return out;
        },
        py::arg("num_classes") = 5, py::arg("input_length") = 1229,
        "Per-layer parameter counts and shapes of the CNN.");

    py::class_<PyModel>(m, "Model")
        .def_static("train", &PyModel::train_arrays, py::arg("features"), py::arg("labels"),
                    py::arg("epochs") = 20, py::arg("seed") = 1,
                    py::arg("batch_size") = 3000, py::arg("lr") = 1e-3,
                    py::arg("steps_per_epoch") = 10, py::arg("num_classes") = 5,
                    py::arg("split_ratio") = 0.8,
                    "Train on an (n, width) feature matrix with integer labels; the "
                    "split, batching, and initialization all derive from `seed`.")
        .def_static("load", &PyModel::load, py::arg("path"))
        .def("save", &PyModel::save, py::arg("path"))
        .def("scores", &PyModel::scores, py::arg("x"))
        .def("probabilities", &PyModel::probabilities, py::arg("x"))
        .def("predict", &PyModel::predict, py::arg("x"))
        .def("input_gradient", &PyModel::input_gradient, py::arg("x"), py::arg("v"),
             "Saliency: gradient of the raw class-v score at x.")
        .def_property_readonly("input_length", &PyModel::input_length)
        .def_property_readonly("num_classes", &PyModel::num_classes)
        .def_property_readonly("manifest_json", &PyModel::manifest_json);

#ifdef VERSION_INFO
    m.attr("__version__") = VERSION_INFO;
#else
    m.attr("__version__") = "0.1.0";
#endif
}
