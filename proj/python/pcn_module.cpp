// Python bindings: networks, training, cost model, calibration and the
// config-driven experiment runner.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "pcn/data.hpp"
#include "pcn/errors.hpp"
#include "pcn/experiment.hpp"
#include "pcn/metrics.hpp"
#include "pcn/network.hpp"
#include "pcn/parallel.hpp"
#include "pcn/schedules.hpp"

namespace py = pybind11;
using namespace pcn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
    if (a.ndim() != 2) throw ShapeError("expected a 2-d array, got " + std::to_string(a.ndim()) + " dimensions");
    const auto r = static_cast<std::size_t>(a.shape(0)), c = static_cast<std::size_t>(a.shape(1));
    return Matrix(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

Array to_array(const Matrix& m) {
    Array a({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), a.mutable_data());
    return a;
}

Dataset to_dataset(const Array& inputs, const std::optional<std::vector<std::size_t>>& classes,
                   std::size_t num_classes) {
    Matrix x = to_matrix(inputs);
    if (!classes) {
        Dataset d;
        d.name = "python";
        d.inputs = std::move(x);
        return d;
    }
    std::size_t k = num_classes;
    for (auto c : *classes) k = std::max(k, c + 1);
    return make_labeled("python", std::move(x), *classes, k);
}

py::dict report_dict(const TrainReport& r) {
    py::dict d;
    d["network"] = r.network;
    d["energy_trace"] = r.energy_trace;
    d["trace_iterations"] = r.trace_iterations;
    d["mm"] = r.ledger.mm_count;
    d["smm"] = r.ledger.smm_count;
    d["weight_updates"] = r.ledger.weight_updates;
    d["test_accuracy"] = r.test_accuracy;
    d["diverged"] = r.diverged;
    d["divergence"] = r.divergence;
    return d;
}

}  // namespace

PYBIND11_MODULE(_pcn, m) {
    m.doc() = "Predictive-coding networks: iPC, PC, Z-IL and BP training with SMM accounting";
    m.attr("__version__") = kVersion;

    auto base = py::register_exception<Error>(m, "PcnError", PyExc_RuntimeError);
    py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
    py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());
    py::register_exception<UsageError>(m, "UsageError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<EngineError>(m, "EngineError", base.ptr());
    py::register_exception<AuditError>(m, "AuditError", base.ptr());

    py::class_<PCNetwork>(m, "Network")
        .def_static(
            "random",
            [](std::vector<std::size_t> dims, const std::string& activation, std::uint64_t seed) {
                Rng rng(seed);
                return PCNetwork::random(std::move(dims), parse_activation(activation), rng);
            },
            py::arg("dims"), py::arg("activation") = "tanh", py::arg("seed") = 0,
            "Random network; dims[0] is the output end, dims[-1] the top.")
        .def_static("load", py::overload_cast<const std::string&>(&load_network), py::arg("path"))
        .def("save", [](const PCNetwork& n, const std::string& path) { save_network(n, path); }, py::arg("path"))
        .def_property_readonly("dims", [](const PCNetwork& n) { return n.dims; })
        .def_property_readonly("depth", &PCNetwork::depth)
        .def_property_readonly("activation", [](const PCNetwork& n) { return to_string(n.activation); })
        .def_property(
            "weights",
            [](const PCNetwork& n) {
                py::list out;
                for (const auto& w : n.weights) out.append(to_array(w));
                return out;
            },
            [](PCNetwork& n, const std::vector<Array>& ws) {
                PCNetwork next = n;
                if (ws.size() != n.weights.size()) throw ShapeError("expected " + std::to_string(n.weights.size()) + " weight matrices");
                for (std::size_t l = 0; l < ws.size(); ++l) next.weights[l] = to_matrix(ws[l]);
                next.validate();
                n = std::move(next);
            })
        .def("forward", [](const PCNetwork& n, const Array& top) { return to_array(forward(n, to_matrix(top))); },
             py::arg("top"), "Top-down pass from the top layer (one sample per column).")
        .def("__eq__", [](const PCNetwork& a, const PCNetwork& b) { return a == b; })
        .def("__repr__", [](const PCNetwork& n) {
            std::ostringstream s;
            s << "Network(dims=[";
            for (std::size_t i = 0; i < n.dims.size(); ++i) s << (i ? ", " : "") << n.dims[i];
            s << "], activation='" << to_string(n.activation) << "')";
            return s.str();
        });

    m.def(
        "train",
        [](const PCNetwork& net, const Array& inputs, std::optional<std::vector<std::size_t>> classes,
           const std::string& algorithm, const std::string& mode, double gamma, double alpha, std::size_t T,
           std::size_t batch_size, std::size_t epochs, std::size_t total_steps, std::uint64_t seed,
           const std::string& engine, std::size_t workers, bool stop_on_plateau, std::size_t num_classes) {
            const Dataset d = to_dataset(inputs, classes, num_classes);
            ScheduleConfig cfg;
            cfg.algorithm = parse_algorithm(algorithm);
            cfg.gamma = gamma;
            cfg.alpha = alpha;
            cfg.T = T;
            cfg.batch_size = batch_size;
            cfg.epochs = epochs;
            cfg.total_steps = total_steps;
            cfg.seed = seed;
            TrainOptions opt;
            opt.engine = engine == "parallel" ? EngineKind::LayerParallel : EngineKind::Serial;
            opt.workers = workers;
            opt.stop_on_plateau = stop_on_plateau;
            TrainReport r;
            {
                py::gil_scoped_release release;
                r = train(net, d, cfg, parse_mode(mode), opt);
            }
            return report_dict(r);
        },
        py::arg("network"), py::arg("inputs"), py::arg("classes") = py::none(), py::kw_only(),
        py::arg("algorithm") = "ipc", py::arg("mode") = "supervised", py::arg("gamma") = 0.5,
        py::arg("alpha") = 1e-3, py::arg("T") = 8, py::arg("batch_size") = 0, py::arg("epochs") = 1,
        py::arg("total_steps") = 0, py::arg("seed") = 0, py::arg("engine") = "serial", py::arg("workers") = 1,
        py::arg("stop_on_plateau") = true, py::arg("num_classes") = 0,
        "Train a copy of `network` on samples stored as columns of `inputs`.");

    m.def(
        "zil_update",
        [](const PCNetwork& net, const Array& x, const Array& y, double alpha) {
            const Matrix input = to_matrix(x), target = to_matrix(y);
            ScheduleConfig cfg;
            cfg.algorithm = Algorithm::ZIL;
            cfg.gamma = 1.0;
            cfg.alpha = alpha;
            const auto state = compute_errors(net, clamp(feedforward_init(net, input), Mode::Supervised, input, target));
            return zil_update(net, state, cfg);
        },
        py::arg("network"), py::arg("input"), py::arg("target"), py::arg("alpha"));
    m.def(
        "bp_update",
        [](const PCNetwork& net, const Array& x, const Array& y, double alpha) {
            return bp_update(net, to_matrix(x), to_matrix(y), alpha);
        },
        py::arg("network"), py::arg("input"), py::arg("target"), py::arg("alpha"));

    m.def(
        "predicted_smm",
        [](const std::string& algorithm, std::size_t L, std::size_t T, const std::string& mode,
           const std::string& order) {
            const auto c = predicted_smm(parse_algorithm(algorithm), L, T, parse_mode(mode),
                                         order == "sequential" ? IpcOrder::Sequential : IpcOrder::Snapshot);
            return py::make_tuple(c.mm, c.smm);
        },
        py::arg("algorithm"), py::arg("L"), py::arg("T") = 1, py::arg("mode") = "supervised",
        py::arg("order") = "snapshot", "(MMs, SMMs) per weight update.");

    m.def(
        "ada_ece",
        [](const std::vector<double>& confidence, const std::vector<bool>& correct, std::size_t n_bins) {
            std::unique_ptr<bool[]> hits(new bool[correct.size()]);
            std::copy(correct.begin(), correct.end(), hits.get());
            return ada_ece(confidence, std::span<const bool>(hits.get(), correct.size()), n_bins).ada_ece;
        },
        py::arg("confidence"), py::arg("correct"), py::arg("n_bins") = 15);

    m.def(
        "read_idx",
        [](const std::string& path) {
            const auto t = read_idx_file(path);
            std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
            py::array_t<std::uint8_t> a(shape);
            std::copy(t.data.begin(), t.data.end(), a.mutable_data());
            return a;
        },
        py::arg("path"));

    m.def(
        "run",
        [](const std::string& config, std::optional<std::string> out, bool dry_run) {
            auto cfg = load_config(config);
            Overrides o;
            o.out = std::move(out);
            apply_overrides(cfg, o);
            std::ostringstream log;
            int rc;
            {
                py::gil_scoped_release release;
                rc = run_experiment(cfg, dry_run, log);
            }
            return py::make_tuple(rc, log.str());
        },
        py::arg("config"), py::arg("out") = py::none(), py::arg("dry_run") = false,
        "Run a JSON experiment config; returns (exit code, log text).");
}
