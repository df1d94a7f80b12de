#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "diffconst/analysis.hpp"
#include "diffconst/experiment.hpp"

namespace py = pybind11;
using namespace diffconst;

namespace {

ExperimentConfig config_from(const std::string& preset_name, const std::string& overrides_json) {
    ExperimentConfig base = preset(preset_name);
    if (overrides_json.empty()) return base;
    const json j = json::parse(overrides_json);
    if (j.contains("preset")) base = preset(j["preset"].get<std::string>());
    return from_json(j, base);
}

/// A resolved problem held for repeated loss and metric queries.
class Experiment {
public:
    Experiment(const std::string& preset_name, const std::string& overrides_json, int threads)
        : cfg_(config_from(preset_name, overrides_json)), rx_(resolve(cfg_, threads)) {}

    const std::vector<double>& theta0() const { return rx_.theta0; }

    std::vector<std::string> slot_names() const {
        std::vector<std::string> out;
        for (const SlotDef& s : rx_.problem.spec.slots()) out.push_back(s.name);
        return out;
    }

    py::tuple loss_and_grad(const std::vector<double>& theta) const {
        check(theta);
        LossResult r;
        {
            py::gil_scoped_release release;
            r = loss(rx_.problem, theta, true);
        }
        return py::make_tuple(r.loss, r.grad);
    }

    double loss_value(const std::vector<double>& theta) const {
        check(theta);
        py::gil_scoped_release release;
        return loss(rx_.problem, theta, false).loss;
    }

    MetricsReport metrics(const std::vector<double>& theta) const {
        check(theta);
        py::gil_scoped_release release;
        return evaluate_report(rx_.problem, theta);
    }

    std::vector<ElementSet> elements(const std::vector<double>& theta) const {
        check(theta);
        return unpack_elements(rx_.problem.spec, theta, UtcInstant::parse(cfg_.window.epoch));
    }

    std::string config_json() const { return to_json(cfg_).dump(); }
    const ExperimentConfig& config() const { return cfg_; }
    const Problem& problem() const { return rx_.problem; }

private:
    void check(const std::vector<double>& theta) const {
        if (theta.size() != rx_.theta0.size()) {
            throw py::value_error("theta has " + std::to_string(theta.size()) + " entries, expected " +
                                  std::to_string(rx_.theta0.size()));
        }
    }

    ExperimentConfig cfg_;
    ResolvedExperiment rx_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Differentiable satellite constellation design";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<SpecError>(m, "SpecError", PyExc_ValueError);
    py::register_exception<GeoError>(m, "GeoError", PyExc_ValueError);
    py::register_exception<OptimError>(m, "OptimError", PyExc_RuntimeError);
    py::register_exception<AnalysisError>(m, "AnalysisError", PyExc_RuntimeError);

    py::class_<ElementSet>(m, "Elements")
        .def_readonly("a_km", &ElementSet::a)
        .def_readonly("e", &ElementSet::e)
        .def_property_readonly("inc_deg", [](const ElementSet& s) { return s.inc / kDeg; })
        .def_property_readonly("raan_deg", [](const ElementSet& s) { return wrap_two_pi(s.raan) / kDeg; })
        .def_property_readonly("argp_deg", [](const ElementSet& s) { return wrap_two_pi(s.argp) / kDeg; })
        .def_property_readonly("ma_deg", [](const ElementSet& s) { return wrap_two_pi(s.ma) / kDeg; })
        .def_property_readonly("perigee_alt_km", [](const ElementSet& s) { return s.perigee_radius() - kEarthRadius; })
        .def_property_readonly("apogee_alt_km", [](const ElementSet& s) { return s.apogee_radius() - kEarthRadius; })
        .def("__repr__", [](const ElementSet& s) {
            return "Elements(a_km=" + format_double(s.a) + ", e=" + format_double(s.e) +
                   ", raan_deg=" + format_double(wrap_two_pi(s.raan) / kDeg) +
                   ", ma_deg=" + format_double(wrap_two_pi(s.ma) / kDeg) + ")";
        });

    py::class_<MetricsReport>(m, "MetricsReport")
        .def_readonly("hard_coverage", &MetricsReport::hard_coverage)
        .def_readonly("hard_revisit_min", &MetricsReport::hard_revisit_min)
        .def_readonly("soft_coverage", &MetricsReport::soft_coverage)
        .def_readonly("soft_revisit_min", &MetricsReport::soft_revisit_min)
        .def("__repr__", [](const MetricsReport& r) { return report_json(r).dump(); });

    py::class_<TraceRow>(m, "TraceRow")
        .def_readonly("iter", &TraceRow::iter)
        .def_readonly("evals", &TraceRow::evals)
        .def_readonly("loss", &TraceRow::loss)
        .def_readonly("soft_coverage", &TraceRow::soft_coverage)
        .def_readonly("soft_revisit_min", &TraceRow::soft_revisit_min)
        .def_readonly("hard_coverage", &TraceRow::hard_coverage)
        .def_readonly("hard_revisit_min", &TraceRow::hard_revisit_min);

    py::class_<RunResult>(m, "RunResult")
        .def_property_readonly("trace", [](const RunResult& r) { return r.trace.rows; })
        .def_property_readonly("final_theta", [](const RunResult& r) { return r.trace.final_theta; })
        .def_property_readonly("evaluations", [](const RunResult& r) { return r.trace.evaluations; })
        .def_readonly("initial", &RunResult::initial)
        .def_readonly("final", &RunResult::final)
        .def_readonly("elements", &RunResult::final_elements);

    py::class_<Experiment>(m, "Experiment")
        .def(py::init<const std::string&, const std::string&, int>(), py::arg("preset") = "exp2",
             py::arg("overrides_json") = "", py::arg("threads") = 0)
        .def_property_readonly("theta0", &Experiment::theta0)
        .def_property_readonly("slot_names", &Experiment::slot_names)
        .def_property_readonly("config_json", &Experiment::config_json)
        .def("loss_and_grad", &Experiment::loss_and_grad, py::arg("theta"))
        .def("loss", &Experiment::loss_value, py::arg("theta"))
        .def("metrics", &Experiment::metrics, py::arg("theta"))
        .def("elements", &Experiment::elements, py::arg("theta"))
        .def(
            "run",
            [](const Experiment& e, const std::filesystem::path& out_dir, int threads) {
                py::gil_scoped_release release;
                return run_experiment(e.config(), out_dir, threads);
            },
            py::arg("out_dir") = std::filesystem::path{}, py::arg("threads") = 0)
        .def(
            "landscape",
            [](const Experiment& e, const std::vector<double>& center, const std::string& x_slot,
               const std::string& y_slot, int resolution, int threads) {
                const AxisSpec x{x_slot, 0.0, 360.0, resolution}, y{y_slot, 0.0, 360.0, resolution};
                Landscape land;
                {
                    py::gil_scoped_release release;
                    land = landscape_grid(e.problem(), center, x, y, threads);
                }
                std::vector<std::vector<double>> relaxed(static_cast<std::size_t>(land.ny)),
                    hard(static_cast<std::size_t>(land.ny));
                for (const LandscapeCell& c : land.cells) {
                    relaxed[static_cast<std::size_t>(c.iy)].push_back(c.relaxed_loss);
                    hard[static_cast<std::size_t>(c.iy)].push_back(c.hard_loss);
                }
                return py::make_tuple(relaxed, hard);
            },
            py::arg("center"), py::arg("x_slot"), py::arg("y_slot"), py::arg("resolution") = 65,
            py::arg("threads") = 0);

    m.def("presets", &preset_names);
    m.def(
        "walker",
        [](int total, int planes, int phasing, double inc_deg, double alt_km, double raan0_deg) {
            return walker_generate(total, planes, phasing, inc_deg, alt_km, raan0_deg);
        },
        py::arg("total") = 24, py::arg("planes") = 6, py::arg("phasing") = 1, py::arg("inc_deg") = 60.0,
        py::arg("alt_km") = 550.0, py::arg("raan0_deg") = 0.0);
    m.def(
        "evaluate",
        [](const std::vector<ElementSet>& elements, const Experiment& e, int threads) {
            const Problem& p = e.problem();
            py::gil_scoped_release release;
            return eval_constellation(elements, p.targets, p.window, p.relax, threads);
        },
        py::arg("elements"), py::arg("experiment"), py::arg("threads") = 0,
        "Hard and soft metrics of fixed elements on an experiment's targets and window.");
    m.def("numpy_uniform", &numpy_uniform, py::arg("seed"), py::arg("count"), py::arg("lo") = 0.0,
          py::arg("hi") = 1.0);
}
