#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "flydraw/config.hpp"
#include "flydraw/errors.hpp"
#include "flydraw/eval.hpp"
#include "flydraw/loop.hpp"
#include "flydraw/pipeline.hpp"
#include "flydraw/service.hpp"
#include "flydraw/testset.hpp"

namespace py = pybind11;
using namespace flydraw;

namespace {

using Points2 = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;
using Points3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

DrawnPath to_path(const Points2& pts) {
  DrawnPath p;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) p.points.emplace_back(pts(i, 0), pts(i, 1));
  return p;
}

Points2 from_path(const DrawnPath& p) {
  Points2 out(static_cast<Eigen::Index>(p.points.size()), 2);
  for (std::size_t i = 0; i < p.points.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = p.points[i].transpose();
  return out;
}

template <class F>
Points3 stack(std::size_t n, F&& get) {
  Points3 out(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) out.row(static_cast<Eigen::Index>(i)) = get(i).transpose();
  return out;
}

PipelineConfig config_of(const std::string& json) { return json.empty() ? PipelineConfig{} : parse_config(json); }

py::dict flight_dict(const FlightLog& log) {
  const auto& t = log.ticks;
  Eigen::VectorXd times(static_cast<Eigen::Index>(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i) times(static_cast<Eigen::Index>(i)) = t[i].t;
  py::dict d;
  d["t"] = times;
  d["desired"] = stack(t.size(), [&](std::size_t i) { return t[i].desired.p; });
  d["actual"] = stack(t.size(), [&](std::size_t i) { return t[i].current.p; });
  d["reference"] = stack(t.size(), [&](std::size_t i) { return t[i].reference.p; });
  d["rms_error"] = t.empty() ? 0.0 : rms_error(log);
  d["peak_error"] = t.empty() ? 0.0 : peak_error(log);
  d["complete"] = log.complete();
  d["error"] = log.error;
  d["generator"] = log.generator_tag;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Learned reference pre-block for a simulated quadrotor";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidInput>(m, "InvalidInput", error.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", error.ptr());
  py::register_exception<FormatError>(m, "FormatError", error.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<NotFound>(m, "NotFound", error.ptr());
  py::register_exception<SimulationDiverged>(m, "SimulationDiverged", error.ptr());
  py::register_exception<TrainingDiverged>(m, "TrainingDiverged", error.ptr());
  py::register_exception<PipelineFailure>(m, "PipelineFailure", error.ptr());

  py::class_<VehicleState>(m, "VehicleState")
      .def(py::init<>())
      .def_readwrite("p", &VehicleState::p)
      .def_readwrite("v", &VehicleState::v)
      .def_readwrite("euler", &VehicleState::euler)
      .def_readwrite("omega", &VehicleState::omega)
      .def_readwrite("zacc", &VehicleState::zacc)
      .def("__eq__", &VehicleState::operator==);

  py::class_<DesiredTrajectory>(m, "DesiredTrajectory")
      .def("__len__", &DesiredTrajectory::size)
      .def("__getitem__", [](const DesiredTrajectory& t, long i) {
        if (i < 0) i += static_cast<long>(t.size());
        if (i < 0 || i >= static_cast<long>(t.size())) throw py::index_error();
        return t[static_cast<std::size_t>(i)];
      })
      .def_property_readonly("duration", &DesiredTrajectory::duration)
      .def_property_readonly("source", [](const DesiredTrajectory& t) { return to_string(t.source()); })
      .def_property_readonly("positions", [](const DesiredTrajectory& t) { return stack(t.size(), [&](std::size_t i) { return t[i].p; }); })
      .def_property_readonly("velocities", [](const DesiredTrajectory& t) { return stack(t.size(), [&](std::size_t i) { return t[i].v; }); })
      .def("max_speed", &DesiredTrajectory::max_speed)
      .def("max_accel", &DesiredTrajectory::max_fd_accel)
      .def("to_text", [](const DesiredTrajectory& t) { return format_trajectory(t); })
      .def_static("from_text", &parse_trajectory);

  m.attr("TRAJECTORY_RATE") = kTrajectoryRate;
  m.def("process_drawn_path",
        [](const Points2& pts, double v_max, double a_max) {
          DrawOptions o;
          o.bounds = {v_max, a_max};
          return process_drawn_path(to_path(pts), o);
        },
        py::arg("points"), py::arg("v_max") = 0.6, py::arg("a_max") = 2.0,
        "Bound-limited 7 Hz trajectory from an (n, 2) array of (x, z) points in metres.");
  m.def("rescale_speed", &rescale_speed, py::arg("trajectory"), py::arg("factor"), py::arg("speed_ceiling") = 1.5);
  m.def("training_sweep",
        [](double duration) {
          SweepOptions o;
          o.duration = duration;
          return gen_training_trajectory(o).trajectory;
        },
        py::arg("duration") = 400.0);
  m.def("bundled_path_names", [] {
    std::vector<std::string> out;
    for (const NamedPath& p : bundled_test_paths()) out.push_back(p.name);
    return out;
  });
  m.def("bundled_path", [](const std::string& name) { return from_path(bundled_path(name).path); });

  m.def("improvement", &improvement, py::arg("e_dnn"), py::arg("e_base"));
  m.def("preset_names", &preset_names);
  m.def("feature_length", [](const std::string& name) {
    const auto f = preset(name);
    if (!f) throw ConfigError("'" + name + "' has no generator");
    return f->feature_length();
  });

  m.def("default_config", [] { return format_config(PipelineConfig{}); });
  m.def("normalize_config", [](const std::string& json) { return format_config(parse_config(json)); });

  py::class_<ReferenceGenerator>(m, "ReferenceGenerator")
      .def_static("zero", [](const std::string& name) {
        const auto f = preset(name);
        if (!f) throw ConfigError("'" + name + "' has no generator");
        return ReferenceGenerator::zero(*f);
      })
      .def_static("load", &load_bundle, py::arg("directory"))
      .def("save", [](const ReferenceGenerator& g, const std::string& dir) { save_bundle(g, dir); })
      .def_property_readonly("config", [](const ReferenceGenerator& g) { return g.features().name; })
      .def_property_readonly("deltas", [](const ReferenceGenerator& g) { return g.features().deltas; })
      .def_property_readonly("use_feedback", [](const ReferenceGenerator& g) { return g.features().use_feedback; })
      .def_property_readonly("feature_length", [](const ReferenceGenerator& g) { return g.features().feature_length(); })
      .def("generate", &ReferenceGenerator::generate, py::arg("trajectory"), py::arg("t"), py::arg("current"))
      .def("digest", &generator_digest);

  m.def("train_generator",
        [](const std::string& name, const std::string& config_json) {
          const PipelineConfig cfg = config_of(config_json);
          py::gil_scoped_release release;
          return train_pipeline(cfg, name).generator;
        },
        py::arg("config"), py::arg("config_json") = "",
        "Collect baseline flights, build pairs, split and train the six networks.");

  m.def("fly",
        [](const DesiredTrajectory& traj, const ReferenceGenerator* gen, std::uint64_t seed, bool pulse,
           const std::string& config_json) {
          const PipelineConfig cfg = config_of(config_json);
          LoopOptions o;
          o.seed = seed;
          o.disturbance.pulse = pulse;
          FlightLog log;
          {
            py::gil_scoped_release release;
            log = run_closed_loop(traj, cfg.gains, cfg.plant, gen, o);
          }
          return flight_dict(log);
        },
        py::arg("trajectory"), py::arg("generator") = nullptr, py::arg("seed") = 0, py::arg("pulse") = false,
        py::arg("config_json") = "",
        "Closed-loop flight; returns 7 Hz times, desired/actual/reference positions and the errors.");

  py::class_<Service>(m, "_Service")
      .def(py::init([](const std::string& config_json, const std::string& store) {
             return std::make_unique<Service>(config_of(config_json), store);
           }),
           py::arg("config_json") = "", py::arg("store") = "")
      .def("submit_path", &Service::submit_path, py::call_guard<py::gil_scoped_release>())
      .def("simulate", &Service::simulate, py::call_guard<py::gil_scoped_release>())
      .def("train", &Service::train, py::call_guard<py::gil_scoped_release>())
      .def("list_models", &Service::list_models)
      .def("get_session", &Service::get_session)
      .def("add_model", &Service::add_model, py::arg("generator"), py::arg("info_json") = "{}");
}
